//! Command-line front end.
//!
//! [`run`] takes the arguments and output streams explicitly so it can be
//! driven from tests. Everything written to `out` is a function of the
//! inputs and flags; wall times go to `err`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::domain::{load_domain, Nmrdp};
use crate::error::{Error, Result};
use crate::formula::{render_lossy, Formula, PropositionTable};
use crate::oracle::{check_reward_normal, universe_for, OracleLimits};
use crate::parser::parse;
use crate::progression::replay_steps;
use crate::solver::{anytime_solve, simulate_policy, SolveOptions, SolveReport, StopReason, DEFAULT_EPSILON};
use crate::state::WorldState;
use crate::xmdp::{reachable_xmdp, AuditLimits, Xmdp};

pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "nmrdp", version, about = "Decision processes with $FLTL rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Discount factor in [0, 1); overrides the domain file.
    #[arg(long, global = true)]
    beta: Option<f64>,

    /// Convergence tolerance on values.
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,

    /// Maximum number of e-states to build.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: usize,

    /// Anytime deadline in milliseconds (no deadline by default).
    #[arg(long = "deadline-ms", global = true)]
    deadline_ms: Option<u64>,

    /// Solution method: vi, lao or rtdp.
    #[arg(long, global = true, default_value = "lao")]
    method: String,

    /// Seed for RTDP trials and simulation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Bound: normality check 3, simulation 60, audit 4.
    #[arg(long, global = true)]
    horizon: Option<usize>,

    /// Simulation runs.
    #[arg(long, global = true, default_value_t = 10_000)]
    runs: usize,

    /// Output file (translate) or path prefix (solve).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print NNF and canonical form, and check reward-normality.
    Check {
        /// A formula, or a domain file whose reward formulae are checked.
        input: String,
    },
    /// Replay the reward specification of a domain along a trace.
    Progress {
        domain: PathBuf,
        /// States such as `{p,q} {} {p}`.
        trace: String,
    },
    /// Build the reachable expanded MDP.
    Translate { domain: PathBuf },
    /// Solve and write the policy and report.
    Solve { domain: PathBuf },
    /// Solve, then estimate the policy value by simulation.
    Simulate { domain: PathBuf },
    /// Look for e-states with no distinguishing future.
    Audit { domain: PathBuf },
}

/// Validated settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub beta: Option<f64>,
    pub epsilon: f64,
    pub budget: usize,
    pub deadline: Option<Duration>,
    pub method: crate::solver::Method,
    pub seed: u64,
    pub horizon: Option<usize>,
    pub runs: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    fn from_cli(cli: &Cli) -> Result<Self> {
        if let Some(b) = cli.beta {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Invariant(format!("--beta {b} is outside [0, 1)")));
            }
        }
        if !(cli.epsilon > 0.0 && cli.epsilon.is_finite()) {
            return Err(Error::Invariant(format!("--epsilon {} must be positive", cli.epsilon)));
        }
        if cli.budget == 0 {
            return Err(Error::Invariant("--budget must be at least 1".into()));
        }
        if cli.runs == 0 {
            return Err(Error::Invariant("--runs must be at least 1".into()));
        }
        Ok(RunConfig {
            beta: cli.beta,
            epsilon: cli.epsilon,
            budget: cli.budget,
            deadline: cli.deadline_ms.map(Duration::from_millis),
            method: cli.method.parse()?,
            seed: cli.seed,
            horizon: cli.horizon,
            runs: cli.runs,
            out: cli.out.clone(),
        })
    }

    fn options(&self) -> SolveOptions {
        let mut o = SolveOptions::default().with_epsilon(self.epsilon).with_seed(self.seed);
        o.deadline = self.deadline;
        o
    }

    fn describe(&self, discount: f64) -> String {
        let deadline = self.deadline.map_or("none".to_string(), |d| d.as_millis().to_string());
        format!(
            "# method={} beta={} epsilon={:e} budget={} deadline_ms={} seed={}\n",
            self.method, discount, self.epsilon, self.budget, deadline, self.seed
        )
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let sink: &mut dyn Write = if informational { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if informational { 0 } else { 1 };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::from_cli(cli)?;
    match &cli.command {
        Command::Check { input } => cmd_check(input, &cfg, out),
        Command::Progress { domain, trace } => cmd_progress(&load(domain, &cfg)?, trace, out),
        Command::Translate { domain } => cmd_translate(&load(domain, &cfg)?, &cfg, out),
        Command::Solve { domain } => cmd_solve(&load(domain, &cfg)?, &cfg, out, err),
        Command::Simulate { domain } => cmd_simulate(&load(domain, &cfg)?, &cfg, out, err),
        Command::Audit { domain } => cmd_audit(&load(domain, &cfg)?, &cfg, out),
    }
}

fn load(path: &Path, cfg: &RunConfig) -> Result<Nmrdp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let m = load_domain(&text)?;
    match cfg.beta {
        Some(b) => m.with_discount(b),
        None => Ok(m),
    }
}

pub fn cmd_check(input: &str, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let horizon = cfg.horizon.unwrap_or(3);
    let path = Path::new(input);
    let (table, formulas): (PropositionTable, Vec<(String, Formula)>) = if path.is_file() {
        let m = load(path, cfg)?;
        let fs = m
            .reward()
            .entries()
            .iter()
            .map(|e| (e.label.clone(), e.formula.clone()))
            .collect();
        (m.table().clone(), fs)
    } else {
        let mut table = PropositionTable::new();
        let f = parse(input, &mut table)?;
        (table, vec![("formula".to_string(), f)])
    };
    let limits = OracleLimits::default();
    let mut abnormal = false;
    for (label, f) in &formulas {
        writeln!(out, "{label}")?;
        writeln!(out, "  nnf:       {}", render_lossy(f, &table))?;
        writeln!(out, "  canonical: {}", render_lossy(&f.canonical(), &table))?;
        let universe = universe_for(f, table.len(), horizon, &limits)?;
        let report = check_reward_normal(f, &universe, &limits)?;
        match &report.counterexample {
            None => writeln!(out, "  reward-normal at bound H={horizon}")?,
            Some(cex) => {
                abnormal = true;
                writeln!(out, "  not reward-normal at bound H={horizon}")?;
                let states: Vec<String> = cex.trace.states().iter().map(|s| s.display(&table).to_string()).collect();
                writeln!(out, "  counterexample trace: {}", states.join(" "))?;
                writeln!(out, "  rewarded stages: {:?}", cex.rewarded_stages)?;
                writeln!(
                    out,
                    "  formula holds: {}, forced prefixes rewarded: {}",
                    cex.holds, !cex.holds
                )?;
            }
        }
    }
    if abnormal {
        let e = Error::AbnormalFormula { horizon };
        writeln!(out, "{e}")?;
        return Ok(e.exit_code());
    }
    Ok(0)
}

/// Parses whitespace-separated `{p,q}` state sets.
pub fn parse_trace(text: &str, table: &PropositionTable) -> Result<Vec<WorldState>> {
    let mut states = Vec::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        let offset = text.len() - rest.len();
        let bad = |message: String| Error::Format { line: 1, message };
        if !rest.starts_with('{') {
            return Err(bad(format!("expected `{{` at offset {offset}")));
        }
        let close = rest
            .find('}')
            .ok_or_else(|| bad(format!("unclosed state set at offset {offset}")))?;
        let mut s = WorldState::empty(table.len());
        for name in rest[1..close].split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let p = table
                .id(name)
                .ok_or_else(|| bad(format!("unknown proposition `{name}` at offset {offset}")))?;
            s.insert(p);
        }
        states.push(s);
        rest = rest[close + 1..].trim_start();
    }
    if states.is_empty() {
        return Err(Error::Format {
            line: 1,
            message: "empty trace".into(),
        });
    }
    Ok(states)
}

pub fn cmd_progress(m: &Nmrdp, trace: &str, out: &mut dyn Write) -> Result<i32> {
    let table = m.table();
    let states = parse_trace(trace, table)?;
    // Print the stages that progress cleanly before reporting a failure.
    let mut done = Vec::new();
    let mut failure = None;
    for k in 1..=states.len() {
        match replay_steps(m.reward(), &states[..k], Some(table)) {
            Ok(mut steps) => done.push(steps.pop().expect("k >= 1")),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    for (i, step) in done.iter().enumerate() {
        let bits: Vec<String> = m
            .reward()
            .entries()
            .iter()
            .zip(&step.rewarded)
            .map(|(e, &b)| format!("{}={}", e.label, u8::from(b)))
            .collect();
        writeln!(
            out,
            "stage {} {} {} total {}",
            i + 1,
            states[i].display(table),
            bits.join(" "),
            step.total_reward
        )?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(0),
    }
}

pub fn cmd_translate(m: &Nmrdp, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let x = reachable_xmdp(m, cfg.budget)?;
    let g = x.graph();
    match &cfg.out {
        Some(path) => std::fs::write(path, g.export())?,
        None => out.write_all(g.export().as_bytes())?,
    }
    writeln!(out, "{} e-states, {} edges", g.nodes.len(), g.transition_count())?;
    Ok(0)
}

fn solve<'m>(m: &'m Nmrdp, cfg: &RunConfig, err: &mut dyn Write) -> Result<(Xmdp<'m>, SolveReport)> {
    let mut x = Xmdp::with_budget(m, cfg.budget)?;
    let report = anytime_solve(&mut x, cfg.method, &cfg.options())?;
    writeln!(err, "time_ms {:.3}", report.wall_time.as_secs_f64() * 1e3)?;
    Ok((x, report))
}

fn budget_code(report: &SolveReport, cfg: &RunConfig, err: &mut dyn Write) -> Result<i32> {
    if report.stop == StopReason::Budget {
        let e = Error::BudgetExceeded {
            budget: cfg.budget,
            nodes: report.expanded,
        };
        writeln!(err, "error: {e}")?;
        return Ok(e.exit_code());
    }
    Ok(0)
}

pub fn cmd_solve(m: &Nmrdp, cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let (_, report) = solve(m, cfg, err)?;
    let text = format!("{}{}", cfg.describe(m.discount()), report.export());
    if let Some(prefix) = &cfg.out {
        std::fs::write(with_suffix(prefix, "policy"), report.policy.export())?;
        std::fs::write(with_suffix(prefix, "report"), &text)?;
    }
    out.write_all(text.as_bytes())?;
    budget_code(&report, cfg, err)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_simulate(m: &Nmrdp, cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let horizon = cfg.horizon.unwrap_or(60);
    let (mut x, report) = solve(m, cfg, err)?;
    let sim = simulate_policy(&mut x, &report.policy, horizon, cfg.runs, cfg.seed)?;
    out.write_all(cfg.describe(m.discount()).as_bytes())?;
    writeln!(out, "policy value {}", report.value_at_initial)?;
    writeln!(out, "simulated {sim} horizon {horizon}")?;
    budget_code(&report, cfg, err)
}

pub fn cmd_audit(m: &Nmrdp, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let horizon = cfg.horizon.unwrap_or(4);
    let x = reachable_xmdp(m, cfg.budget)?;
    let report = x.audit(horizon, &AuditLimits::default())?;
    writeln!(out, "{} e-states", x.len())?;
    out.write_all(report.render().as_bytes())?;
    Ok(0)
}
