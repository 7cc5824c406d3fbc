//! Value iteration and the anytime solvers (LAO* and RTDP), all working on a
//! lazily expanded [`Xmdp`].
//!
//! Values are expected discounted rewards and are maximized. Every solver
//! reports the value of the policy it returns, computed by
//! [`evaluate_policy`] with fringe states worth 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::draw;
use crate::error::{Error, Result};
use crate::progression::replay;
use crate::state::WorldState;
use crate::xmdp::{EStateId, Xmdp};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Q-values closer than this are ties, broken by action name.
const TIE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Vi,
    Lao,
    Rtdp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Method::Vi => "vi",
            Method::Lao => "lao",
            Method::Rtdp => "rtdp",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vi" => Ok(Method::Vi),
            "lao" => Ok(Method::Lao),
            "rtdp" => Ok(Method::Rtdp),
            _ => Err(Error::Invariant(format!("unknown method `{s}` (expected vi, lao or rtdp)"))),
        }
    }
}

/// A partial policy over e-states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Policy {
    /// Action name per e-state.
    pub actions: BTreeMap<EStateId, String>,
    /// E-states reachable from the initial one under `actions`.
    pub envelope: BTreeSet<EStateId>,
    /// Envelope states that have actions but no mapping; absorbing.
    pub fringe: BTreeSet<EStateId>,
}

impl Policy {
    pub fn get(&self, id: EStateId) -> Option<&str> {
        self.actions.get(&id).map(String::as_str)
    }

    pub fn is_complete(&self) -> bool {
        self.fringe.is_empty()
    }

    /// Lines `<e-state-id> <action-name>`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (id, a) in &self.actions {
            let _ = writeln!(out, "{id} {a}");
        }
        out
    }

    /// Builds a policy from an action map, computing envelope and fringe.
    /// Mapped actions that are unavailable or not yet expanded are dropped.
    pub fn from_actions(x: &Xmdp<'_>, actions: &BTreeMap<EStateId, String>) -> Policy {
        let chosen = |id: EStateId| {
            let name = actions.get(&id)?;
            let a = x.actions(id).iter().copied().find(|&a| x.action_name(a) == name)?;
            x.successors(id, a).map(|_| a)
        };
        extract(x, chosen)
    }
}

/// Walks the policy graph from the initial e-state.
fn extract(x: &Xmdp<'_>, chosen: impl Fn(EStateId) -> Option<usize>) -> Policy {
    let mut p = Policy::default();
    let mut stack = vec![x.initial()];
    while let Some(id) = stack.pop() {
        if !p.envelope.insert(id) || x.actions(id).is_empty() {
            continue;
        }
        let Some(a) = chosen(id) else {
            p.fringe.insert(id);
            continue;
        };
        p.actions.insert(id, x.action_name(a).to_string());
        let succ = x.successors(id, a).expect("chosen actions are expanded");
        stack.extend(succ.iter().rev().map(|&(s, _)| s).filter(|s| !p.envelope.contains(s)));
    }
    p
}

/// Values of envelope e-states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueTable(pub BTreeMap<EStateId, f64>);

impl ValueTable {
    pub fn get(&self, id: EStateId) -> Option<f64> {
        self.0.get(&id).copied()
    }
}

/// Residual below which iteration stops so that values are within `epsilon`.
pub fn residual_threshold(epsilon: f64, discount: f64) -> f64 {
    if discount <= 0.0 {
        epsilon
    } else {
        epsilon * ((1.0 - discount) / discount).min(1.0)
    }
}

/// Iterative evaluation of `policy` to tolerance `epsilon`.
///
/// Mapped states follow their action; states without actions take
/// [`terminal_value`]; fringe states take `fringe_value` (0 if `None`).
pub fn evaluate_policy(
    x: &Xmdp<'_>,
    policy: &Policy,
    fringe_value: Option<&dyn Fn(EStateId) -> f64>,
    discount: f64,
    epsilon: f64,
) -> ValueTable {
    let ids: Vec<EStateId> = policy.envelope.iter().copied().collect();
    let index: BTreeMap<EStateId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    enum Node {
        Fixed(f64),
        Step(f64, Vec<(usize, f64)>),
    }
    let nodes: Vec<Node> = ids
        .iter()
        .map(|&id| {
            let reward = x.estate(id).immediate_reward;
            let succ = policy.get(id).and_then(|name| {
                let a = x.actions(id).iter().copied().find(|&a| x.action_name(a) == name)?;
                x.successors(id, a)
            });
            match succ {
                Some(succ) if succ.iter().all(|(s, _)| index.contains_key(s)) => {
                    Node::Step(reward, succ.iter().map(|&(s, p)| (index[&s], p)).collect())
                }
                _ if x.actions(id).is_empty() => Node::Fixed(terminal_value(x, id)),
                _ => Node::Fixed(fringe_value.map_or(0.0, |f| f(id))),
            }
        })
        .collect();
    let mut v: Vec<f64> = nodes
        .iter()
        .map(|n| match n {
            Node::Fixed(r) | Node::Step(r, _) => *r,
        })
        .collect();
    let threshold = residual_threshold(epsilon, discount);
    loop {
        let mut residual: f64 = 0.0;
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Step(r, succ) = n {
                let new = r + discount * succ.iter().map(|&(j, p)| p * v[j]).sum::<f64>();
                residual = residual.max((new - v[i]).abs());
                v[i] = new;
            }
        }
        if residual < threshold {
            break;
        }
    }
    ValueTable(ids.into_iter().zip(v).collect())
}

/// Why a solver returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Deadline,
    Interrupted,
    Budget,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::Deadline => "deadline",
            StopReason::Interrupted => "interrupted",
            StopReason::Budget => "budget",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: Method,
    pub discount: f64,
    pub epsilon: f64,
    pub policy: Policy,
    pub values: ValueTable,
    pub value_at_initial: f64,
    /// Sweeps (vi), passes (lao) or trials (rtdp).
    pub iterations: usize,
    /// Interned e-states when the solver returned.
    pub expanded: usize,
    pub wall_time: Duration,
    pub converged: bool,
    pub stop: StopReason,
}

impl SolveReport {
    /// Key-value block. Wall time is left out so the text is reproducible;
    /// see [`SolveReport::export_with_time`].
    pub fn export(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method {}", self.method);
        let _ = writeln!(out, "discount {}", self.discount);
        let _ = writeln!(out, "epsilon {:e}", self.epsilon);
        let _ = writeln!(out, "value {}", self.value_at_initial);
        let _ = writeln!(out, "initial_action {}", self.policy.get(0).unwrap_or("-"));
        let _ = writeln!(out, "iterations {}", self.iterations);
        let _ = writeln!(out, "nodes {}", self.expanded);
        let _ = writeln!(out, "envelope {}", self.policy.envelope.len());
        let _ = writeln!(out, "fringe {}", self.policy.fringe.len());
        let _ = writeln!(out, "converged {}", self.converged);
        let _ = writeln!(out, "stop {}", self.stop);
        out
    }

    pub fn export_with_time(&self) -> String {
        format!("{}time_ms {:.3}\n", self.export(), self.wall_time.as_secs_f64() * 1e3)
    }
}

/// Settings shared by the solvers.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub epsilon: f64,
    /// Measured from the start of the call.
    pub deadline: Option<Duration>,
    /// Checked between backups.
    pub interrupt: Option<Arc<AtomicBool>>,
    /// RTDP trial sampling.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            epsilon: DEFAULT_EPSILON,
            deadline: None,
            interrupt: None,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_deadline(mut self, deadline: Duration) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn with_interrupt(mut self, flag: Arc<AtomicBool>) -> Self {
        self.interrupt = Some(flag);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Invariant(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

struct Clock {
    start: Instant,
    deadline: Option<Instant>,
    interrupt: Option<Arc<AtomicBool>>,
}

impl Clock {
    fn new(opts: &SolveOptions) -> Self {
        let start = Instant::now();
        Clock {
            start,
            deadline: opts.deadline.map(|d| start + d),
            interrupt: opts.interrupt.clone(),
        }
    }

    fn stop(&self) -> Option<StopReason> {
        if self.interrupt.as_ref().is_some_and(|f| f.load(Ordering::Relaxed)) {
            return Some(StopReason::Interrupted);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Some(StopReason::Deadline);
        }
        None
    }
}

/// Working values and greedy choices over the interned e-states.
struct Search<'x, 'm> {
    x: &'x mut Xmdp<'m>,
    discount: f64,
    /// Upper bound on the discounted reward from the next stage on.
    tail_bound: f64,
    v: Vec<f64>,
    best: Vec<Option<usize>>,
}

impl<'x, 'm> Search<'x, 'm> {
    fn new(x: &'x mut Xmdp<'m>) -> Self {
        let discount = x.nmrdp().discount();
        let rmax = x.nmrdp().reward().max_stage_reward();
        let tail_bound = if discount > 0.0 { rmax * discount / (1.0 - discount) } else { 0.0 };
        let mut s = Search {
            x,
            discount,
            tail_bound,
            v: Vec::new(),
            best: Vec::new(),
        };
        s.sync();
        s
    }

    /// Initializes values of newly interned e-states to the heuristic.
    fn sync(&mut self) {
        for id in self.v.len()..self.x.len() {
            self.v.push(heuristic(self.x, id, self.tail_bound));
            self.best.push(None);
        }
    }

    fn expand_all_actions(&mut self, id: EStateId) -> Result<()> {
        for a in self.x.actions(id).to_vec() {
            self.x.expand(id, a)?;
        }
        self.sync();
        Ok(())
    }

    /// Bellman backup of a fully expanded e-state; returns the change.
    fn backup(&mut self, id: EStateId) -> f64 {
        let (value, best) = greedy(self.x, &self.v, id, self.discount);
        let change = (value - self.v[id]).abs();
        self.v[id] = value;
        self.best[id] = best;
        change
    }

    /// Final backups can switch a greedy action onto an unexpanded state;
    /// convergence also needs the greedy graph to be fully expanded.
    fn greedy_graph_closed(&self) -> bool {
        self.policy().is_complete()
    }

    fn policy(&self) -> Policy {
        extract(self.x, |id| {
            if self.x.is_fully_expanded(id) {
                self.best[id]
            } else {
                None
            }
        })
    }
}

/// Value of an e-state without actions: its own reward at a dead end, 0
/// once control is violated (the path is discarded).
pub fn terminal_value(x: &Xmdp<'_>, id: EStateId) -> f64 {
    let e = x.estate(id);
    if e.control_ok() {
        e.immediate_reward
    } else {
        0.0
    }
}

/// `R'(e) + Rmax·β/(1−β)`; exact for states without actions.
fn heuristic(x: &Xmdp<'_>, id: EStateId, tail_bound: f64) -> f64 {
    if x.actions(id).is_empty() {
        terminal_value(x, id)
    } else {
        x.estate(id).immediate_reward + tail_bound
    }
}

/// Best value and action at a fully expanded e-state. Near-ties go to the
/// lexicographically smallest action name.
fn greedy(x: &Xmdp<'_>, v: &[f64], id: EStateId, discount: f64) -> (f64, Option<usize>) {
    let r = x.estate(id).immediate_reward;
    let mut qs: Vec<(usize, f64)> = Vec::with_capacity(x.actions(id).len());
    for &a in x.actions(id) {
        let succ = x.successors(id, a).expect("backup needs an expanded state");
        qs.push((a, r + discount * succ.iter().map(|&(s, p)| p * v[s]).sum::<f64>()));
    }
    let Some(top) = qs.iter().map(|&(_, q)| q).reduce(f64::max) else {
        return (terminal_value(x, id), None);
    };
    let a = qs
        .iter()
        .filter(|&&(_, q)| q >= top - TIE)
        .map(|&(a, _)| a)
        .min_by_key(|&a| x.action_name(a))
        .expect("non-empty");
    (top, Some(a))
}

fn finish(
    x: &Xmdp<'_>,
    method: Method,
    policy: Policy,
    opts: &SolveOptions,
    iterations: usize,
    clock: &Clock,
    stop: StopReason,
) -> SolveReport {
    let discount = x.nmrdp().discount();
    let values = evaluate_policy(x, &policy, None, discount, opts.epsilon);
    let value_at_initial = values.get(x.initial()).unwrap_or(0.0);
    SolveReport {
        method,
        discount,
        epsilon: opts.epsilon,
        policy,
        values,
        value_at_initial,
        iterations,
        expanded: x.len(),
        wall_time: clock.start.elapsed(),
        converged: stop == StopReason::Converged,
        stop,
    }
}

/// Expands the whole reachable XMDP, then runs Gauss-Seidel value iteration.
pub fn value_iteration(x: &mut Xmdp<'_>, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    let clock = Clock::new(opts);
    x.expand_all()?;
    let mut s = Search::new(x);
    let threshold = residual_threshold(opts.epsilon, s.discount);
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut residual: f64 = 0.0;
        for id in 0..s.x.len() {
            residual = residual.max(s.backup(id));
        }
        if residual < threshold {
            break;
        }
    }
    let policy = s.policy();
    Ok(finish(s.x, Method::Vi, policy, opts, iterations, &clock, StopReason::Converged))
}

/// Anytime solve with LAO* or RTDP.
///
/// Only e-states the search visits are built. On deadline, interruption or
/// an exhausted node budget, the current greedy partial policy is returned
/// with `converged == false`. Reward abnormality is an error.
pub fn anytime_solve(x: &mut Xmdp<'_>, method: Method, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    match method {
        Method::Vi => value_iteration(x, opts),
        Method::Lao => lao(x, opts),
        Method::Rtdp => rtdp(x, opts),
    }
}

/// Result of an interruptible step: `Err` carries the reason to stop.
type Step<T> = std::result::Result<T, StopReason>;

/// Maps budget exhaustion to a stop; other errors propagate.
fn soften(r: Result<()>) -> Result<Step<()>> {
    match r {
        Ok(()) => Ok(Ok(())),
        Err(Error::BudgetExceeded { .. }) => Ok(Err(StopReason::Budget)),
        Err(e) => Err(e),
    }
}

/// One depth-first pass over the greedy graph: expands its tips and backs
/// up every visited state in postorder. Returns (expanded anything, max
/// residual).
fn lao_pass(s: &mut Search<'_, '_>, clock: &Clock) -> Result<Step<(bool, f64)>> {
    let mut visited = vec![false; s.x.len()];
    let mut postorder = Vec::new();
    let mut stack = vec![(s.x.initial(), false)];
    let mut expanded = false;
    while let Some((id, done)) = stack.pop() {
        if done {
            postorder.push(id);
            continue;
        }
        if visited.len() <= id {
            visited.resize(s.x.len(), false);
        }
        if visited[id] {
            continue;
        }
        visited[id] = true;
        if s.x.actions(id).is_empty() {
            continue;
        }
        if !s.x.is_fully_expanded(id) {
            if let Some(r) = clock.stop() {
                return Ok(Err(r));
            }
            if let Err(r) = soften(s.expand_all_actions(id))? {
                return Ok(Err(r));
            }
            expanded = true;
            postorder.push(id);
            continue;
        }
        if s.best[id].is_none() {
            s.backup(id);
        }
        stack.push((id, true));
        let a = s.best[id].expect("expanded state with actions");
        for &(succ, _) in s.x.successors(id, a).expect("expanded").iter().rev() {
            if succ >= visited.len() || !visited[succ] {
                stack.push((succ, false));
            }
        }
    }
    let mut residual: f64 = 0.0;
    for id in postorder {
        if let Some(r) = clock.stop() {
            return Ok(Err(r));
        }
        residual = residual.max(s.backup(id));
    }
    Ok(Ok((expanded, residual)))
}

fn lao(x: &mut Xmdp<'_>, opts: &SolveOptions) -> Result<SolveReport> {
    let clock = Clock::new(opts);
    let mut s = Search::new(x);
    let threshold = residual_threshold(opts.epsilon, s.discount);
    let mut passes = 0;
    let stop = loop {
        if let Some(r) = clock.stop() {
            break r;
        }
        passes += 1;
        match lao_pass(&mut s, &clock)? {
            Err(r) => break r,
            Ok((false, residual)) if residual < threshold && s.greedy_graph_closed() => break StopReason::Converged,
            Ok(_) => {}
        }
    };
    let policy = s.policy();
    Ok(finish(s.x, Method::Lao, policy, opts, passes, &clock, stop))
}

/// Trial length after which the discounted tail is below `epsilon`.
pub fn rtdp_trial_cap(epsilon: f64, discount: f64, rmax: f64) -> usize {
    if discount <= 0.0 || rmax <= 0.0 {
        return 1;
    }
    let n = ((epsilon * (1.0 - discount) / rmax).ln() / discount.ln()).ceil();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

fn rtdp(x: &mut Xmdp<'_>, opts: &SolveOptions) -> Result<SolveReport> {
    let clock = Clock::new(opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let reward = x.nmrdp().reward();
    let rmax = reward.max_stage_reward().max(-reward.min_stage_reward());
    let mut s = Search::new(x);
    let threshold = residual_threshold(opts.epsilon, s.discount);
    let cap = rtdp_trial_cap(opts.epsilon, s.discount, rmax);
    let mut trials = 0;
    let stop = 'outer: loop {
        if let Some(r) = clock.stop() {
            break r;
        }
        trials += 1;
        let mut path = Vec::new();
        let mut id = s.x.initial();
        for _ in 0..cap {
            if s.x.actions(id).is_empty() {
                break;
            }
            if !s.x.is_fully_expanded(id) {
                if let Err(r) = soften(s.expand_all_actions(id))? {
                    break 'outer r;
                }
            }
            if let Some(r) = clock.stop() {
                break 'outer r;
            }
            s.backup(id);
            path.push(id);
            let a = s.best[id].expect("state with actions");
            let succ = s.x.successors(id, a).expect("expanded");
            let u = rng.gen::<f64>();
            let mut acc = 0.0;
            let mut next = succ.last().expect("non-empty").0;
            for &(t, p) in succ {
                acc += p;
                if u < acc {
                    next = t;
                    break;
                }
            }
            id = next;
        }
        for &id in path.iter().rev() {
            if let Some(r) = clock.stop() {
                break 'outer r;
            }
            s.backup(id);
        }
        // Convergence check on the greedy graph; also grows it where the
        // trials have not reached yet.
        match lao_pass(&mut s, &clock)? {
            Err(r) => break r,
            Ok((false, residual)) if residual < threshold && s.greedy_graph_closed() => break StopReason::Converged,
            Ok(_) => {}
        }
    };
    let policy = s.policy();
    Ok(finish(s.x, Method::Rtdp, policy, opts, trials, &clock, stop))
}

/// Mean discounted return of simulated runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulation {
    pub runs: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl fmt::Display for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} ± {:.6} ({} runs)", self.mean, self.stderr, self.runs)
    }
}

/// Simulates `policy` through the underlying model.
///
/// World states are sampled from the model's own transition function and
/// rewards come from replaying the specification along the sampled trace;
/// e-states are only tracked to look up the policy. A run stops early at an
/// e-state the policy does not map.
pub fn simulate_policy(x: &mut Xmdp<'_>, policy: &Policy, horizon: usize, runs: usize, seed: u64) -> Result<Simulation> {
    simulate_with(
        x,
        |x, id, _| {
            let name = policy.get(id)?;
            x.actions(id).iter().copied().find(|&a| x.action_name(a) == name)
        },
        horizon,
        runs,
        seed,
    )
}

/// Uniformly random choice among the available actions.
pub fn random_choice(x: &Xmdp<'_>, id: EStateId, rng: &mut ChaCha8Rng) -> Option<usize> {
    x.actions(id).choose(rng).copied()
}

/// Simulation with an arbitrary action rule.
pub fn simulate_with<F>(x: &mut Xmdp<'_>, mut choose: F, horizon: usize, runs: usize, seed: u64) -> Result<Simulation>
where
    F: FnMut(&Xmdp<'_>, EStateId, &mut ChaCha8Rng) -> Option<usize>,
{
    if runs == 0 {
        return Err(Error::Invariant("at least one simulation run is needed".into()));
    }
    let nmrdp = x.nmrdp();
    let discount = nmrdp.discount();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(runs);
    let mut trace: Vec<WorldState> = Vec::with_capacity(horizon + 1);
    for _ in 0..runs {
        trace.clear();
        trace.push(nmrdp.initial().clone());
        let mut id = x.initial();
        for _ in 0..horizon {
            let Some(a) = choose(x, id, &mut rng) else { break };
            let world = trace.last().expect("non-empty");
            let next = draw(&nmrdp.successors(world, &nmrdp.actions()[a])?, rng.gen::<f64>());
            x.expand(id, a)?;
            id = x
                .successors(id, a)
                .expect("just expanded")
                .iter()
                .find(|&&(s, _)| x.estate(s).world == next)
                .map(|&(s, _)| s)
                .expect("every model successor has an e-state");
            trace.push(next);
        }
        let rewards = replay(nmrdp.reward(), &trace)?;
        let mut g = 0.0;
        let mut w = 1.0;
        for r in rewards {
            g += w * r;
            w *= discount;
        }
        returns.push(g);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let stderr = if returns.len() > 1 {
        let var = returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(Simulation { runs, mean, stderr })
}
