//! Decision processes with non-Markovian rewards, given compactly by
//! probabilistic operators over a set of propositions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formula::{canonicalize, render_lossy, Formula, PropId, PropositionTable};
use crate::oracle::FiniteTrace;
use crate::parser::parse_closed;
use crate::progression::{RewardEntry, RewardSpec};
use crate::state::WorldState;

/// Tolerance on outcome probability sums.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// One probabilistic effect of an action.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub probability: f64,
    pub adds: BTreeSet<PropId>,
    pub deletes: BTreeSet<PropId>,
}

impl Outcome {
    pub fn new<A, D>(probability: f64, adds: A, deletes: D) -> Self
    where
        A: IntoIterator<Item = PropId>,
        D: IntoIterator<Item = PropId>,
    {
        Outcome {
            probability,
            adds: adds.into_iter().collect(),
            deletes: deletes.into_iter().collect(),
        }
    }

    /// Delete, then add.
    pub fn apply(&self, s: &WorldState) -> WorldState {
        let mut next = s.clone();
        for &p in &self.deletes {
            next.remove(p);
        }
        for &p in &self.adds {
            next.insert(p);
        }
        next
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbAction {
    pub name: String,
    pub precondition: Formula,
    pub outcomes: Vec<Outcome>,
}

impl ProbAction {
    pub fn new(name: impl Into<String>, precondition: Formula, outcomes: Vec<Outcome>) -> Result<Self> {
        let a = ProbAction {
            name: name.into(),
            precondition: canonicalize(&precondition),
            outcomes,
        };
        a.validate(usize::MAX)?;
        Ok(a)
    }

    fn validate(&self, width: usize) -> Result<()> {
        let name = &self.name;
        if !is_name(name) {
            return Err(Error::Invariant(format!("invalid action name `{name}`")));
        }
        if !self.precondition.is_propositional() {
            return Err(Error::Invariant(format!(
                "precondition of `{name}` must be propositional and $-free"
            )));
        }
        if self.outcomes.is_empty() {
            return Err(Error::Invariant(format!("action `{name}` has no outcomes")));
        }
        let mut sum = 0.0;
        for o in &self.outcomes {
            if !(o.probability > 0.0 && o.probability.is_finite()) {
                return Err(Error::Invariant(format!(
                    "action `{name}`: outcome probability {} is not positive",
                    o.probability
                )));
            }
            if o.adds.intersection(&o.deletes).next().is_some() {
                return Err(Error::Invariant(format!(
                    "action `{name}`: an outcome adds and deletes the same proposition"
                )));
            }
            let max = o.adds.iter().chain(&o.deletes).chain(&self.precondition.propositions()).max().copied();
            if max.is_some_and(|p| p as usize >= width) {
                return Err(Error::Invariant(format!("action `{name}` mentions an undeclared proposition")));
            }
            sum += o.probability;
        }
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::Invariant(format!(
                "action `{name}`: outcome probabilities sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    pub fn is_applicable(&self, s: &WorldState) -> bool {
        self.precondition.eval_propositional(s).unwrap_or(false)
    }
}

/// A decision process with non-Markovian rewards.
///
/// Immutable once built; every constructor validates the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Nmrdp {
    table: PropositionTable,
    initial: WorldState,
    actions: Vec<ProbAction>,
    reward: RewardSpec,
    control: Option<Formula>,
    discount: f64,
}

impl Nmrdp {
    pub fn new(
        table: PropositionTable,
        initial: WorldState,
        actions: Vec<ProbAction>,
        reward: RewardSpec,
        control: Option<Formula>,
        discount: f64,
    ) -> Result<Self> {
        let width = table.len();
        if initial.width() != width {
            return Err(Error::Invariant(format!(
                "initial state has width {}, expected {width}",
                initial.width()
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::Invariant(format!("discount {discount} is outside [0, 1)")));
        }
        let mut names = BTreeSet::new();
        for a in &actions {
            a.validate(width)?;
            if !names.insert(a.name.as_str()) {
                return Err(Error::Invariant(format!("duplicate action `{}`", a.name)));
            }
        }
        for e in reward.entries() {
            if !is_name(&e.label) {
                return Err(Error::Invariant(format!("invalid reward label `{}`", e.label)));
            }
            if e.formula.propositions().last().is_some_and(|&p| p as usize >= width) {
                return Err(Error::Invariant(format!("reward `{}` mentions an undeclared proposition", e.label)));
            }
        }
        let control = control.map(|c| canonicalize(&c));
        if let Some(c) = &control {
            if !c.is_dollar_free() {
                return Err(Error::Invariant("control formula must be $-free".into()));
            }
            if c.propositions().last().is_some_and(|&p| p as usize >= width) {
                return Err(Error::Invariant("control formula mentions an undeclared proposition".into()));
            }
        }
        Ok(Nmrdp {
            table,
            initial,
            actions,
            reward,
            control,
            discount,
        })
    }

    pub fn table(&self) -> &PropositionTable {
        &self.table
    }

    pub fn initial(&self) -> &WorldState {
        &self.initial
    }

    pub fn actions(&self) -> &[ProbAction] {
        &self.actions
    }

    pub fn action(&self, name: &str) -> Option<&ProbAction> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn reward(&self) -> &RewardSpec {
        &self.reward
    }

    pub fn control(&self) -> Option<&Formula> {
        self.control.as_ref()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same model with another reward specification.
    pub fn with_reward(&self, reward: RewardSpec) -> Result<Nmrdp> {
        Nmrdp::new(
            self.table.clone(),
            self.initial.clone(),
            self.actions.clone(),
            reward,
            self.control.clone(),
            self.discount,
        )
    }

    /// Same model with another control formula.
    pub fn with_control(&self, control: Option<Formula>) -> Result<Nmrdp> {
        Nmrdp::new(
            self.table.clone(),
            self.initial.clone(),
            self.actions.clone(),
            self.reward.clone(),
            control,
            self.discount,
        )
    }

    pub fn with_discount(&self, discount: f64) -> Result<Nmrdp> {
        let mut m = self.clone();
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::Invariant(format!("discount {discount} is outside [0, 1)")));
        }
        m.discount = discount;
        Ok(m)
    }

    /// Actions whose precondition holds in `s`, in declaration order.
    pub fn applicable(&self, s: &WorldState) -> Vec<&ProbAction> {
        self.actions.iter().filter(|a| a.is_applicable(s)).collect()
    }

    /// Successor distribution of `a` in `s`, sorted by state.
    ///
    /// Outcomes with identical effects on `s` are merged. Probabilities of a
    /// merged group are summed in ascending order so the result does not
    /// depend on the order of the outcome list.
    pub fn successors(&self, s: &WorldState, a: &ProbAction) -> Result<Vec<(WorldState, f64)>> {
        if !a.is_applicable(s) {
            return Err(Error::NotApplicable {
                action: a.name.clone(),
                state: s.display(&self.table).to_string(),
            });
        }
        let mut groups: BTreeMap<WorldState, Vec<f64>> = BTreeMap::new();
        for o in &a.outcomes {
            groups.entry(o.apply(s)).or_default().push(o.probability);
        }
        Ok(groups
            .into_iter()
            .map(|(t, mut ps)| {
                ps.sort_by(f64::total_cmp);
                (t, ps.iter().sum())
            })
            .collect())
    }

    /// Samples a trajectory of at most `horizon` transitions from the
    /// initial state.
    ///
    /// `policy` sees the history so far and names the next action, or
    /// returns `None` to stop. Deterministic for a fixed seed.
    pub fn sample_trajectory<P>(&self, mut policy: P, horizon: usize, seed: u64) -> Result<FiniteTrace>
    where
        P: FnMut(&[WorldState]) -> Option<String>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = vec![self.initial.clone()];
        for _ in 0..horizon {
            let Some(name) = policy(&states) else { break };
            let current = states.last().expect("non-empty");
            let a = self.action(&name).ok_or_else(|| Error::NotApplicable {
                action: name.clone(),
                state: current.display(&self.table).to_string(),
            })?;
            let succ = self.successors(current, a)?;
            let next = draw(&succ, rng.gen::<f64>());
            states.push(next);
        }
        FiniteTrace::new(states)
    }
}

/// Picks from a distribution by inverse CDF; falls back to the last entry on
/// rounding shortfall.
pub(crate) fn draw(dist: &[(WorldState, f64)], u: f64) -> WorldState {
    let mut acc = 0.0;
    for (s, p) in dist {
        acc += p;
        if u < acc {
            return s.clone();
        }
    }
    dist.last().expect("non-empty distribution").0.clone()
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

/// Attaches a line number to errors raised while building the model.
fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Invariant(m) => Error::Invariant(format!("line {line}: {m}")),
        Error::Format { .. } => e,
        other => format_err(line, other.to_string()),
    }
}

struct PendingAction {
    line: usize,
    name: String,
    pre: Option<Formula>,
    outcomes: Vec<Outcome>,
}

/// Parses a domain file.
pub fn load_domain(text: &str) -> Result<Nmrdp> {
    let mut table: Option<PropositionTable> = None;
    let mut init: Option<(usize, Vec<String>)> = None;
    let mut discount: Option<f64> = None;
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut control: Option<Formula> = None;
    let mut pending: Option<PendingAction> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (head, rest) = split_head(content);

        if let Some(act) = pending.as_mut() {
            match head {
                "pre:" => {
                    if act.pre.is_some() {
                        return Err(format_err(line, "duplicate `pre:`"));
                    }
                    let t = table.as_ref().expect("props precede actions");
                    act.pre = Some(parse_closed(rest, t).map_err(|e| at_line(line, e))?);
                }
                "outcome" => {
                    let t = table.as_ref().expect("props precede actions");
                    act.outcomes.push(parse_outcome(line, rest, t)?);
                }
                "end" if rest.is_empty() => {
                    let act = pending.take().expect("inside action");
                    let a = ProbAction {
                        name: act.name,
                        precondition: canonicalize(&act.pre.unwrap_or(Formula::True)),
                        outcomes: act.outcomes,
                    };
                    let width = table.as_ref().map_or(0, PropositionTable::len);
                    a.validate(width).map_err(|e| at_line(act.line, e))?;
                    actions.push(a);
                }
                _ => return Err(format_err(line, format!("unexpected `{content}` inside action"))),
            }
            continue;
        }

        if head != "props:" && table.is_none() {
            return Err(format_err(line, "`props:` must come first"));
        }
        match head {
            "props:" => {
                if table.is_some() {
                    return Err(format_err(line, "duplicate `props:`"));
                }
                let mut t = PropositionTable::new();
                for name in rest.split_whitespace() {
                    if !is_name(name) || name.chars().next().is_some_and(|c| !c.is_ascii_alphabetic() && c != '_') {
                        return Err(format_err(line, format!("invalid proposition name `{name}`")));
                    }
                    if t.id(name).is_some() {
                        return Err(format_err(line, format!("duplicate proposition `{name}`")));
                    }
                    t.intern(name);
                }
                table = Some(t);
            }
            "init:" => {
                if init.is_some() {
                    return Err(format_err(line, "duplicate `init:`"));
                }
                init = Some((line, rest.split_whitespace().map(str::to_string).collect()));
            }
            "discount:" => {
                if discount.is_some() {
                    return Err(format_err(line, "duplicate `discount:`"));
                }
                let b: f64 = rest
                    .parse()
                    .map_err(|_| format_err(line, format!("invalid discount `{rest}`")))?;
                if !(0.0..1.0).contains(&b) {
                    return Err(Error::Invariant(format!("line {line}: discount {b} is outside [0, 1)")));
                }
                discount = Some(b);
            }
            "action" => {
                if !is_name(rest) {
                    return Err(format_err(line, format!("invalid action name `{rest}`")));
                }
                pending = Some(PendingAction {
                    line,
                    name: rest.to_string(),
                    pre: None,
                    outcomes: Vec::new(),
                });
            }
            "reward" => {
                let (decl, formula) = rest
                    .split_once(':')
                    .ok_or_else(|| format_err(line, "expected `reward <label> <real>: <formula>`"))?;
                let mut parts = decl.split_whitespace();
                let (Some(label), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(format_err(line, "expected `reward <label> <real>: <formula>`"));
                };
                if !is_name(label) {
                    return Err(format_err(line, format!("invalid reward label `{label}`")));
                }
                let reward: f64 = value
                    .parse()
                    .ok()
                    .filter(|r: &f64| r.is_finite())
                    .ok_or_else(|| format_err(line, format!("invalid reward `{value}`")))?;
                let f = parse_closed(formula.trim(), table.as_ref().expect("checked"))
                    .map_err(|e| at_line(line, e))?;
                if rewards.iter().any(|e: &RewardEntry| e.label == label) {
                    return Err(Error::Invariant(format!("line {line}: duplicate reward label `{label}`")));
                }
                rewards.push(RewardEntry {
                    label: label.to_string(),
                    formula: f,
                    reward,
                });
            }
            "control:" => {
                if control.is_some() {
                    return Err(format_err(line, "duplicate `control:`"));
                }
                let f = parse_closed(rest, table.as_ref().expect("checked")).map_err(|e| at_line(line, e))?;
                if !f.is_dollar_free() {
                    return Err(Error::Invariant(format!("line {line}: control formula must be $-free")));
                }
                control = Some(f);
            }
            _ => return Err(format_err(line, format!("unrecognised directive `{head}`"))),
        }
    }

    if let Some(act) = pending {
        return Err(format_err(act.line, format!("action `{}` is missing `end`", act.name)));
    }
    let table = table.ok_or_else(|| format_err(last_line.max(1), "missing `props:`"))?;
    let discount = discount.ok_or_else(|| format_err(last_line.max(1), "missing `discount:`"))?;
    let mut initial = WorldState::empty(table.len());
    if let Some((line, names)) = init {
        for n in names {
            let p = table
                .id(&n)
                .ok_or_else(|| format_err(line, format!("unknown proposition `{n}`")))?;
            initial.insert(p);
        }
    }
    let reward = RewardSpec::new(rewards)?;
    Nmrdp::new(table, initial, actions, reward, control, discount)
}

fn split_head(content: &str) -> (&str, &str) {
    // Directives are either `word:` or `word` followed by arguments.
    let end = content
        .find(|c: char| c.is_whitespace() || c == ':')
        .map_or(content.len(), |i| if content[i..].starts_with(':') { i + 1 } else { i });
    (&content[..end], content[end..].trim())
}

fn parse_outcome(line: usize, rest: &str, table: &PropositionTable) -> Result<Outcome> {
    let (prob, effects) = rest
        .split_once(':')
        .ok_or_else(|| format_err(line, "expected `outcome <prob>: <effects>`"))?;
    let probability: f64 = prob
        .trim()
        .parse()
        .map_err(|_| format_err(line, format!("invalid probability `{}`", prob.trim())))?;
    let mut o = Outcome::new(probability, [], []);
    for tok in effects.split_whitespace() {
        let (set, name) = match tok.split_at(1) {
            ("+", n) => (&mut o.adds, n),
            ("-", n) => (&mut o.deletes, n),
            _ => return Err(format_err(line, format!("effect `{tok}` must start with + or -"))),
        };
        let p = table
            .id(name)
            .ok_or_else(|| format_err(line, format!("unknown proposition `{name}`")))?;
        set.insert(p);
    }
    Ok(o)
}

/// Writes a domain file that [`load_domain`] reads back to an equal model.
pub fn save_domain(m: &Nmrdp) -> String {
    let t = &m.table;
    let names = |ps: &mut dyn Iterator<Item = PropId>| {
        ps.map(|p| t.name(p).unwrap_or("?").to_string()).collect::<Vec<_>>()
    };
    let mut out = String::new();
    let _ = writeln!(out, "props: {}", t.names().collect::<Vec<_>>().join(" "));
    let _ = writeln!(out, "init: {}", names(&mut m.initial.props()).join(" "));
    let _ = writeln!(out, "discount: {:?}", m.discount);
    for a in &m.actions {
        let _ = writeln!(out, "\naction {}", a.name);
        let _ = writeln!(out, "  pre: {}", render_lossy(&a.precondition, t));
        for o in &a.outcomes {
            let mut effects: Vec<String> = names(&mut o.adds.iter().copied()).into_iter().map(|n| format!("+{n}")).collect();
            effects.extend(names(&mut o.deletes.iter().copied()).into_iter().map(|n| format!("-{n}")));
            let _ = writeln!(out, "  outcome {:?}: {}", o.probability, effects.join(" "));
        }
        let _ = writeln!(out, "end");
    }
    if !m.reward.is_empty() {
        out.push('\n');
    }
    for e in m.reward.entries() {
        let _ = writeln!(out, "reward {} {:?}: {}", e.label, e.reward, render_lossy(&e.formula, t));
    }
    if let Some(c) = &m.control {
        let _ = writeln!(out, "\ncontrol: {}", render_lossy(c, t));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIGURE1: &str = include_str!("../domains/figure1.dom");

    fn s(m: &Nmrdp, props: &[&str]) -> WorldState {
        WorldState::from_props(m.table().len(), props.iter().map(|n| m.table().id(n).unwrap()))
    }

    #[test]
    fn figure1_loads() {
        let m = load_domain(FIGURE1).unwrap();
        assert_eq!(m.table().len(), 1);
        assert_eq!(m.actions().len(), 4);
        assert_eq!(m.discount(), 0.9);
        assert_eq!(m.reward().len(), 1);
    }

    #[test]
    fn figure1_applicability() {
        let m = load_domain(FIGURE1).unwrap();
        let names = |st: &WorldState| m.applicable(st).iter().map(|a| a.name.clone()).collect::<Vec<_>>();
        assert_eq!(names(&s(&m, &[])), ["a", "b"]);
        assert_eq!(names(&s(&m, &["p"])), ["c", "d"]);
    }

    #[test]
    fn figure1_successors() {
        let m = load_domain(FIGURE1).unwrap();
        let s0 = s(&m, &[]);
        let s1 = s(&m, &["p"]);
        let a = m.successors(&s0, m.action("a").unwrap()).unwrap();
        assert_eq!(a, vec![(s0.clone(), 0.9), (s1.clone(), 0.1)]);
        let b = m.successors(&s0, m.action("b").unwrap()).unwrap();
        assert_eq!(b, vec![(s0.clone(), 0.5), (s1.clone(), 0.5)]);
        assert!(matches!(
            m.successors(&s1, m.action("a").unwrap()),
            Err(Error::NotApplicable { .. })
        ));
    }

    #[test]
    fn identical_outcomes_merge() {
        let a = ProbAction::new(
            "noop",
            Formula::True,
            vec![Outcome::new(0.4, [], []), Outcome::new(0.6, [], [])],
        )
        .unwrap();
        let m = Nmrdp::new(
            PropositionTable::from_names(["p"]),
            WorldState::empty(1),
            vec![a],
            RewardSpec::default(),
            None,
            0.5,
        )
        .unwrap();
        let succ = m.successors(m.initial(), &m.actions()[0]).unwrap();
        assert_eq!(succ, vec![(WorldState::empty(1), 1.0)]);
    }

    #[test]
    fn dead_end_has_no_actions() {
        let m = load_domain("props: p\ndiscount: 0.5\naction a\n  pre: p\n  outcome 1: -p\nend\n").unwrap();
        assert!(m.applicable(m.initial()).is_empty());
    }

    #[test]
    fn bad_probabilities() {
        let text = "props: p\ndiscount: 0.9\naction a\n  outcome 0.5: +p\n  outcome 0.6:\nend\n";
        assert!(matches!(load_domain(text), Err(Error::Invariant(_))));
    }

    #[test]
    fn dollar_in_control() {
        let text = "props: p\ndiscount: 0.9\ncontrol: $ U p\n";
        assert!(matches!(load_domain(text), Err(Error::Invariant(_))));
    }

    #[test]
    fn discount_range() {
        assert!(matches!(load_domain("props: p\ndiscount: 1.0\n"), Err(Error::Invariant(_))));
        assert!(load_domain("props: p\ndiscount: 0\n").is_ok());
    }

    #[test]
    fn format_errors_carry_lines() {
        let cases = [
            ("props: p\ndiscount: 0.9\nfrobnicate\n", 3),
            ("discount: 0.9\n", 1),
            ("props: p\ndiscount: 0.9\naction a\n  outcome 1: +q\nend\n", 4),
            ("props: p\ndiscount: 0.9\nreward r 1: p &\n", 3),
            ("props: p\ndiscount: 0.9\naction a\n  outcome 1:\n", 3),
        ];
        for (text, line) in cases {
            match load_domain(text) {
                Err(Error::Format { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn roundtrip() {
        let m = load_domain(FIGURE1).unwrap();
        let text = save_domain(&m);
        let again = load_domain(&text).unwrap();
        assert_eq!(again, m);
        assert_eq!(save_domain(&again), text);
    }

    #[test]
    fn horizon_zero_trajectory() {
        let m = load_domain(FIGURE1).unwrap();
        let t = m.sample_trajectory(|_| Some("b".into()), 0, 7).unwrap();
        assert_eq!(t.states(), &[m.initial().clone()]);
    }

    #[test]
    fn trajectories_are_feasible_and_seeded() {
        let m = load_domain(FIGURE1).unwrap();
        let policy = |h: &[WorldState]| {
            let a = if h.last().unwrap().contains(0) { "c" } else { "b" };
            Some(a.to_string())
        };
        let t = m.sample_trajectory(policy, 20, 42).unwrap();
        assert_eq!(t, m.sample_trajectory(policy, 20, 42).unwrap());
        for w in t.states().windows(2) {
            let a = m.applicable(&w[0])[if w[0].contains(0) { 0 } else { 1 }];
            let succ = m.successors(&w[0], a).unwrap();
            assert!(succ.iter().any(|(x, p)| x == &w[1] && *p > 0.0));
        }
    }

    #[test]
    fn b_step_frequency() {
        let m = load_domain(FIGURE1).unwrap();
        let hits = (0..10_000u64)
            .filter(|&seed| {
                let t = m.sample_trajectory(|_| Some("b".into()), 1, seed).unwrap();
                t.states()[1].contains(0)
            })
            .count();
        let freq = hits as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn unknown_action_is_rejected() {
        let m = load_domain(FIGURE1).unwrap();
        let r = m.sample_trajectory(|_| Some("zz".into()), 1, 0);
        assert!(matches!(r, Err(Error::NotApplicable { .. })));
    }
}
