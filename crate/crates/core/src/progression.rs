//! Formula progression and online reward allocation.
//!
//! [`prog`] pushes a formula through one state, given whether the current
//! prefix is rewarded. [`rew`] decides the minimal allocation: the prefix is
//! rewarded exactly when assuming it is not would falsify the formula.
//! [`spec_prog`] and [`replay`] lift this to sets of weighted formulae.

use crate::error::{Error, Result};
use crate::formula::{canonicalize, render_lossy, Formula, PropositionTable};
use crate::state::WorldState;

/// Progresses `f` through `s`, with `rewarded` telling whether the prefix
/// ending at `s` is in the rewarded behavior. The result is canonical.
pub fn prog(rewarded: bool, s: &WorldState, f: &Formula) -> Formula {
    let mut steps = 0;
    canonicalize(&prog_raw(rewarded, s, f, &mut steps))
}

/// Like [`prog`] but returns the unsimplified result together with the
/// number of rewrite rules applied.
pub fn prog_counted(rewarded: bool, s: &WorldState, f: &Formula) -> (Formula, usize) {
    let mut steps = 0;
    let out = prog_raw(rewarded, s, f, &mut steps);
    (out, steps)
}

fn prog_raw(b: bool, s: &WorldState, f: &Formula, steps: &mut usize) -> Formula {
    *steps += 1;
    let truth = |v: bool| if v { Formula::True } else { Formula::False };
    match f {
        Formula::Dollar => truth(b),
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Atom(p) => truth(s.contains(*p)),
        Formula::NegAtom(p) => truth(!s.contains(*p)),
        Formula::And(ops) => Formula::And(ops.iter().map(|g| prog_raw(b, s, g, steps)).collect()),
        Formula::Or(ops) => Formula::Or(ops.iter().map(|g| prog_raw(b, s, g, steps)).collect()),
        Formula::Next(g) => (**g).clone(),
        Formula::WeakUntil(lhs, rhs) => Formula::Or(vec![
            prog_raw(b, s, rhs, steps),
            Formula::And(vec![prog_raw(b, s, lhs, steps), f.clone()]),
        ]),
    }
}

/// True iff the prefix ending at `s` must be rewarded for `f` to hold.
pub fn rew(s: &WorldState, f: &Formula) -> bool {
    prog(false, s, f) == Formula::False
}

/// Decides the reward bit at `s` and progresses with it.
pub fn dollar_prog(s: &WorldState, f: &Formula) -> (bool, Formula) {
    let without = prog(false, s, f);
    if without == Formula::False {
        (true, prog(true, s, f))
    } else {
        (false, without)
    }
}

/// One weighted formula of a reward specification.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardEntry {
    pub label: String,
    pub formula: Formula,
    pub reward: f64,
}

/// A reward function specification: labelled formulae with real rewards.
///
/// Entries are kept sorted by label, labels are unique, and formulae are
/// stored in canonical form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardSpec {
    entries: Vec<RewardEntry>,
}

impl RewardSpec {
    pub fn new<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = RewardEntry>,
    {
        let mut entries: Vec<RewardEntry> = entries
            .into_iter()
            .map(|e| RewardEntry {
                formula: canonicalize(&e.formula),
                ..e
            })
            .collect();
        entries.sort_by(|a, b| a.label.cmp(&b.label));
        if let Some(w) = entries.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(Error::Invariant(format!("duplicate reward label `{}`", w[0].label)));
        }
        if let Some(e) = entries.iter().find(|e| !e.reward.is_finite()) {
            return Err(Error::Invariant(format!("reward of `{}` is not finite", e.label)));
        }
        Ok(RewardSpec { entries })
    }

    /// Convenience constructor from `(label, formula, reward)` triples.
    pub fn from_triples<I, S>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Formula, f64)>,
        S: Into<String>,
    {
        Self::new(triples.into_iter().map(|(label, formula, reward)| RewardEntry {
            label: label.into(),
            formula,
            reward,
        }))
    }

    pub fn entries(&self) -> &[RewardEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The current formulae, in label order.
    pub fn formulas(&self) -> impl Iterator<Item = &Formula> {
        self.entries.iter().map(|e| &e.formula)
    }

    /// Sum of the positive rewards: a bound on the reward of any one stage.
    pub fn max_stage_reward(&self) -> f64 {
        self.entries.iter().map(|e| e.reward.max(0.0)).sum()
    }

    /// Sum of the negative rewards.
    pub fn min_stage_reward(&self) -> f64 {
        self.entries.iter().map(|e| e.reward.min(0.0)).sum()
    }

    /// Union of two label-disjoint specifications.
    pub fn union(&self, other: &RewardSpec) -> Result<RewardSpec> {
        RewardSpec::new(self.entries.iter().chain(other.entries.iter()).cloned())
    }

    fn with_formulas(&self, formulas: Vec<Formula>) -> RewardSpec {
        RewardSpec {
            entries: self
                .entries
                .iter()
                .zip(formulas)
                .map(|(e, formula)| RewardEntry {
                    label: e.label.clone(),
                    formula,
                    reward: e.reward,
                })
                .collect(),
        }
    }
}

/// Outcome of progressing a specification through one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressionStep {
    /// Per-entry reward bits, in label order.
    pub rewarded: Vec<bool>,
    pub total_reward: f64,
    pub next: RewardSpec,
}

/// Progresses every entry of `spec` through `s` and totals the rewards.
///
/// Fails with [`Error::RewardAbnormality`] when an entry progresses to false.
/// `table` is only used to name the state in the error.
pub fn spec_prog_named(
    s: &WorldState,
    spec: &RewardSpec,
    table: Option<&PropositionTable>,
) -> Result<ProgressionStep> {
    let mut rewarded = Vec::with_capacity(spec.len());
    let mut formulas = Vec::with_capacity(spec.len());
    let mut total_reward = 0.0;
    for entry in &spec.entries {
        let (b, next) = dollar_prog(s, &entry.formula);
        if next == Formula::False {
            let state = match table {
                Some(t) => s.display(t).to_string(),
                None => format!("{:?}", s.props().collect::<Vec<_>>()),
            };
            return Err(Error::RewardAbnormality {
                label: entry.label.clone(),
                state,
                stage: None,
            });
        }
        if b {
            total_reward += entry.reward;
        }
        rewarded.push(b);
        formulas.push(next);
    }
    Ok(ProgressionStep {
        rewarded,
        total_reward,
        next: spec.with_formulas(formulas),
    })
}

pub fn spec_prog(s: &WorldState, spec: &RewardSpec) -> Result<ProgressionStep> {
    spec_prog_named(s, spec, None)
}

/// Per-stage total rewards of `trace` under `spec`.
///
/// An abnormality error carries the 1-based index of the failing stage.
pub fn replay(spec: &RewardSpec, trace: &[WorldState]) -> Result<Vec<f64>> {
    Ok(replay_steps(spec, trace, None)?
        .into_iter()
        .map(|s| s.total_reward)
        .collect())
}

/// Full progression steps along `trace`.
pub fn replay_steps(
    spec: &RewardSpec,
    trace: &[WorldState],
    table: Option<&PropositionTable>,
) -> Result<Vec<ProgressionStep>> {
    let mut out = Vec::with_capacity(trace.len());
    let mut current = spec.clone();
    for (i, s) in trace.iter().enumerate() {
        let step = spec_prog_named(s, &current, table).map_err(|e| e.with_stage(i + 1))?;
        current = step.next.clone();
        out.push(step);
    }
    Ok(out)
}

/// Renders a specification as `label: formula` lines.
pub fn describe_spec(spec: &RewardSpec, table: &PropositionTable) -> String {
    spec.entries
        .iter()
        .map(|e| format!("{} ({}): {}", e.label, e.reward, render_lossy(&e.formula, table)))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn setup(text: &str) -> (Formula, PropositionTable) {
        let mut t = PropositionTable::from_names(["p", "q"]);
        let f = parse(text, &mut t).unwrap();
        (canonicalize(&f), t)
    }

    fn st(props: &[u32]) -> WorldState {
        WorldState::from_props(2, props.iter().copied())
    }

    #[test]
    fn dollar_rules() {
        assert_eq!(prog(true, &st(&[]), &Formula::Dollar), Formula::True);
        assert_eq!(prog(false, &st(&[0]), &Formula::Dollar), Formula::False);
    }

    #[test]
    fn next_rule_returns_operand() {
        let (f, _) = setup("p U q");
        for b in [false, true] {
            assert_eq!(prog(b, &st(&[1]), &Formula::next(f.clone())), f);
        }
    }

    #[test]
    fn first_occurrence_waits_while_p_false() {
        let (f, _) = setup("~p U (p & $)");
        assert_eq!(prog(false, &st(&[]), &f), f);
        assert!(!rew(&st(&[]), &f));
        assert_eq!(dollar_prog(&st(&[]), &f), (false, f.clone()));
    }

    #[test]
    fn first_occurrence_rewarded_on_p() {
        let (f, _) = setup("~p U (p & $)");
        assert!(rew(&st(&[0]), &f));
        assert_eq!(dollar_prog(&st(&[0]), &f), (true, Formula::True));
    }

    #[test]
    fn constants() {
        for s in [st(&[]), st(&[0, 1])] {
            assert!(!rew(&s, &Formula::True));
            assert_eq!(dollar_prog(&s, &Formula::False), (true, Formula::False));
        }
    }

    #[test]
    fn two_entry_spec() {
        let (a, mut t) = setup("~p U (p & $)");
        let b = canonicalize(&parse("G (q -> G $)", &mut t).unwrap());
        let spec = RewardSpec::from_triples([("A", a, 5.2), ("B", b, 7.3)]).unwrap();
        let both = spec_prog(&st(&[0, 1]), &spec).unwrap();
        assert_eq!(both.total_reward, 12.5);
        assert_eq!(both.rewarded, vec![true, true]);
        let none = spec_prog(&st(&[]), &spec).unwrap();
        assert_eq!(none.total_reward, 0.0);
        assert_eq!(none.next, spec);
    }

    #[test]
    fn unstable_formula_raises_on_second_stage() {
        let (f, _) = setup("(X ~p) | $");
        let spec = RewardSpec::from_triples([("A", f, 1.0)]).unwrap();
        let first = spec_prog(&st(&[]), &spec).unwrap();
        assert_eq!(first.total_reward, 0.0);
        let err = spec_prog(&st(&[0]), &first.next).unwrap_err();
        assert!(matches!(err, Error::RewardAbnormality { ref label, .. } if label == "A"));
        let err = replay(&spec, &[st(&[]), st(&[0])]).unwrap_err();
        assert!(matches!(err, Error::RewardAbnormality { stage: Some(2), .. }));
    }

    #[test]
    fn replay_catalog_examples() {
        let cases = [
            ("~p U (p & $)", vec![st(&[]), st(&[]), st(&[0]), st(&[0])], vec![0.0, 0.0, 1.0, 0.0]),
            ("G (p -> $)", vec![st(&[0]), st(&[]), st(&[0])], vec![1.0, 0.0, 1.0]),
            ("$ U ~p", vec![st(&[0]), st(&[0]), st(&[])], vec![1.0, 1.0, 0.0]),
        ];
        for (text, trace, expect) in cases {
            let (f, _) = setup(text);
            let spec = RewardSpec::from_triples([("A", f, 1.0)]).unwrap();
            assert_eq!(replay(&spec, &trace).unwrap(), expect, "{text}");
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let r = RewardSpec::from_triples([("A", Formula::Dollar, 1.0), ("A", Formula::True, 2.0)]);
        assert!(matches!(r, Err(Error::Invariant(_))));
    }

    #[test]
    fn rule_count_is_linear() {
        let (f, _) = setup("G (p -> X (~q U (q & $))) & (G (q -> G $))");
        let (_, steps) = prog_counted(false, &st(&[0, 1]), &f);
        assert!(steps <= f.len());
    }
}
