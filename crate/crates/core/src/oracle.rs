//! Reference semantics over finite traces.
//!
//! Everything here is brute force and deliberately independent of
//! [`crate::progression`]: it evaluates the modelling relation directly and
//! computes rewarded behaviors by quantifying over sets of prefixes. It is
//! meant for desk-sized universes and serves as the test oracle.
//!
//! Finite-trace reading: the universal quantifier of weak until ranges up to
//! the end of the trace, and next is vacuously true at the last stage.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::formula::{Formula, PropId};
use crate::state::WorldState;

/// A non-empty finite sequence of states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiniteTrace(Vec<WorldState>);

impl FiniteTrace {
    pub fn new(states: Vec<WorldState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Invariant("a trace has at least one state".into()));
        }
        Ok(FiniteTrace(states))
    }

    pub fn states(&self) -> &[WorldState] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The prefix ending at stage `i` (inclusive).
    pub fn prefix(&self, i: usize) -> FiniteTrace {
        FiniteTrace(self.0[..=i].to_vec())
    }

    pub fn last(&self) -> &WorldState {
        self.0.last().expect("non-empty")
    }
}

/// A set of finite prefixes: the ones at the end of which a reward is paid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BehaviorSet(pub BTreeSet<FiniteTrace>);

impl BehaviorSet {
    pub fn contains(&self, prefix: &FiniteTrace) -> bool {
        self.0.contains(prefix)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FiniteTrace> {
        self.0.iter()
    }
}

impl FromIterator<FiniteTrace> for BehaviorSet {
    fn from_iter<T: IntoIterator<Item = FiniteTrace>>(iter: T) -> Self {
        BehaviorSet(iter.into_iter().collect())
    }
}

/// `(trace, i) |=_B f`.
pub fn models(trace: &FiniteTrace, i: usize, b: &BehaviorSet, f: &Formula) -> bool {
    assert!(i < trace.len(), "stage {i} outside trace of length {}", trace.len());
    let rewarded: Vec<bool> = (0..trace.len()).map(|k| b.contains(&trace.prefix(k))).collect();
    holds(trace.states(), i, &|k| rewarded[k], f)
}

/// Evaluates `f` at stage `i`; `rewarded(k)` tells whether the prefix ending
/// at stage `k` is in the behavior.
pub fn holds(states: &[WorldState], i: usize, rewarded: &dyn Fn(usize) -> bool, f: &Formula) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Dollar => rewarded(i),
        Formula::Atom(p) => states[i].contains(*p),
        Formula::NegAtom(p) => !states[i].contains(*p),
        Formula::And(ops) => ops.iter().all(|g| holds(states, i, rewarded, g)),
        Formula::Or(ops) => ops.iter().any(|g| holds(states, i, rewarded, g)),
        Formula::Next(g) => i + 1 >= states.len() || holds(states, i + 1, rewarded, g),
        Formula::WeakUntil(lhs, rhs) => {
            // For every k >= i: if rhs fails on all of i..=k then lhs holds at k.
            for k in i..states.len() {
                if holds(states, k, rewarded, rhs) {
                    return true;
                }
                if !holds(states, k, rewarded, lhs) {
                    return false;
                }
            }
            true
        }
    }
}

/// Size limits for the brute-force routines.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    /// Largest prefix set for which every subset is enumerated.
    pub max_enumerated_prefixes: usize,
    /// Largest universe (number of traces) accepted at all.
    pub max_traces: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_enumerated_prefixes: 20,
            max_traces: 1 << 16,
        }
    }
}

/// Every trace of length `horizon` over the propositions `props`; all other
/// propositions of the `width`-wide table stay false.
pub fn all_traces(
    width: usize,
    props: &[PropId],
    horizon: usize,
    limits: &OracleLimits,
) -> Result<Vec<FiniteTrace>> {
    if horizon == 0 {
        return Err(Error::Invariant("trace universes need a horizon of at least 1".into()));
    }
    let states: Vec<WorldState> = (0u64..1 << props.len())
        .map(|bits| {
            WorldState::from_props(
                width,
                props.iter().enumerate().filter(|(j, _)| bits & (1 << j) != 0).map(|(_, &p)| p),
            )
        })
        .collect();
    let needed = (states.len() as u128).saturating_pow(horizon as u32);
    if needed > limits.max_traces as u128 {
        return Err(Error::Capacity {
            what: "trace universe",
            needed,
            limit: limits.max_traces as u128,
        });
    }
    let mut out: Vec<Vec<WorldState>> = vec![Vec::new()];
    for _ in 0..horizon {
        out = out
            .into_iter()
            .flat_map(|t| {
                states.iter().map(move |s| {
                    let mut t = t.clone();
                    t.push(s.clone());
                    t
                })
            })
            .collect();
    }
    Ok(out.into_iter().map(FiniteTrace).collect())
}

/// The universe over the propositions that occur in `f`.
pub fn universe_for(
    f: &Formula,
    width: usize,
    horizon: usize,
    limits: &OracleLimits,
) -> Result<Vec<FiniteTrace>> {
    let props: Vec<PropId> = f.propositions().into_iter().collect();
    all_traces(width, &props, horizon, limits)
}

/// Interned prefixes of a universe.
struct PrefixIndex {
    prefixes: Vec<FiniteTrace>,
    /// ids[t][k]: id of the prefix of trace t ending at stage k.
    ids: Vec<Vec<usize>>,
}

impl PrefixIndex {
    fn build(universe: &[FiniteTrace]) -> Self {
        let mut lookup: HashMap<&[WorldState], usize> = HashMap::new();
        let mut prefixes = Vec::new();
        let mut ids = Vec::with_capacity(universe.len());
        for t in universe {
            let mut row = Vec::with_capacity(t.len());
            for k in 0..t.len() {
                let key = &t.states()[..=k];
                let id = *lookup.entry(key).or_insert_with(|| {
                    prefixes.push(FiniteTrace(key.to_vec()));
                    prefixes.len() - 1
                });
                row.push(id);
            }
            ids.push(row);
        }
        PrefixIndex { prefixes, ids }
    }
}

/// The behavior forced by `f` over `universe`, by literal enumeration of
/// every subset of the prefix set.
///
/// Returns the intersection of all behaviors under which `f` holds on every
/// trace, or the full prefix set when there is none.
pub fn minimal_behavior_enumerated(
    f: &Formula,
    universe: &[FiniteTrace],
    limits: &OracleLimits,
) -> Result<BehaviorSet> {
    let index = PrefixIndex::build(universe);
    let n = index.prefixes.len();
    if n > limits.max_enumerated_prefixes || n >= 64 {
        return Err(Error::Capacity {
            what: "prefix subsets",
            needed: 1u128.checked_shl(n as u32).unwrap_or(u128::MAX),
            limit: 1u128 << limits.max_enumerated_prefixes.min(127),
        });
    }
    let full: u64 = if n == 64 { u64::MAX } else { (1 << n) - 1 };
    let mut meet = full;
    let mut any = false;
    for mask in 0..=full {
        let ok = universe.iter().zip(&index.ids).all(|(t, ids)| {
            holds(t.states(), 0, &|k| mask & (1 << ids[k]) != 0, f)
        });
        if ok {
            meet &= mask;
            any = true;
        }
    }
    if !any {
        meet = full;
    }
    Ok((0..n)
        .filter(|&i| meet & (1 << i) != 0)
        .map(|i| index.prefixes[i].clone())
        .collect())
}

/// The behavior forced by `f` over `universe`.
///
/// `$` only occurs positively, so satisfaction is upward closed in the
/// behavior. A prefix then belongs to every satisfying behavior iff removing
/// it alone from the full prefix set breaks satisfaction, which needs one
/// check per prefix instead of one per subset. Agrees with
/// [`minimal_behavior_enumerated`] wherever both apply.
pub fn minimal_behavior(f: &Formula, universe: &[FiniteTrace], limits: &OracleLimits) -> Result<BehaviorSet> {
    if universe.len() > limits.max_traces {
        return Err(Error::Capacity {
            what: "trace universe",
            needed: universe.len() as u128,
            limit: limits.max_traces as u128,
        });
    }
    let index = PrefixIndex::build(universe);
    let all_rewarded = universe.iter().all(|t| holds(t.states(), 0, &|_| true, f));
    if !all_rewarded {
        return Ok(index.prefixes.iter().cloned().collect());
    }
    let mut forced = vec![false; index.prefixes.len()];
    for (t, ids) in universe.iter().zip(&index.ids) {
        for (k, &id) in ids.iter().enumerate() {
            if forced[id] {
                continue;
            }
            // Traces not passing through this prefix keep the full behavior
            // and were checked above.
            if !holds(t.states(), 0, &|j| j != k, f) {
                forced[id] = true;
            }
        }
    }
    Ok(index
        .prefixes
        .iter()
        .zip(forced)
        .filter(|(_, keep)| *keep)
        .map(|(p, _)| p.clone())
        .collect())
}

/// A trace and behavior on which the normality biconditional fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub trace: FiniteTrace,
    /// Stages whose prefixes are in the behavior.
    pub rewarded_stages: Vec<usize>,
    /// Whether the formula holds on the trace under that behavior.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    pub horizon: usize,
    pub behavior: BehaviorSet,
    pub counterexample: Option<Counterexample>,
}

impl NormalityReport {
    pub fn is_normal(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Bounded reward-normality check.
///
/// For every trace of the universe and every behavior over its prefixes,
/// `f` must hold exactly when the behavior contains every forced prefix of
/// the trace.
pub fn check_reward_normal(
    f: &Formula,
    universe: &[FiniteTrace],
    limits: &OracleLimits,
) -> Result<NormalityReport> {
    let behavior = minimal_behavior(f, universe, limits)?;
    let horizon = universe.first().map_or(0, FiniteTrace::len);
    if horizon >= 32 {
        return Err(Error::Capacity {
            what: "behaviors per trace",
            needed: 1u128 << horizon.min(127),
            limit: 1 << 31,
        });
    }
    for t in universe {
        let forced: u32 = (0..t.len())
            .filter(|&k| behavior.contains(&t.prefix(k)))
            .fold(0, |m, k| m | (1 << k));
        for mask in 0u32..(1 << t.len()) {
            let sat = holds(t.states(), 0, &|k| mask & (1 << k) != 0, f);
            let covers = forced & !mask == 0;
            if sat != covers {
                return Ok(NormalityReport {
                    horizon,
                    behavior,
                    counterexample: Some(Counterexample {
                        trace: t.clone(),
                        rewarded_stages: (0..t.len()).filter(|k| mask & (1 << k) != 0).collect(),
                        holds: sat,
                    }),
                });
            }
        }
    }
    Ok(NormalityReport {
        horizon,
        behavior,
        counterexample: None,
    })
}
