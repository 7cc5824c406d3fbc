//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nmrdp::domain::{load_domain, Nmrdp, Outcome, ProbAction};
use nmrdp::formula::{Formula, PropositionTable};
use nmrdp::parser::parse_closed;
use nmrdp::progression::RewardSpec;
use nmrdp::state::WorldState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIGURE1: &str = include_str!("../../domains/figure1.dom");

pub fn figure1() -> Nmrdp {
    load_domain(FIGURE1).unwrap()
}

/// Standard reward patterns in NNF. Bounded
/// operators are instantiated at k = 1 and k = 2.
pub const CATALOG: &[(&str, &str)] = &[
    ("goal", "G (p -> $)"),
    ("goal_then_always", "G (p -> G $)"),
    ("first_p", "~p U (p & $)"),
    ("every_2_steps", "G (X^2 ~p | F<=1 p | X^2 $)"),
    ("every_3_steps", "G (X^3 ~p | F<=2 p | X^3 $)"),
    ("response_all", "G (c -> X G (p -> $))"),
    ("response_first", "G (c -> X (~p U (p & $)))"),
    ("response_bounded", "G (c -> A<=2 (p -> $))"),
    ("always_p", "$ U ~p"),
    ("since", "G (q -> ($ U ~p))"),
];

/// Parses `text` over `table`, adding new propositions.
pub fn formula(text: &str, table: &mut PropositionTable) -> Formula {
    nmrdp::parser::parse(text, table).unwrap()
}

/// Reward formulas of depth at most 3 over `p`, `q`, `r`.
pub const SHALLOW: &[&str] = &[
    "G (p -> $)",
    "~p U (p & $)",
    "$ U ~p",
    "X (p -> $)",
    "$ U (~p & ~q)",
    "X X $",
    "~q U (q & $)",
    "G (q -> $)",
    "(p & $) | ~p",
    "$ U ~r",
    "X (~r | $)",
];

/// Random domain over `n` propositions named `p`, `q`, `r`, `p3`, ...
///
/// Every state has at least one applicable action (`wait` is always
/// available). Reward formulas are given as text over those names.
pub fn random_domain(seed: u64, n: usize, n_actions: usize, rewards: &[(&str, f64)], discount: f64) -> Nmrdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..n)
        .map(|i| match i {
            0 => "p".to_string(),
            1 => "q".to_string(),
            2 => "r".to_string(),
            _ => format!("p{i}"),
        })
        .collect();
    let table = PropositionTable::from_names(&names);
    let initial = WorldState::from_props(n, (0..n as u32).filter(|_| rng.gen_bool(0.3)));
    let mut actions = vec![ProbAction::new(
        "wait",
        Formula::True,
        vec![Outcome::new(1.0, [], [])],
    )
    .unwrap()];
    for k in 0..n_actions {
        let precondition = match rng.gen_range(0..3) {
            0 => Formula::True,
            1 => Formula::Atom(rng.gen_range(0..n as u32)),
            _ => Formula::NegAtom(rng.gen_range(0..n as u32)),
        };
        let n_out = rng.gen_range(1..=3);
        let weights: Vec<u32> = (0..n_out).map(|_| rng.gen_range(1..=4)).collect();
        let total: u32 = weights.iter().sum();
        let outcomes = weights
            .iter()
            .map(|&w| {
                let mut adds = BTreeSet::new();
                let mut dels = BTreeSet::new();
                for _ in 0..rng.gen_range(0..=2) {
                    let p = rng.gen_range(0..n as u32);
                    if rng.gen_bool(0.5) {
                        if !dels.contains(&p) {
                            adds.insert(p);
                        }
                    } else if !adds.contains(&p) {
                        dels.insert(p);
                    }
                }
                Outcome::new(w as f64 / total as f64, adds, dels)
            })
            .collect();
        actions.push(ProbAction::new(format!("a{k}"), precondition, outcomes).unwrap());
    }
    let spec = RewardSpec::from_triples(
        rewards
            .iter()
            .enumerate()
            .map(|(i, (text, r))| (format!("r{i}"), parse_closed(text, &table).unwrap(), *r)),
    )
    .unwrap();
    Nmrdp::new(table, initial, actions, spec, None, discount).unwrap()
}

/// Picks `k` distinct entries of `SHALLOW` for a domain with `n` propositions.
pub fn random_shallow_spec(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<(&'static str, f64)> {
    let usable: Vec<&str> = SHALLOW
        .iter()
        .copied()
        .filter(|f| (n >= 2 || !f.contains('q')) && (n >= 3 || !f.contains('r')))
        .collect();
    let mut out: Vec<(&str, f64)> = Vec::new();
    while out.len() < k.min(usable.len()) {
        let f = usable[rng.gen_range(0..usable.len())];
        if out.iter().all(|(g, _)| *g != f) {
            out.push((f, rng.gen_range(1..=3) as f64));
        }
    }
    out
}

/// Sequencing domain over `step1..step<n>`, cumulative: `advance_k` adds
/// `step<k+1>` once `step<k>` holds; `set_j` tries to add `step<j>` out of
/// order; `clear_j` removes `step<j>`. Reward for reaching `step<n>` first.
pub fn chain_domain(n: usize, control: bool) -> Nmrdp {
    let names: Vec<String> = (1..=n).map(|i| format!("step{i}")).collect();
    let table = PropositionTable::from_names(&names);
    let id = |i: usize| (i - 1) as u32;
    let mut actions = Vec::new();
    for k in 1..n {
        actions.push(
            ProbAction::new(
                format!("advance_{k}"),
                Formula::and(vec![Formula::Atom(id(k)), Formula::NegAtom(id(k + 1))]),
                vec![Outcome::new(1.0, [id(k + 1)], [])],
            )
            .unwrap(),
        );
    }
    for j in 2..n {
        actions.push(
            ProbAction::new(
                format!("set_{j}"),
                Formula::True,
                vec![Outcome::new(0.5, [id(j)], []), Outcome::new(0.5, [], [])],
            )
            .unwrap(),
        );
    }
    for j in 1..=n {
        actions.push(
            ProbAction::new(format!("clear_{j}"), Formula::True, vec![Outcome::new(1.0, [], [id(j)])]).unwrap(),
        );
    }
    let goal = format!("step{n}");
    let spec = RewardSpec::from_triples([(
        "goal",
        parse_closed(&format!("~{goal} U ({goal} & $)"), &table).unwrap(),
        10.0,
    )])
    .unwrap();
    let c = control.then(|| chain_control(n, &table));
    Nmrdp::new(table, WorldState::from_props(n, [0]), actions, spec, c, 0.95).unwrap()
}

/// `G (step_i -> X step_{i+1})` for every i.
pub fn chain_control(n: usize, table: &PropositionTable) -> Formula {
    let parts: Vec<String> = (1..n).map(|i| format!("G (step{i} -> X step{})", i + 1)).collect();
    parse_closed(&parts.join(" & "), table).unwrap()
}

/// Value iteration on the explicit world-state MDP with a Markovian reward
/// given per world state. Written against the model only; no e-states.
pub fn plain_mdp_values(
    m: &Nmrdp,
    reward: impl Fn(&WorldState) -> f64,
    epsilon: f64,
) -> HashMap<WorldState, f64> {
    let mut states = vec![m.initial().clone()];
    let mut index: HashMap<WorldState, usize> = HashMap::from([(m.initial().clone(), 0)]);
    let mut trans: Vec<Vec<Vec<(usize, f64)>>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let s = states[i].clone();
        let mut per_action = Vec::new();
        for a in m.applicable(&s) {
            let mut row = Vec::new();
            for (t, p) in m.successors(&s, a).unwrap() {
                let j = *index.entry(t.clone()).or_insert_with(|| {
                    states.push(t);
                    states.len() - 1
                });
                row.push((j, p));
            }
            per_action.push(row);
        }
        trans.push(per_action);
        i += 1;
    }
    let beta = m.discount();
    let r: Vec<f64> = states.iter().map(&reward).collect();
    let mut v = vec![0.0; states.len()];
    loop {
        let mut delta: f64 = 0.0;
        let next: Vec<f64> = (0..states.len())
            .map(|i| {
                let best = trans[i]
                    .iter()
                    .map(|row| row.iter().map(|&(j, p)| p * v[j]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                r[i] + if best.is_finite() { beta * best } else { 0.0 }
            })
            .collect();
        for (a, b) in v.iter().zip(&next) {
            delta = delta.max((a - b).abs());
        }
        v = next;
        if delta < epsilon * (1.0 - beta) / 2.0 {
            break;
        }
    }
    states.into_iter().zip(v).collect()
}

/// Finite-horizon optimal values of the bundled first-p problem, with the reward
/// "1 the first time p holds" tracked by a seen-p flag instead of formulas.
/// Returns the value of the initial state under each first action.
pub fn figure1_finite_horizon(horizon: usize, beta: f64) -> BTreeMap<&'static str, f64> {
    // (name, p required, successors as (p, probability))
    type Move = (&'static str, usize, &'static [(usize, f64)]);
    let moves: [Move; 4] = [
        ("a", 0, &[(1, 0.1), (0, 0.9)]),
        ("b", 0, &[(1, 0.5), (0, 0.5)]),
        ("c", 1, &[(1, 1.0)]),
        ("d", 1, &[(0, 1.0)]),
    ];
    let q = |v: &[[f64; 2]; 2], seen: usize, succ: &[(usize, f64)]| {
        succ.iter()
            .map(|&(t, pr)| {
                let r = if seen == 0 && t == 1 { 1.0 } else { 0.0 };
                pr * beta * (r + v[seen | t][t])
            })
            .sum::<f64>()
    };
    // v[seen][p]: optimal value-to-go, current reward excluded.
    let mut v = [[0.0f64; 2]; 2];
    for _ in 1..horizon {
        let mut nv = [[0.0f64; 2]; 2];
        for (seen, row) in nv.iter_mut().enumerate() {
            for (p, cell) in row.iter_mut().enumerate() {
                *cell = moves
                    .iter()
                    .filter(|(_, pre, _)| *pre == p)
                    .map(|(_, _, succ)| q(&v, seen | p, succ))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        v = nv;
    }
    moves
        .iter()
        .filter(|(_, pre, _)| *pre == 0)
        .map(|(name, _, succ)| (*name, q(&v, 0, succ)))
        .collect()
}

/// Every world state over `width` propositions.
pub fn all_worlds(width: usize) -> Vec<WorldState> {
    (0u64..1 << width).map(|b| WorldState::from_bits(width, b)).collect()
}
