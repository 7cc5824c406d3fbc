//! Control knowledge as a $-free formula: e-states whose control progresses
//! to false are pruned, which shrinks the part of the XMDP the solver builds.

use nmrdp::solver::{anytime_solve, Method, SolveOptions};
use nmrdp::{parse_closed, Formula, Nmrdp, Outcome, ProbAction, PropositionTable, RewardSpec, WorldState, Xmdp};

/// Steps 1..n taken in order by `advance` actions; `jump` actions set a
/// later step at random. The control below rules the jumps out, so the
/// controlled value is lower.
fn chain(n: usize) -> nmrdp::Result<Nmrdp> {
    let names: Vec<String> = (1..=n).map(|i| format!("s{i}")).collect();
    let table = PropositionTable::from_names(&names);
    let mut actions = Vec::new();
    for k in 0..n - 1 {
        let pre = Formula::and(vec![Formula::Atom(k as u32), Formula::NegAtom(k as u32 + 1)]);
        actions.push(ProbAction::new(format!("advance{}", k + 1), pre, vec![Outcome::new(1.0, [k as u32 + 1], [])])?);
    }
    for j in 1..n - 1 {
        actions.push(ProbAction::new(
            format!("jump{}", j + 1),
            Formula::True,
            vec![Outcome::new(0.5, [j as u32], []), Outcome::new(0.5, [], [])],
        )?);
    }
    let goal = parse_closed(&format!("~s{n} U (s{n} & $)"), &table)?;
    let reward = RewardSpec::from_triples([("goal", goal, 10.0)])?;
    let init = WorldState::from_props(n, [0]);
    Nmrdp::new(table, init, actions, reward, None, 0.95)
}

fn main() -> nmrdp::Result<()> {
    let m = chain(9)?;
    // Whenever step i holds, step i+1 must hold next: only advancing is allowed.
    let rules: Vec<String> = (1..9).map(|i| format!("G (s{i} -> X s{})", i + 1)).collect();
    let control = parse_closed(&rules.join(" & "), m.table())?;
    let controlled = m.with_control(Some(control))?;
    for (name, model) in [("without control", &m), ("with control", &controlled)] {
        let mut x = Xmdp::new(model)?;
        let report = anytime_solve(&mut x, Method::Lao, &SolveOptions::default())?;
        println!("{name:16} V(s0) = {:.4}  e-states built {}", report.value_at_initial, x.len());
    }
    Ok(())
}
