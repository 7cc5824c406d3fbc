//! Replays a reward specification stage by stage along a fixed trace.

use nmrdp::{parse, replay, PropositionTable, RewardSpec, WorldState};

fn main() -> nmrdp::Result<()> {
    let mut table = PropositionTable::new();
    let first_p = parse("~p U (p & $)", &mut table)?;
    let after_q = parse("G (q -> G $)", &mut table)?;
    let spec = RewardSpec::from_triples([("first_p", first_p, 5.2), ("after_q", after_q, 7.3)])?;

    let state = |names: &[&str]| WorldState::from_props(table.len(), names.iter().map(|n| table.id(n).unwrap()));
    let trace = [state(&[]), state(&["q"]), state(&["p"]), state(&["p", "q"])];

    let mut current = spec.clone();
    for (i, s) in trace.iter().enumerate() {
        let step = nmrdp::spec_prog(s, &current)?;
        println!("stage {} {:8} reward {:>4}  rewarded {:?}", i + 1, s.display(&table).to_string(), step.total_reward, step.rewarded);
        for e in step.next.entries() {
            println!("    {:8} -> {}", e.label, nmrdp::render(&e.formula, &table)?);
        }
        current = step.next;
    }
    println!("totals {:?}", replay(&spec, &trace)?);
    Ok(())
}
