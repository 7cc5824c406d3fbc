//! Bounded reward-normality checks: minimal behaviors are computed over all
//! traces up to a horizon, and abnormal formulas yield a counterexample.

use nmrdp::oracle::{check_reward_normal, universe_for, OracleLimits};
use nmrdp::{parse, PropositionTable};

fn main() -> nmrdp::Result<()> {
    let limits = OracleLimits::default();
    for text in ["G (p -> $)", "~p U (p & $)", "G (c -> X G (p -> $))", "G p", "(X ~p) | $", "p U (q & $)"] {
        let mut table = PropositionTable::new();
        let f = parse(text, &mut table)?;
        let universe = universe_for(&f, table.len(), 3, &limits)?;
        let report = check_reward_normal(&f, &universe, &limits)?;
        match report.counterexample {
            None => println!("{text:24} normal, {} rewarded prefixes", report.behavior.len()),
            Some(cex) => {
                let states: Vec<String> = cex.trace.states().iter().map(|s| s.display(&table).to_string()).collect();
                println!(
                    "{text:24} ABNORMAL on {} (rewarded {:?}, holds {})",
                    states.join(" "),
                    cex.rewarded_stages,
                    cex.holds
                );
            }
        }
    }
    Ok(())
}
