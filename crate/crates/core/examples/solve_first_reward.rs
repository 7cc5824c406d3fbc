//! Solves the bundled example with each method and checks the policy value
//! against simulation.

use nmrdp::solver::{anytime_solve, simulate_policy, Method, SolveOptions};
use nmrdp::Xmdp;

const DOMAIN: &str = include_str!("../domains/figure1.dom");

fn main() -> nmrdp::Result<()> {
    let m = nmrdp::load_domain(DOMAIN)?;
    for method in [Method::Vi, Method::Lao, Method::Rtdp] {
        let mut x = Xmdp::new(&m)?;
        let report = anytime_solve(&mut x, method, &SolveOptions::default())?;
        let first = report.policy.get(x.initial()).unwrap_or("-");
        let sim = simulate_policy(&mut x, &report.policy, 150, 20_000, 1)?;
        println!(
            "{method:4} V(s0) = {:.6}  first action {first}  e-states {}  simulated {sim}",
            report.value_at_initial,
            x.len()
        );
    }
    Ok(())
}
