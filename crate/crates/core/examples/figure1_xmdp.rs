//! Builds the expanded MDP of the bundled two-state example and prints its
//! e-states and transitions.

use nmrdp::xmdp::{describe_estate, reachable_xmdp};

const DOMAIN: &str = include_str!("../domains/figure1.dom");

fn main() -> nmrdp::Result<()> {
    let m = nmrdp::load_domain(DOMAIN)?;
    let x = reachable_xmdp(&m, 1000)?;
    for id in 0..x.len() {
        println!("s'{id}: {}", describe_estate(&m, x.estate(id)));
    }
    let g = x.graph();
    for e in &g.edges {
        println!("  s'{} -{}-> s'{} ({})", e.src, e.action, e.dst, e.prob);
    }
    println!("{} e-states, {} distinct transitions", g.nodes.len(), g.transition_count());
    Ok(())
}
