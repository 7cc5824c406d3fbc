//! Audits an XMDP for e-states of the same world that no future could tell
//! apart, then shows that a duplicated e-state is caught.

use nmrdp::xmdp::{audit_blind_minimality, reachable_xmdp, AuditLimits};

const DOMAIN: &str = "props: p c
init:
discount: 0.9
action flip
  outcome 0.5: +p
  outcome 0.5: -p
end
action call
  outcome 0.5: +c
  outcome 0.5: -c
end
reward respond 1.0: G (c -> X (~p U (p & $)))
";

fn main() -> nmrdp::Result<()> {
    let m = nmrdp::load_domain(DOMAIN)?;
    let x = reachable_xmdp(&m, 10_000)?;
    let report = x.audit(4, &AuditLimits::default())?;
    println!("{} e-states", x.len());
    print!("{}", report.render());

    let mut states: Vec<_> = x.store().states().to_vec();
    states.push(states[0].clone());
    let tampered = audit_blind_minimality(&m, &states, 4, &AuditLimits::default())?;
    println!("with a duplicated initial e-state: mergeable {:?}", tampered.mergeable);
    Ok(())
}
