//! Anytime behavior: the same problem solved under growing deadlines. Each
//! run returns the best partial policy found so far.

use std::time::Duration;

use nmrdp::solver::{anytime_solve, Method, SolveOptions};
use nmrdp::{load_domain, Xmdp};

const DOMAIN: &str = "props: a b c d e f
init:
discount: 0.95
action ta
  outcome 0.7: +a
  outcome 0.3: -a
end
action tb
  pre: a
  outcome 0.6: +b
  outcome 0.4: -a
end
action tc
  pre: b
  outcome 0.5: +c
  outcome 0.5: -b
end
action td
  outcome 0.5: +d -e
  outcome 0.5: +e -d
end
action tf
  outcome 0.2: +f
  outcome 0.8: -f
end
reward first_c 5.0: ~c U (c & $)
reward d_then_e 1.0: G (d -> X (~e U (e & $)))
reward f_always 0.5: G (f -> $)
";

fn main() -> nmrdp::Result<()> {
    let m = load_domain(DOMAIN)?;
    for ms in [0, 1, 5, 25, 1000] {
        let mut x = Xmdp::new(&m)?;
        let opts = SolveOptions::default().with_deadline(Duration::from_millis(ms));
        let r = anytime_solve(&mut x, Method::Lao, &opts)?;
        println!(
            "deadline {ms:>4} ms: {:?}, V(s0) = {:.5}, envelope {}, fringe {}, interned {}",
            r.stop,
            r.value_at_initial,
            r.policy.envelope.len(),
            r.policy.fringe.len(),
            x.len()
        );
    }
    Ok(())
}
