mod common;

use std::path::PathBuf;

use common::FIGURE1;
use nmrdp::cli::run;

struct Output {
    code: i32,
    out: String,
    err: String,
}

fn nmrdp(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("nmrdp").chain(args.iter().copied()), &mut out, &mut err);
    Output {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

/// Writes `text` to a fresh file in a per-test temporary directory.
fn domain_file(test: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nmrdp-cli-{}-{test}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("domain.dom");
    std::fs::write(&path, text).unwrap();
    path
}

fn two_formula_domain(test: &str) -> PathBuf {
    domain_file(
        test,
        "props: p q\ninit:\ndiscount: 0.9\n\
         action noop\n  outcome 1.0:\nend\n\
         reward first_p 5.2: ~p U (p & $)\n\
         reward after_q 7.3: G (q -> G $)\n",
    )
}

#[test]
fn check_reports_normal_and_abnormal_formulas() {
    let ok = nmrdp(&["check", "~p U (p & $)"]);
    assert_eq!(ok.code, 0, "{}", ok.err);
    assert!(ok.out.contains("reward-normal at bound H=3"));
    assert!(ok.out.contains("canonical:"));

    let bad = nmrdp(&["check", "G p"]);
    assert_eq!(bad.code, 2);
    assert!(bad.out.contains("counterexample trace:"));

    let syntax = nmrdp(&["check", "p U"]);
    assert_eq!(syntax.code, 1);
    assert!(syntax.err.starts_with("error:"));
}

#[test]
fn check_reads_domain_files() {
    let path = domain_file("check-domain", FIGURE1);
    let r = nmrdp(&["check", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("first_p\n"));
}

#[test]
fn progress_prints_each_stage() {
    let path = two_formula_domain("progress");
    let r = nmrdp(&["progress", path.to_str().unwrap(), "{} {q} {p} {p,q}"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let totals: Vec<&str> = r.out.lines().map(|l| l.rsplit(' ').next().unwrap()).collect();
    assert_eq!(totals, ["0", "7.3", "12.5", "7.3"]);
    assert!(r.out.lines().next().unwrap().starts_with("stage 1 {}"));

    let path = domain_file("progress-fig", FIGURE1);
    let r = nmrdp(&["progress", path.to_str().unwrap(), "{} {} {p} {}"]);
    let totals: Vec<&str> = r.out.lines().map(|l| l.rsplit(' ').next().unwrap()).collect();
    assert_eq!(totals, ["0", "0", "1", "0"]);
}

#[test]
fn progress_reports_runtime_abnormality() {
    let path = domain_file(
        "abnormal",
        "props: p\ninit: p\ndiscount: 0.9\naction a\n  outcome 1.0:\nend\nreward bad 1.0: G p\n",
    );
    let r = nmrdp(&["progress", path.to_str().unwrap(), "{p} {} {p}"]);
    assert_eq!(r.code, 3);
    assert_eq!(r.out.lines().count(), 1, "the clean stage is still printed");
    assert!(r.err.contains("bad"));

    let r = nmrdp(&["solve", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "p is never deleted, so G p never fails: {}", r.err);

    let path = domain_file(
        "abnormal-solve",
        "props: p\ninit: p\ndiscount: 0.9\naction a\n  outcome 1.0: -p\nend\nreward bad 1.0: G p\n",
    );
    assert_eq!(nmrdp(&["translate", path.to_str().unwrap()]).code, 3);
    assert_eq!(nmrdp(&["solve", path.to_str().unwrap()]).code, 3);
}

#[test]
fn translate_summarizes_the_first_p_example() {
    let path = domain_file("translate", FIGURE1);
    let r = nmrdp(&["translate", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(r.out.lines().last().unwrap(), "4 e-states, 8 edges");
    assert_eq!(r.out.lines().filter(|l| l.starts_with("node ")).count(), 4);

    let graph = path.with_extension("graph");
    let r = nmrdp(&["translate", path.to_str().unwrap(), "--out", graph.to_str().unwrap()]);
    assert_eq!(r.out, "4 e-states, 8 edges\n");
    assert!(std::fs::read_to_string(&graph).unwrap().starts_with("node 0"));
}

#[test]
fn solve_writes_policy_and_report() {
    let path = domain_file("solve", FIGURE1);
    let prefix = path.with_extension("");
    for method in ["vi", "lao", "rtdp"] {
        let r = nmrdp(&["solve", path.to_str().unwrap(), "--method", method, "--out", prefix.to_str().unwrap()]);
        assert_eq!(r.code, 0, "{method}: {}", r.err);
        assert!(r.out.starts_with(&format!("# method={method} beta=0.9")));
        assert!(r.err.contains("time_ms"));
        let report = std::fs::read_to_string(prefix.with_extension("report")).unwrap();
        assert_eq!(report, r.out);
        let policy = std::fs::read_to_string(prefix.with_extension("policy")).unwrap();
        assert!(policy.lines().any(|l| l == "0 b"), "{policy}");
    }
}

#[test]
fn output_is_reproducible() {
    let path = domain_file("repro", FIGURE1);
    for args in [
        vec!["solve", path.to_str().unwrap(), "--method", "rtdp", "--seed", "9"],
        vec!["simulate", path.to_str().unwrap(), "--runs", "500", "--seed", "4"],
        vec!["audit", path.to_str().unwrap()],
    ] {
        let a = nmrdp(&args);
        assert_eq!(a.code, 0, "{args:?}: {}", a.err);
        assert_eq!(a.out, nmrdp(&args).out, "{args:?}");
    }
}

#[test]
fn simulate_and_audit_summaries() {
    let path = domain_file("simulate", FIGURE1);
    let r = nmrdp(&["simulate", path.to_str().unwrap(), "--runs", "2000"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("policy value 0.8181"));
    assert!(r.out.contains("(2000 runs) horizon 60"));

    let r = nmrdp(&["audit", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("4 e-states\n"));
}

#[test]
fn budget_and_capacity_have_their_own_codes() {
    let path = domain_file("budget", FIGURE1);
    assert_eq!(nmrdp(&["translate", path.to_str().unwrap(), "--budget", "2"]).code, 4);
    let r = nmrdp(&["solve", path.to_str().unwrap(), "--budget", "2"]);
    assert_eq!(r.code, 4);
    assert!(r.out.contains("# method=lao"), "a partial policy is still printed");

    let r = nmrdp(&["check", "G (a | b | c | d | e | f) | $", "--horizon", "9"]);
    assert_eq!(r.code, 5, "{}", r.err);
}

#[test]
fn bad_arguments_and_files() {
    assert_eq!(nmrdp(&["solve", "/nonexistent/domain.dom"]).code, 1);
    let path = domain_file("flags", FIGURE1);
    assert_eq!(nmrdp(&["solve", path.to_str().unwrap(), "--beta", "1.0"]).code, 1);
    assert_eq!(nmrdp(&["solve", path.to_str().unwrap(), "--method", "ppo"]).code, 1);
    assert_eq!(nmrdp(&["solve", path.to_str().unwrap(), "--epsilon", "0"]).code, 1);
    assert_eq!(nmrdp(&["frobnicate"]).code, 1);
    let bad = domain_file("format", "props: p\ndiscount: 0.9\nfrobnicate\n");
    let r = nmrdp(&["translate", bad.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("line 3"), "{}", r.err);
}

#[test]
fn help_and_version() {
    let h = nmrdp(&["--help"]);
    assert_eq!(h.code, 0);
    for cmd in ["check", "progress", "translate", "solve", "simulate", "audit"] {
        assert!(h.out.contains(cmd), "{cmd}");
    }
    let v = nmrdp(&["--version"]);
    assert_eq!(v.code, 0);
    assert!(v.out.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn documented_invocations() {
    assert_eq!(nmrdp(&["check", "G (p -> $)"]).out.lines().last().unwrap(), "  reward-normal at bound H=3");
    let r = nmrdp(&["check", "(X ~p) | $"]);
    assert_eq!(r.code, 2);
    assert!(r.out.contains("counterexample trace: {} {}"), "{}", r.out);
    let r = nmrdp(&["check", "~(p U q)"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("negation"), "{}", r.err);

    let fig = domain_file("documented", FIGURE1);
    let fig = fig.to_str().unwrap();
    let r = nmrdp(&["progress", fig, "{} {} {p} {p}"]);
    let totals: Vec<&str> = r.out.lines().map(|l| l.rsplit(' ').next().unwrap()).collect();
    assert_eq!(totals, ["0", "0", "1", "0"]);

    let two = two_formula_domain("documented-two");
    let r = nmrdp(&["progress", two.to_str().unwrap(), "{p,q}"]);
    assert_eq!(r.out, "stage 1 {p,q} after_q=1 first_p=1 total 12.5\n");

    let abnormal = domain_file(
        "documented-abnormal",
        "props: p\ninit: p\ndiscount: 0.9\naction a\n  outcome 1.0:\nend\nreward bad 1.0: G p\n",
    );
    let r = nmrdp(&["progress", abnormal.to_str().unwrap(), "{p} {}"]);
    assert_eq!(r.code, 3);
    assert!(r.err.contains("bad") && r.err.contains("stage 2"), "{}", r.err);

    let r = nmrdp(&["solve", fig, "--method", "lao", "--beta", "0.9"]);
    assert_eq!(r.code, 0);
    let value: f64 = r
        .out
        .lines()
        .find_map(|l| l.strip_prefix("value "))
        .unwrap_or_else(|| panic!("{}", r.out))
        .parse()
        .unwrap();
    assert!((value - 9.0 / 11.0).abs() < 1e-5, "{value}");
    assert!(r.out.lines().any(|l| l == "initial_action b"), "{}", r.out);

    let r = nmrdp(&["audit", fig, "--horizon", "3"]);
    assert!(r.out.contains("0 mergeable pairs"), "{}", r.out);
}
