//! End-to-end tests of the `vlmc` binary: pipeline round trips, golden
//! output bytes, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn vlmc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlmc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value_of(record: &str) -> f64 {
    record
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("value="))
        .expect("record has a value field")
        .parse()
        .unwrap()
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |out: &str, seed: &str, stream: &str| {
        stdout_of(&vlmc(
            &[
                "simulate", "--tree", "ref", "--length", "300", "--seed", seed, "--stream",
                stream, "--out", out,
            ],
            d,
        ));
        std::fs::read(d.join(out)).unwrap()
    };
    let a = run("a.txt", "7", "0");
    let b = run("b.txt", "7", "0");
    let c = run("c.txt", "8", "0");
    let e = run("e.txt", "7", "1");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, e);
    assert_eq!(a.len(), 301);
}

#[test]
fn inspect_prints_sorted_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.txt"), "00010\n").unwrap();
    let table = stdout_of(&vlmc(&["inspect", "--sample", "s.txt", "--depth", "2"], d));
    assert_eq!(table, "0\t4\n00\t2\n01\t1\n1\t1\n10\t1\n");
    let one = stdout_of(&vlmc(
        &["inspect", "--sample", "s.txt", "--depth", "2", "--string", "01"],
        d,
    ));
    assert_eq!(one, "01\t1\n");
}

#[test]
fn pipeline_recovers_the_generating_tree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stdout_of(&vlmc(
        &["simulate", "--tree", "ref", "--length", "30000", "--seed", "5", "--out", "s.txt"],
        d,
    ));
    // The canonical approximation at the tree's own height is the tree
    // itself, which gives a reference tree file to diff against.
    stdout_of(&vlmc(
        &["theory", "--tree", "ref", "--quantity", "canonical", "--k", "2", "--out", "ref.txt"],
        d,
    ));
    for (algo, extra) in [
        ("context", &[][..]),
        ("context-fixed", &[][..]),
        ("delta", &["--delta", "0.08", "--k", "4"][..]),
    ] {
        let out = format!("est-{algo}.txt");
        let mut args =
            vec!["estimate", "--algo", algo, "--sample", "s.txt", "--tree-out", &out];
        args.extend_from_slice(extra);
        let line = stdout_of(&vlmc(&args, d));
        assert!(line.contains("contexts=3"), "{algo}: {line}");
        let diff = stdout_of(&vlmc(&["compare", "--tree-a", &out, "--tree-b", "ref.txt"], d));
        assert_eq!(diff.lines().next(), Some("equal=true"), "{algo}: {diff}");
    }
}

#[test]
fn compare_lists_differences_and_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.txt"), "0 1\n0 0.5 0.5\n1 0.5 0.5\n").unwrap();
    std::fs::write(d.join("b.txt"), "0 1\n00 0.5 0.5\n10 0.5 0.5\n1 0.5 0.5\n").unwrap();
    let out = vlmc(&["compare", "--tree-a", "a.txt", "--tree-b", "b.txt"], d);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "equal=false\nonly-a\t0\nonly-b\t00\nonly-b\t10\n");
    let trunc = stdout_of(&vlmc(
        &["compare", "--tree-a", "a.txt", "--tree-b", "b.txt", "--truncate", "1"],
        d,
    ));
    assert_eq!(trunc, "equal=true\n");
}

#[test]
fn theory_records_are_machine_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dm = stdout_of(&vlmc(&["theory", "--tree", "ref", "--quantity", "dm", "--m", "2"], d));
    assert!(dm.starts_with("quantity=dm m=2 value="), "{dm}");
    assert!((value_of(&dm) - 7.0 / 60.0).abs() < 1e-14);

    let mk = stdout_of(&vlmc(
        &["theory", "--tree", "ref", "--quantity", "min-k", "--truncate", "2"],
        d,
    ));
    assert_eq!(mk, "quantity=min-k truncate=2 value=3\n");

    let dev = stdout_of(&vlmc(
        &[
            "theory", "--tree", "ref", "--quantity", "deviation-bound", "--w", "10", "--t",
            "0.05", "--n", "1000000",
        ],
        d,
    ));
    assert!((value_of(&dev) - 5.4918).abs() < 1e-3, "{dev}");

    let rec = stdout_of(&vlmc(
        &[
            "theory", "--tree", "ref", "--quantity", "recovery-bound", "--truncate", "2",
            "--k", "3", "--delta", "0.1", "--n", "1000000",
        ],
        d,
    ));
    assert!((value_of(&rec) - 184.72).abs() < 0.01, "{rec}");

    let alpha = stdout_of(&vlmc(&["theory", "--tree", "ref", "--quantity", "alpha"], d));
    for field in ["alpha0=", "alpha=", "c=", "rho-bound=", "alphas="] {
        assert!(alpha.contains(field), "{alpha}");
    }
}

#[test]
fn experiment_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.ini"),
        "tree = ref\ngrid = 500, 1000\nreplicas = 3\nseed = 42\nalgo = context\n",
    )
    .unwrap();
    let first = stdout_of(&vlmc(
        &["experiment", "--config", "exp.ini", "--out", "r1.csv", "--workers", "1"],
        d,
    ));
    stdout_of(&vlmc(
        &["experiment", "--config", "exp.ini", "--out", "r2.csv", "--workers", "4"],
        d,
    ));
    let r1 = std::fs::read(d.join("r1.csv")).unwrap();
    let r2 = std::fs::read(d.join("r2.csv")).unwrap();
    assert_eq!(r1, r2);
    let text = String::from_utf8(r1).unwrap();
    assert_eq!(text.lines().next(), Some("n,replica,algo,recovered,tree_size,ell_mismatch,wall_ms"));
    assert_eq!(text.lines().count(), 7);
    assert!(first.contains("n=500 replicas=3"), "{first}");
    assert!(first.contains("rows=6 errors=0"), "{first}");
}

#[test]
fn ingest_export_ingest_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("raw.bin"), b"aba").unwrap();
    let line = stdout_of(&vlmc(
        &[
            "ingest", "--input", "raw.bin", "--mode", "bytes", "--out", "s.txt",
            "--alphabet-out", "ab.txt",
        ],
        d,
    ));
    assert!(line.contains("alphabet=2 symbols=3"), "{line}");
    assert_eq!(std::fs::read_to_string(d.join("s.txt")).unwrap(), "97 98 97\n");
    assert_eq!(std::fs::read_to_string(d.join("ab.txt")).unwrap(), "97\n98\n");
    stdout_of(&vlmc(&["ingest", "--input", "s.txt", "--mode", "tokens", "--out", "s2.txt"], d));
    assert_eq!(
        std::fs::read_to_string(d.join("s2.txt")).unwrap(),
        std::fs::read_to_string(d.join("s.txt")).unwrap()
    );

    std::fs::write(d.join("text.txt"), "abca").unwrap();
    stdout_of(&vlmc(&["ingest", "--input", "text.txt", "--mode", "chars", "--out", "c.txt"], d));
    assert_eq!(std::fs::read_to_string(d.join("c.txt")).unwrap(), "abca\n");
}

#[test]
fn null_estimates_round_trip_as_empty_trees() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stdout_of(&vlmc(
        &["simulate", "--tree", "iid", "--length", "5000", "--seed", "2", "--out", "s.txt"],
        d,
    ));
    let line = stdout_of(&vlmc(
        &[
            "estimate", "--algo", "delta", "--sample", "s.txt", "--tree-out", "null.txt",
            "--delta", "0.9",
        ],
        d,
    ));
    assert!(line.contains("contexts=0"), "{line}");
    assert_eq!(std::fs::read_to_string(d.join("null.txt")).unwrap(), "0 1\n");
    let diff = stdout_of(&vlmc(&["compare", "--tree-a", "null.txt", "--tree-b", "null.txt"], d));
    assert_eq!(diff, "equal=true\n");
}

#[test]
fn exit_codes_separate_usage_preconditions_and_io() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.txt"), "0101\n").unwrap();

    let io = vlmc(&["inspect", "--sample", "absent.txt", "--depth", "2"], d);
    assert_eq!(io.status.code(), Some(2));

    let pre = vlmc(&["inspect", "--sample", "s.txt", "--depth", "0"], d);
    assert_eq!(pre.status.code(), Some(1));

    let mix = vlmc(
        &["estimate", "--algo", "delta", "--sample", "s.txt", "--tree-out", "x", "--c1", "2"],
        d,
    );
    assert_eq!(mix.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&mix.stderr).contains("context algorithms only"));

    let missing = vlmc(&["theory", "--tree", "ref", "--quantity", "dm"], d);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("requires --m"));

    let extraneous =
        vlmc(&["theory", "--tree", "ref", "--quantity", "dm", "--m", "2", "--t", "0.5"], d);
    assert_eq!(extraneous.status.code(), Some(1));

    let usage = vlmc(&["simulate", "--bogus"], d);
    assert_eq!(usage.status.code(), Some(1));

    assert_eq!(vlmc(&["--help"], d).status.code(), Some(0));
    assert_eq!(vlmc(&["--version"], d).status.code(), Some(0));
}
