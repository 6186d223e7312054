use std::fs;
use std::process::Command;

use fedminimax::cli::*;
use fedminimax::config::{parse_config_with_overrides, preset_text, RunConfig};
use fedminimax::metrics::read_csv;

fn cfg(preset: &str, overrides: &[(&str, &str)]) -> RunConfig {
    let ov: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    parse_config_with_overrides(preset_text(preset).unwrap(), &ov).unwrap()
}

fn capture(f: impl FnOnce(&mut Vec<u8>, &mut Vec<u8>) -> i32) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = f(&mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn run_writes_one_csv_per_seed_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let c = cfg(
        "synthetic-s1",
        &[("algorithm.T", "100"), ("algorithm.variant", "fgda"), ("output.dir", d)],
    );
    let (code, out, err) = capture(|o, e| command_run(&c, o, e));
    assert_eq!(code, 0, "{err}");
    for seed in 0..3 {
        let recs = read_csv(&dir.path().join(format!("fgda-seed{seed}.csv"))).unwrap();
        assert_eq!(recs.len(), 100);
    }
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary, out);
    assert!(summary.starts_with("config_sha256 = "));
    assert!(err.contains("warning: fgda"), "constraint warnings expected: {err}");
}

#[test]
fn auc_preset_runs_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let c = cfg(
        "auc-imbalanced",
        &[("algorithm.T", "40"), ("output.seeds", "1"), ("output.dir", d)],
    );
    let (code, out, _) = capture(|o, e| command_run(&c, o, e));
    assert_eq!(code, 0);
    for v in ["local-sgda", "momentum-local-sgda", "fgda", "adafgda-adam"] {
        assert!(dir.path().join(format!("{v}-seed1.csv")).exists(), "{v}");
        assert!(out.contains(&format!("{v}-seed1")));
    }
}

#[test]
fn run_reports_inner_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    // q larger than each client's dataset
    let c = cfg("synthetic-s1", &[("algorithm.q", "1000"), ("output.dir", d)]);
    let (code, _, err) = capture(|o, e| command_run(&c, o, e));
    assert_ne!(code, 0);
    assert!(err.contains("error:"));
}

#[test]
fn validate_flags_huge_gamma() {
    let c = cfg(
        "synthetic-s1",
        &[("algorithm.gamma", "1e9"), ("algorithm.variant", "fgda")],
    );
    let (code, out, _) = capture(|o, e| command_validate(&c, true, o, e));
    assert_eq!(code, 1);
    assert!(out.contains("identity-matrix"));
    assert!(out.lines().any(|l| l.starts_with("gamma_upper=false|")), "{out}");
}

#[test]
fn validate_exit_code_follows_report() {
    let c = cfg("synthetic-theory", &[]);
    let report = theorem_report(&c, &c.problem.build().unwrap(), c.variants[0]).unwrap();
    let (code, out, _) = capture(|o, e| command_validate(&c, false, o, e));
    assert_eq!(code == 0, report.overall());
    assert!(out.contains("adaptive-matrix"));
    assert_eq!(
        out.lines().filter(|l| l.contains("yes") || l.contains(" NO ")).count(),
        10
    );
}

#[test]
fn probe_synthetic_pl_and_lipschitz() {
    let c = cfg("synthetic-s1", &[]);
    let (code, out, err) = capture(|o, e| command_probe(&c, &[Check::Pl, Check::Lipschitz], o, e));
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("pl: pass") && out.contains("lipschitz: pass"));
}

#[test]
fn probe_skips_unsupported_checks() {
    let c = cfg("robust-q6", &[]);
    let (code, out, err) = capture(|o, e| command_probe(&c, &[Check::Pl], o, e));
    assert_eq!(code, 0);
    assert!(out.contains("pl: skipped"));
    assert!(err.contains("warning: skipping pl"));
}

#[test]
fn gradcheck_passes_on_all_problems() {
    for p in ["synthetic-s1", "auc-imbalanced", "robust-q12"] {
        let c = cfg(p, &[]);
        let (code, out, _) = capture(|o, e| command_probe(&c, &[Check::GradCheck, Check::Unbiased], o, e));
        assert_eq!(code, 0, "{p}: {out}");
    }
}

#[test]
fn check_list_parsing() {
    assert_eq!(
        parse_checks("pl, gradcheck").unwrap(),
        vec![Check::Pl, Check::GradCheck]
    );
    assert!(parse_checks("pl,foo").is_err());
    for c in Check::ALL {
        assert_eq!(c.to_string().parse::<Check>().unwrap(), c);
    }
}

#[test]
fn bench_table_has_a_row_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let c = cfg(
        "synthetic-s1",
        &[("algorithm.T", "60"), ("output.seeds", "0, 1"), ("output.dir", d)],
    );
    let (code, out, _) = capture(|o, e| command_bench(&c, o, e));
    assert_eq!(code, 0);
    for v in fedminimax::algorithms::Variant::ALL {
        assert_eq!(
            out.lines()
                .filter(|l| l.split_whitespace().next() == Some(v.name()))
                .count(),
            1,
            "{v}"
        );
    }
    assert_eq!(fs::read_to_string(dir.path().join("bench.txt")).unwrap(), out);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedminimax"))
}

#[test]
fn binary_dotted_overrides() {
    let out = bin()
        .args([
            "show",
            "--preset",
            "synthetic-s1",
            "--algorithm.gamma",
            "0.05",
            "--problem.clients=4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("gamma = 0.05\n") && text.contains("clients = 4\n"),
        "{text}"
    );
}

#[test]
fn binary_invalid_config_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "[algorithm]\nq = 5\nq = 6\n").unwrap();
    let out = bin()
        .args(["run", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");

    let out = bin()
        .args(["validate", "--preset", "synthetic-s1", "--algorithm.nonsense", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("nonsense"));
}

#[test]
fn binary_validate_and_probe_exit_codes() {
    let out = bin()
        .args([
            "validate",
            "--preset",
            "synthetic-s1",
            "--algorithm.gamma",
            "1e9",
            "--kv",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .args(["probe", "--preset", "synthetic-s1", "--checks", "pl,lipschitz"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = bin().args(["presets"]).output().unwrap();
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .any(|l| l == "synthetic-theory"));
}
