//! Subcommand implementations behind the `fedminimax` binary. Each returns
//! a process exit code and writes to the given streams.

use std::fmt;
use std::fs;
use std::io::Write;
use std::str::FromStr;

use crate::algorithms::{run_with, Variant};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{self, RunTrace};
use crate::problems::ProblemInstance;
use crate::theory::{self, ConstraintReport};

const CONSTANT_SAMPLES: usize = 20;
const PL_POINTS: usize = 1000;
const LIPSCHITZ_PAIRS: usize = 1000;
const GRADCHECK_POINTS: usize = 100;
const GRADCHECK_STEP: f64 = 1e-6;
const UNBIASED_POINTS: usize = 3;

pub const PL_TOLERANCE: f64 = -1e-9;
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
pub const UNBIASED_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Pl,
    Lipschitz,
    GradCheck,
    Unbiased,
    Constants,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::Pl,
        Check::Lipschitz,
        Check::GradCheck,
        Check::Unbiased,
        Check::Constants,
    ];
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Pl => "pl",
            Check::Lipschitz => "lipschitz",
            Check::GradCheck => "gradcheck",
            Check::Unbiased => "unbiased",
            Check::Constants => "constants",
        })
    }
}

impl FromStr for Check {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Check::ALL.into_iter().find(|c| c.to_string() == s).ok_or_else(|| {
            Error::Parse(format!(
                "unknown check `{s}` (pl, lipschitz, gradcheck, unbiased, constants)"
            ))
        })
    }
}

/// Parses a comma-separated check list.
pub fn parse_checks(s: &str) -> Result<Vec<Check>> {
    s.split(',').map(|c| c.trim().parse()).collect()
}

fn fail(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    1
}

/// Constraint report for one variant: the identity-matrix system for
/// non-adaptive variants, the adaptive system otherwise.
pub fn theorem_report(cfg: &RunConfig, problem: &ProblemInstance, variant: Variant) -> Result<ConstraintReport> {
    let hp = cfg.hyper_params(variant, cfg.algorithm.seed);
    let c =
        theory::estimate_constants(problem, CONSTANT_SAMPLES, cfg.algorithm.seed)?.with_matrix_bounds(hp.rho, hp.rho_u);
    let k = problem.num_clients();
    Ok(if variant.is_adaptive() {
        theory::validate_theorem1(&hp, &c, k)
    } else {
        theory::validate_theorem2(&hp, &c, k)
    })
}

fn run_all(cfg: &RunConfig, variants: &[Variant], err: &mut dyn Write) -> Result<(Vec<String>, Vec<RunTrace>)> {
    let problem = cfg.problem.build()?;
    fs::create_dir_all(&cfg.output.dir)?;
    let (mut labels, mut traces) = (Vec::new(), Vec::new());
    for &variant in variants {
        let report = theorem_report(cfg, &problem, variant)?;
        if !report.overall() {
            let _ = writeln!(
                err,
                "warning: {variant} hyperparameters violate the convergence constraints: {}",
                report.violated().join(", ")
            );
        }
        for &seed in &cfg.output.seeds {
            let hp = cfg.hyper_params(variant, seed);
            let trace = run_with(&problem, &hp, &cfg.output.metric_options())?;
            let label = format!("{variant}-seed{seed}");
            metrics::emit_csv(&trace, &cfg.output.dir.join(format!("{label}.csv")))?;
            labels.push(label);
            traces.push(trace);
        }
    }
    Ok((labels, traces))
}

/// Runs every configured variant for every seed, writing one CSV per run
/// and `summary.txt` into the output directory.
pub fn command_run(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = run_all(cfg, &cfg.variants, err).and_then(|(labels, traces)| {
        let text = metrics::summary(&labels, &traces);
        fs::write(cfg.output.dir.join("summary.txt"), &text)?;
        Ok(text)
    });
    match result {
        Ok(text) => {
            let _ = write!(out, "{text}");
            0
        }
        Err(e) => fail(err, &e),
    }
}

/// Prints the constraint report of each configured variant; exit 0 iff
/// every constraint holds.
pub fn command_validate(cfg: &RunConfig, kv: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let problem = match cfg.problem.build() {
        Ok(p) => p,
        Err(e) => return fail(err, &e),
    };
    let mut ok = true;
    for &variant in &cfg.variants {
        let report = match theorem_report(cfg, &problem, variant) {
            Ok(r) => r,
            Err(e) => return fail(err, &e),
        };
        let system = if variant.is_adaptive() {
            "adaptive-matrix"
        } else {
            "identity-matrix"
        };
        let _ = writeln!(out, "# {variant} ({system} system)");
        let _ = write!(out, "{}", if kv { report.render_kv() } else { report.render_text() });
        ok &= report.overall();
    }
    i32::from(!ok)
}

/// Runs the selected probes. Probes the problem cannot support are skipped
/// with a warning; exit 0 iff every supported probe passes.
pub fn command_probe(cfg: &RunConfig, checks: &[Check], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let problem = match cfg.problem.build() {
        Ok(p) => p,
        Err(e) => return fail(err, &e),
    };
    let seed = cfg.algorithm.seed;
    let mut ok = true;
    for &check in checks {
        let outcome: Result<(bool, String)> = match check {
            Check::Pl => theory::probe_pl(&problem, PL_POINTS, seed).map(|s| {
                (
                    s >= PL_TOLERANCE,
                    format!("worst slack {s:e} (tolerance {PL_TOLERANCE:e})"),
                )
            }),
            Check::Lipschitz => theory::probe_lipschitz(&problem, LIPSCHITZ_PAIRS, seed).map(|r| {
                (
                    r.passed(),
                    format!(
                        "best-response ratio {:e} <= kappa {:e}; gradient ratio {:e} <= L {:e}",
                        r.best_response_ratio, r.kappa, r.grad_ratio, r.big_l
                    ),
                )
            }),
            Check::GradCheck => theory::grad_check_random(&problem, GRADCHECK_POINTS, GRADCHECK_STEP, seed).map(|e| {
                (
                    e < GRADCHECK_TOLERANCE,
                    format!("max relative error {e:e} (tolerance {GRADCHECK_TOLERANCE:e})"),
                )
            }),
            Check::Unbiased => theory::probe_unbiased(&problem, UNBIASED_POINTS, seed).map(|e| {
                (
                    e <= UNBIASED_TOLERANCE,
                    format!("max deviation {e:e} (tolerance {UNBIASED_TOLERANCE:e})"),
                )
            }),
            Check::Constants => theory::estimate_constants(&problem, CONSTANT_SAMPLES, seed)
                .map(|c| (true, format!("\n{}", c.render().trim_end()))),
        };
        match outcome {
            Ok((passed, detail)) => {
                ok &= passed;
                let _ = writeln!(out, "{check}: {} {detail}", if passed { "pass" } else { "FAIL" });
            }
            Err(e @ Error::Unsupported { .. }) => {
                let _ = writeln!(err, "warning: skipping {check}: {e}");
                let _ = writeln!(out, "{check}: skipped");
            }
            Err(e) => return fail(err, &e),
        }
    }
    i32::from(!ok)
}

/// Runs every variant over the configured seeds and prints one table of
/// per-variant means of the final metrics.
pub fn command_bench(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (labels, traces) = match run_all(cfg, &Variant::ALL, err) {
        Ok(r) => r,
        Err(e) => return fail(err, &e),
    };
    let table = bench_table(&labels, &traces, cfg.output.seeds.len());
    if let Err(e) = fs::write(cfg.output.dir.join("bench.txt"), &table) {
        return fail(err, &e.into());
    }
    let _ = write!(out, "{table}");
    0
}

fn bench_table(labels: &[String], traces: &[RunTrace], per_variant: usize) -> String {
    let mean = |vals: Vec<f64>| -> String {
        if vals.is_empty() {
            "-".into()
        } else {
            format!("{:.6e}", vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let mut s = format!(
        "config_sha256 = {}\n{:<22} {:>14} {:>14} {:>14} {:>14} {:>10} {:>8} {:>9}\n",
        traces.first().map(RunTrace::config_hash).unwrap_or_default(),
        "variant",
        "dist_sq",
        "grad_norm_F",
        "est_err_y",
        "auc",
        "sfo",
        "comm",
        "wall_s"
    );
    for (chunk, names) in traces.chunks(per_variant.max(1)).zip(labels.chunks(per_variant.max(1))) {
        let variant = names[0].rsplit_once("-seed").map_or(names[0].as_str(), |p| p.0);
        let last = |f: fn(&metrics::TraceRecord) -> Option<f64>| -> Vec<f64> {
            chunk
                .iter()
                .filter_map(|t| t.records.iter().rev().find_map(f))
                .collect()
        };
        s.push_str(&format!(
            "{:<22} {:>14} {:>14} {:>14} {:>14} {:>10} {:>8} {:>9.3}\n",
            variant,
            mean(last(|r| Some(r.dist_x_sq? + r.dist_y_sq?))),
            mean(last(|r| r.grad_norm_f)),
            mean(last(|r| Some(r.est_err_y))),
            mean(last(|r| r.auc)),
            chunk[0].counters.sfo_per_client,
            chunk[0].counters.comm_rounds,
            chunk.iter().map(|t| t.wall_time_secs).sum::<f64>() / chunk.len() as f64,
        ));
    }
    s
}
