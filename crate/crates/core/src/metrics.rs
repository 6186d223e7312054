//! Per-step measurements, run traces and their CSV form.
//!
//! All measurements use full simulator knowledge: exact client gradients and
//! closed-form saddle points where the problem has them.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::algorithms::ClientState;
use crate::error::{Error, Result};
use crate::linalg::{mean_of, Counters, Vector};
use crate::problems::{self, ProblemInstance, YConstraint};

pub const CSV_HEADER: &str =
    "t,is_sync,dist_x_sq,dist_y_sq,grad_norm_F,est_err_x,est_err_y,consensus_x,objective,auc,sfo,comm";

/// Projected ascent steps used for the robust `||∇F||` approximation.
pub const ROBUST_ASCENT_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub is_sync: bool,
    pub dist_x_sq: Option<f64>,
    pub dist_y_sq: Option<f64>,
    pub grad_norm_f: Option<f64>,
    /// `||w̄ - mean_k ∇_x f^k(x^k, y^k)||`
    pub est_err_x: f64,
    /// `||v̄ - mean_k ∇_y f^k(x^k, y^k)||`
    pub est_err_y: f64,
    /// `max_k ||x^k - x̄||`
    pub consensus_x: f64,
    /// `f(x̄, ȳ)`
    pub objective: f64,
    pub auc: Option<f64>,
    pub sfo: u64,
    pub comm: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Records for `t = 1..=T`.
    pub records: Vec<TraceRecord>,
    /// State right after initialization, `t = 0`. Not part of the CSV.
    pub initial: TraceRecord,
    /// `max_k ||y^k - ȳ||`, one entry per record.
    pub consensus_y: Vec<f64>,
    /// Problem and hyperparameter description of the run.
    pub config_echo: String,
    /// Uniformly drawn output index and the averaged iterate at that index.
    pub final_sampled_index: u64,
    pub sampled_x: Vector,
    pub sampled_y: Vector,
    pub final_x: Vector,
    pub final_y: Vector,
    pub counters: Counters,
    pub wall_time_secs: f64,
}

impl RunTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().unwrap_or(&self.initial)
    }

    /// Hex SHA-256 of the config echo.
    pub fn config_hash(&self) -> String {
        config_hash(&self.config_echo)
    }

    pub fn to_csv(&self) -> String {
        to_csv(&self.records)
    }
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricOptions {
    /// Compute costly measurements (the approximate robust `||∇F||`) at every
    /// step instead of sync steps only.
    pub heavy_every_step: bool,
}

/// A `||∇F(x)||` value and whether it came from an iterative approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradNormF {
    pub value: f64,
    pub approximate: bool,
}

/// Maximizer of `f(x, ·)` over the robust ball by `steps` projected gradient
/// ascent steps from zero, with step `1 / (||w||² / 4)`.
pub fn robust_inner_max(problem: &ProblemInstance, x: &Vector, steps: usize) -> Result<Vector> {
    let r = match problem.y_constraint() {
        YConstraint::EuclideanBall(r) => r,
        YConstraint::Unconstrained => f64::INFINITY,
    };
    let step = 4.0 / x.norm_sq().max(1e-12);
    let mut y = Vector::zeros(problem.dim_y());
    for _ in 0..steps {
        let g = problem.grad_global(x, &y)?.gy;
        y.axpy(step, &g);
        y = problems::project_y(YConstraint::EuclideanBall(r), &y);
    }
    Ok(y)
}

/// `||∇F(x)||` with `F(x) = max_y f(x, y)`: closed form for the synthetic
/// and AUC families, approximate inner maximization for the robust family.
pub fn grad_norm_f(problem: &ProblemInstance, x: &Vector) -> Result<GradNormF> {
    match problem {
        ProblemInstance::Synthetic(p) => Ok(GradNormF {
            value: p.primal_grad(x).norm(),
            approximate: false,
        }),
        ProblemInstance::Auc(p) => {
            let alpha = p.best_response(x);
            Ok(GradNormF {
                value: problem.grad_global(x, &alpha)?.gx.norm(),
                approximate: false,
            })
        }
        ProblemInstance::Robust(_) => {
            let y = robust_inner_max(problem, x, ROBUST_ASCENT_STEPS)?;
            Ok(GradNormF {
                value: problem.grad_global(x, &y)?.gx.norm(),
                approximate: true,
            })
        }
    }
}

/// Pairwise AUC of `scores` against ±1 `labels`; ties count one half.
/// Returns 0.5 when either class is empty.
pub fn auc_from_scores(scores: &[f64], labels: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|l| **l > 0.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    // average 1-based ranks over tie blocks
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] > 0.0 {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64)
}

/// Held-out pairwise AUC of the linear scorer with weights `w` (the leading
/// coordinates of the primal variable).
pub fn auc_score(problem: &ProblemInstance, w: &[f64]) -> Result<f64> {
    let p = problem.as_auc().ok_or(Error::Unsupported {
        problem: problem.kind().name(),
        what: "auc score",
    })?;
    let dim = p.spec().dim;
    if w.len() != dim && w.len() != dim + 2 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: w.len(),
        });
    }
    let scores = p.test_scores(&w[..dim]);
    let labels: Vec<f64> = p.test_set().iter().map(|pt| pt.label).collect();
    Ok(auc_from_scores(&scores, &labels))
}

/// Accumulates records during a run.
pub struct Recorder<'a> {
    problem: &'a ProblemInstance,
    opts: MetricOptions,
    saddle: Option<(Vector, Vector)>,
    records: Vec<TraceRecord>,
    consensus_y: Vec<f64>,
    initial: Option<TraceRecord>,
    last: (Vector, Vector),
}

impl<'a> Recorder<'a> {
    pub fn new(problem: &'a ProblemInstance, opts: &MetricOptions, capacity: usize) -> Self {
        Recorder {
            problem,
            opts: *opts,
            saddle: problem.saddle_point().ok(),
            records: Vec::with_capacity(capacity),
            consensus_y: Vec::with_capacity(capacity),
            initial: None,
            last: (Vector::zeros(problem.dim_x()), Vector::zeros(problem.dim_y())),
        }
    }

    /// Measure the post-step state; `t = 0` is the initial snapshot. Returns
    /// the client averages `(x̄, ȳ)`.
    pub fn record(
        &mut self,
        t: u64,
        is_sync: bool,
        clients: &[ClientState],
        counters: &Counters,
    ) -> Result<(Vector, Vector)> {
        let (rec, cy, x_bar, y_bar) = record_step(
            self.problem,
            &self.opts,
            self.saddle.as_ref(),
            t,
            is_sync,
            clients,
            counters,
        )?;
        if t == 0 {
            self.initial = Some(rec);
        } else {
            self.records.push(rec);
            self.consensus_y.push(cy);
        }
        self.last = (x_bar.clone(), y_bar.clone());
        Ok((x_bar, y_bar))
    }

    pub fn finish(
        self,
        config_echo: String,
        final_sampled_index: u64,
        sampled_x: Vector,
        sampled_y: Vector,
        counters: Counters,
        wall_time_secs: f64,
    ) -> RunTrace {
        RunTrace {
            records: self.records,
            initial: self.initial.expect("initial snapshot recorded"),
            consensus_y: self.consensus_y,
            config_echo,
            final_sampled_index,
            sampled_x,
            sampled_y,
            final_x: self.last.0,
            final_y: self.last.1,
            counters,
            wall_time_secs,
        }
    }
}

/// Measurements of one post-step state. Returns the record, `max_k ||y^k - ȳ||`
/// and the averages `(x̄, ȳ)`.
pub fn record_step(
    problem: &ProblemInstance,
    opts: &MetricOptions,
    saddle: Option<&(Vector, Vector)>,
    t: u64,
    is_sync: bool,
    clients: &[ClientState],
    counters: &Counters,
) -> Result<(TraceRecord, f64, Vector, Vector)> {
    let dx = problem.dim_x();
    let dy = problem.dim_y();
    let x_bar = mean_of(clients.iter().map(|c| &c.x), dx);
    let y_bar = mean_of(clients.iter().map(|c| &c.y), dy);
    let w_bar = mean_of(clients.iter().map(|c| &c.w), dx);
    let v_bar = mean_of(clients.iter().map(|c| &c.v), dy);
    let mut gx = Vector::zeros(dx);
    let mut gy = Vector::zeros(dy);
    for c in clients {
        let g = problem.grad_full(c.index, &c.x, &c.y)?;
        gx.axpy(1.0, &g.gx);
        gy.axpy(1.0, &g.gy);
    }
    let k = clients.len() as f64;
    gx.scale(1.0 / k);
    gy.scale(1.0 / k);
    let consensus_x = clients.iter().map(|c| c.x.dist(&x_bar)).fold(0.0, f64::max);
    let consensus_y = clients.iter().map(|c| c.y.dist(&y_bar)).fold(0.0, f64::max);
    let heavy_due = is_sync || t == 0 || opts.heavy_every_step;
    let grad_norm = match problem {
        ProblemInstance::Robust(_) if !heavy_due => None,
        _ => Some(grad_norm_f(problem, &x_bar)?.value),
    };
    let auc = match problem {
        ProblemInstance::Auc(_) => Some(auc_score(problem, &x_bar)?),
        _ => None,
    };
    let rec = TraceRecord {
        t,
        is_sync,
        dist_x_sq: saddle.map(|(xs, _)| x_bar.dist_sq(xs)),
        dist_y_sq: saddle.map(|(_, ys)| y_bar.dist_sq(ys)),
        grad_norm_f: grad_norm,
        est_err_x: w_bar.dist(&gx),
        est_err_y: v_bar.dist(&gy),
        consensus_x,
        objective: problem.value_global(&x_bar, &y_bar)?,
        auc,
        sfo: counters.sfo_per_client,
        comm: counters.comm_rounds,
    };
    Ok((rec, consensus_y, x_bar, y_bar))
}

fn cell(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        let _ = write!(out, "{v:.16e}");
    }
}

/// CSV text with [`CSV_HEADER`] and one row per record.
pub fn to_csv(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{}", r.t, u8::from(r.is_sync));
        for v in [
            r.dist_x_sq,
            r.dist_y_sq,
            r.grad_norm_f,
            Some(r.est_err_x),
            Some(r.est_err_y),
            Some(r.consensus_x),
            Some(r.objective),
            r.auc,
        ] {
            cell(&mut out, v);
        }
        let _ = writeln!(out, ",{},{}", r.sfo, r.comm);
    }
    out
}

pub fn emit_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    std::fs::write(path, trace.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("csv line {line}: bad number `{s}`")))
}

fn parse_req(s: &str, line: usize, name: &str) -> Result<f64> {
    parse_opt(s, line)?.ok_or_else(|| Error::Parse(format!("csv line {line}: missing {name}")))
}

fn parse_int(s: &str, line: usize) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::Parse(format!("csv line {line}: bad integer `{s}`")))
}

pub fn parse_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(Error::Parse("csv header mismatch".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::Parse(format!(
                "csv line {n}: expected 12 fields, got {}",
                f.len()
            )));
        }
        out.push(TraceRecord {
            t: parse_int(f[0], n)?,
            is_sync: match f[1] {
                "0" => false,
                "1" => true,
                other => return Err(Error::Parse(format!("csv line {n}: bad flag `{other}`"))),
            },
            dist_x_sq: parse_opt(f[2], n)?,
            dist_y_sq: parse_opt(f[3], n)?,
            grad_norm_f: parse_opt(f[4], n)?,
            est_err_x: parse_req(f[5], n, "est_err_x")?,
            est_err_y: parse_req(f[6], n, "est_err_y")?,
            consensus_x: parse_req(f[7], n, "consensus_x")?,
            objective: parse_req(f[8], n, "objective")?,
            auc: parse_opt(f[9], n)?,
            sfo: parse_int(f[10], n)?,
            comm: parse_int(f[11], n)?,
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&text)
}

type SummaryField = (&'static str, fn(&TraceRecord) -> Option<f64>);

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Text summary of runs that share a configuration apart from the seed:
/// per-run final values, counters and wall time, then mean and standard
/// deviation across runs.
pub fn summary(labels: &[String], traces: &[RunTrace]) -> String {
    let mut out = String::new();
    if let Some(first) = traces.first() {
        let _ = writeln!(out, "config_sha256 = {}", first.config_hash());
    }
    let fields: [SummaryField; 6] = [
        ("dist_sq", |r| Some(r.dist_x_sq? + r.dist_y_sq?)),
        ("grad_norm_F", |r| r.grad_norm_f),
        ("est_err_y", |r| Some(r.est_err_y)),
        ("objective", |r| Some(r.objective)),
        ("auc", |r| r.auc),
        ("consensus_x", |r| Some(r.consensus_x)),
    ];
    let _ = write!(out, "{:<24}", "run");
    for (name, _) in &fields {
        let _ = write!(out, " {name:>14}");
    }
    let _ = writeln!(out, " {:>10} {:>8} {:>9}", "sfo", "comm", "wall_s");
    let last_with = |tr: &RunTrace, f: fn(&TraceRecord) -> Option<f64>| tr.records.iter().rev().find_map(f);
    for (label, tr) in labels.iter().zip(traces) {
        let _ = write!(out, "{label:<24}");
        for (_, f) in &fields {
            match last_with(tr, *f) {
                Some(v) => {
                    let _ = write!(out, " {v:>14.6e}");
                }
                None => {
                    let _ = write!(out, " {:>14}", "-");
                }
            }
        }
        let _ = writeln!(
            out,
            " {:>10} {:>8} {:>9.3}",
            tr.counters.sfo_per_client, tr.counters.comm_rounds, tr.wall_time_secs
        );
    }
    if traces.len() > 1 {
        for (stat, pick) in [("mean", 0usize), ("stddev", 1)] {
            let _ = write!(out, "{stat:<24}");
            for (_, f) in &fields {
                let vals: Vec<f64> = traces.iter().filter_map(|tr| last_with(tr, *f)).collect();
                if vals.is_empty() {
                    let _ = write!(out, " {:>14}", "-");
                } else {
                    let ms = mean_std(&vals);
                    let _ = write!(out, " {:>14.6e}", if pick == 0 { ms.0 } else { ms.1 });
                }
            }
            out.push('\n');
        }
    }
    out
}
