//! Federated gradient descent ascent with recursive momentum estimators
//! (FGDA), its adaptive-matrix variants (AdaFGDA) and two local-SGDA
//! baselines, written as state transitions over client and server states.
//!
//! Step `t` runs from 1 to `T`. Steps with `t mod q == 0` average client
//! states on the server and broadcast; all other steps are local.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{self, AdaptiveAccumulator, MatrixMode};
use crate::linalg::{mean_of, precondition, vec_mean, Counters, DiagMatrix, Vector};
use crate::metrics::{self, MetricOptions, RunTrace};
use crate::problems::{ProblemInstance, SampleRef};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Fgda,
    AdaFgdaAdam,
    AdaFgdaAdaBelief,
    LocalSgda,
    MomentumLocalSgda,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Fgda,
        Variant::AdaFgdaAdam,
        Variant::AdaFgdaAdaBelief,
        Variant::LocalSgda,
        Variant::MomentumLocalSgda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fgda => "fgda",
            Variant::AdaFgdaAdam => "adafgda-adam",
            Variant::AdaFgdaAdaBelief => "adafgda-adabelief",
            Variant::LocalSgda => "local-sgda",
            Variant::MomentumLocalSgda => "momentum-local-sgda",
        }
    }

    pub fn matrix_mode(self) -> MatrixMode {
        match self {
            Variant::AdaFgdaAdam => MatrixMode::AdamStyle,
            Variant::AdaFgdaAdaBelief => MatrixMode::AdaBeliefStyle,
            _ => MatrixMode::Identity,
        }
    }

    pub fn is_adaptive(self) -> bool {
        self.matrix_mode() != MatrixMode::Identity
    }

    /// Baselines use unit interpolation weight and no recursive correction.
    pub fn is_baseline(self) -> bool {
        matches!(self, Variant::LocalSgda | Variant::MomentumLocalSgda)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adafgda" => Ok(Variant::AdaFgdaAdam),
            _ => Variant::ALL
                .into_iter()
                .find(|v| v.name() == s)
                .ok_or_else(|| Error::Parse(format!("unknown variant `{s}`"))),
        }
    }
}

/// How a client refreshes its gradient estimate after a local step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorRule {
    /// `g(z'; ξ) + (1 - α)(est - g(z; ξ))`
    Storm,
    /// `g(z'; ξ)`
    Fresh,
    /// `β_m est + g(z'; ξ)`
    HeavyBall(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// x step size
    pub gamma: f64,
    /// y step size
    pub lambda: f64,
    pub eta_n: f64,
    /// `None` selects `max(2, K n³)`.
    pub eta_m: Option<f64>,
    /// y-side momentum coefficient
    pub c1: f64,
    /// x-side momentum coefficient
    pub c2: f64,
    pub q: u64,
    pub steps: u64,
    pub rho: f64,
    /// Upper spectral bound of the adaptive matrices, used only by the validator.
    pub rho_u: f64,
    pub varrho: f64,
    /// Use `1 - β_{t+1}` as the accumulator decay instead of `varrho`.
    pub varrho_tied: bool,
    /// Heavy-ball coefficient of the momentum baseline.
    pub momentum_beta: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Constant interpolation weight replacing the schedule.
    pub eta_const: Option<f64>,
    /// Constant estimator momentum replacing the schedule on both sides.
    pub momentum_const: Option<f64>,
    /// Keep the adaptive accumulators at zero.
    pub freeze_accumulators: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma: 0.1,
            lambda: 0.1,
            eta_n: 1.0,
            eta_m: None,
            c1: 10.0,
            c2: 10.0,
            q: 20,
            steps: 4000,
            rho: 0.01,
            rho_u: 1.0,
            varrho: 0.9,
            varrho_tied: false,
            momentum_beta: 0.9,
            variant: Variant::Fgda,
            seed: 0,
            eta_const: None,
            momentum_const: None,
            freeze_accumulators: false,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}

impl HyperParams {
    /// Range checks. Zero step sizes are accepted and freeze that block.
    pub fn validate(&self) -> Result<()> {
        check(self.gamma >= 0.0 && self.gamma.is_finite(), || {
            format!("gamma must be finite and >= 0, got {}", self.gamma)
        })?;
        check(self.lambda >= 0.0 && self.lambda.is_finite(), || {
            format!("lambda must be finite and >= 0, got {}", self.lambda)
        })?;
        check(self.eta_n > 0.0 && self.eta_n.is_finite(), || {
            format!("eta_n must be positive, got {}", self.eta_n)
        })?;
        if let Some(m) = self.eta_m {
            check(m >= 2.0 && m.is_finite(), || format!("eta_m must be >= 2, got {m}"))?;
        }
        check(self.c1 > 0.0 && self.c2 > 0.0, || {
            format!("c1 and c2 must be positive, got {} and {}", self.c1, self.c2)
        })?;
        check(self.q >= 1, || "q must be at least 1".into())?;
        check(self.steps >= 1, || "T must be at least 1".into())?;
        check(self.rho > 0.0 && self.rho <= 1.0, || {
            format!("rho must lie in (0, 1], got {}", self.rho)
        })?;
        check(self.rho_u > 0.0, || {
            format!("rho_u must be positive, got {}", self.rho_u)
        })?;
        check(self.varrho > 0.0 && self.varrho < 1.0, || {
            format!("varrho must lie in (0, 1), got {}", self.varrho)
        })?;
        check((0.0..1.0).contains(&self.momentum_beta), || {
            format!("momentum_beta must lie in [0, 1), got {}", self.momentum_beta)
        })?;
        if let Some(e) = self.eta_const {
            check(e > 0.0 && e <= 1.0, || format!("eta_const must lie in (0, 1], got {e}"))?;
        }
        if let Some(a) = self.momentum_const {
            check(a > 0.0 && a <= 1.0, || {
                format!("momentum_const must lie in (0, 1], got {a}")
            })?;
        }
        Ok(())
    }

    pub fn resolved_eta_m(&self, clients: usize) -> f64 {
        self.eta_m
            .unwrap_or_else(|| (clients as f64 * self.eta_n.powi(3)).max(2.0))
    }

    /// Interpolation weight `η_t`.
    pub fn eta_at(&self, clients: usize, t: u64) -> f64 {
        if let Some(e) = self.eta_const {
            return e;
        }
        if self.variant.is_baseline() {
            return 1.0;
        }
        eta_schedule(self.eta_n, clients, self.resolved_eta_m(clients), t)
    }

    /// `(α_{t+1}, β_{t+1})`, the y-side and x-side estimator momenta.
    pub fn momenta_at(&self, clients: usize, t: u64) -> (f64, f64) {
        if let Some(a) = self.momentum_const {
            return (a, a);
        }
        estimators::momentum_schedule(self.c1, self.c2, self.eta_at(clients, t))
    }

    pub fn estimator_rule(&self) -> EstimatorRule {
        match self.variant {
            Variant::LocalSgda => EstimatorRule::Fresh,
            Variant::MomentumLocalSgda => EstimatorRule::HeavyBall(self.momentum_beta),
            _ => EstimatorRule::Storm,
        }
    }

    pub fn is_sync(&self, t: u64) -> bool {
        t.is_multiple_of(self.q)
    }
}

/// `n K^{1/3} / (m + t)^{1/3}`.
pub fn eta_schedule(n: f64, clients: usize, m: f64, t: u64) -> f64 {
    n * (clients as f64).cbrt() / (m + t as f64).cbrt()
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub index: usize,
    pub x: Vector,
    pub y: Vector,
    /// x-side gradient estimate
    pub w: Vector,
    /// y-side gradient estimate
    pub v: Vector,
    pub rng: Rng,
}

#[derive(Debug, Clone)]
pub struct ServerState {
    pub x_bar: Vector,
    pub y_bar: Vector,
    pub acc: AdaptiveAccumulator,
    pub a: DiagMatrix,
    pub b: DiagMatrix,
}

/// Shared start, per-client estimates from `q` samples drawn without
/// replacement, and the first adaptive matrices.
pub fn init_round(problem: &ProblemInstance, hp: &HyperParams) -> Result<(Vec<ClientState>, ServerState, Counters)> {
    hp.validate()?;
    let k = problem.num_clients();
    let q = hp.q as usize;
    let mut srng = rng::seeded(hp.seed);
    let (x1, y1) = problem.initial_point(&mut srng);
    let y1 = problem.project_y(&y1);
    let mut clients = Vec::with_capacity(k);
    for c in 0..k {
        let mut crng = rng::stream(hp.seed, c as u64 + 1);
        let n = problem.client_len(c);
        if q > n {
            return Err(Error::InvalidArgument(format!(
                "q = {q} exceeds the {n} samples held by client {c}"
            )));
        }
        let mut w = Vector::zeros(problem.dim_x());
        let mut v = Vector::zeros(problem.dim_y());
        for item in index::sample(&mut crng, n, q).into_iter() {
            let g = problem.grad_stoch(c, &x1, &y1, SampleRef { client: c, item })?;
            w.axpy(1.0, &g.gx);
            v.axpy(1.0, &g.gy);
        }
        w.scale(1.0 / q as f64);
        v.scale(1.0 / q as f64);
        clients.push(ClientState {
            index: c,
            x: x1.clone(),
            y: y1.clone(),
            w,
            v,
            rng: crng,
        });
    }
    let w_bar = mean_of(clients.iter().map(|c| &c.w), problem.dim_x());
    let v_bar = mean_of(clients.iter().map(|c| &c.v), problem.dim_y());
    let mut acc = AdaptiveAccumulator::new(
        hp.variant.matrix_mode(),
        problem.dim_x(),
        problem.dim_y(),
        hp.rho,
        hp.varrho,
    )?;
    acc.frozen = hp.freeze_accumulators;
    if hp.varrho_tied {
        acc.varrho = 1.0 - hp.momenta_at(k, 0).1;
    }
    let (a, b) = acc.generate(&w_bar, &v_bar)?;
    let counters = Counters {
        sfo_per_client: 2 * hp.q,
        ..Counters::default()
    };
    Ok((
        clients,
        ServerState {
            x_bar: x1,
            y_bar: y1,
            acc,
            a,
            b,
        },
        counters,
    ))
}

/// `(ŷ, x̂) = (y + λ B⁻¹v, x - γ A⁻¹w)` followed by interpolation with weight `eta`.
#[allow(clippy::too_many_arguments)]
fn gda_move(
    problem: &ProblemInstance,
    hp: &HyperParams,
    eta: f64,
    x: &Vector,
    y: &Vector,
    w: &Vector,
    v: &Vector,
    a: &DiagMatrix,
    b: &DiagMatrix,
) -> Result<(Vector, Vector)> {
    let dy = precondition(b, v)?;
    let y_hat: Vector = y.iter().zip(dy.iter()).map(|(y, d)| y + hp.lambda * d).collect();
    let y_new = problem.project_y(&y.interpolate(&y_hat, eta));
    let dx = precondition(a, w)?;
    let x_hat: Vector = x.iter().zip(dx.iter()).map(|(x, d)| x - hp.gamma * d).collect();
    Ok((x.interpolate(&x_hat, eta), y_new))
}

/// One local step of client `client` at a non-sync index `t`. Returns the
/// stochastic oracle calls consumed.
pub fn local_step(
    problem: &ProblemInstance,
    hp: &HyperParams,
    t: u64,
    client: &mut ClientState,
    a: &DiagMatrix,
    b: &DiagMatrix,
) -> Result<u64> {
    if hp.is_sync(t) {
        return Err(Error::WrongStepKind {
            t: t as usize,
            expected: "sync",
            found: "local",
        });
    }
    let k = problem.num_clients();
    let eta = hp.eta_at(k, t);
    let (x_new, y_new) = gda_move(problem, hp, eta, &client.x, &client.y, &client.w, &client.v, a, b)?;
    let c = client.index;
    let item = client.rng.random_range(0..problem.client_len(c));
    let xi = SampleRef { client: c, item };
    let g_new = problem.grad_stoch(c, &x_new, &y_new, xi)?;
    let (w, v) = match hp.estimator_rule() {
        EstimatorRule::Storm => {
            let (alpha, beta) = hp.momenta_at(k, t);
            let g_old = problem.grad_stoch(c, &client.x, &client.y, xi)?;
            (
                estimators::storm_update(&g_new.gx, &g_old.gx, &client.w, beta)?,
                estimators::storm_update(&g_new.gy, &g_old.gy, &client.v, alpha)?,
            )
        }
        EstimatorRule::Fresh => (g_new.gx, g_new.gy),
        EstimatorRule::HeavyBall(0.0) => (g_new.gx, g_new.gy),
        EstimatorRule::HeavyBall(bm) => {
            let mut w = client.w.scaled(bm);
            w.axpy(1.0, &g_new.gx);
            let mut v = client.v.scaled(bm);
            v.axpy(1.0, &g_new.gy);
            (w, v)
        }
    };
    client.x = x_new;
    client.y = y_new;
    client.w = w;
    client.v = v;
    Ok(2)
}

/// Average, regenerate the adaptive matrices, take the server step and
/// broadcast `(x̄, ȳ, w̄, v̄)` to every client.
pub fn sync_step(
    problem: &ProblemInstance,
    hp: &HyperParams,
    t: u64,
    clients: &mut [ClientState],
    server: &mut ServerState,
    counters: &mut Counters,
) -> Result<()> {
    if !hp.is_sync(t) {
        return Err(Error::WrongStepKind {
            t: t as usize,
            expected: "local",
            found: "sync",
        });
    }
    let k = problem.num_clients();
    let v_bar = vec_mean(&clients.iter().map(|c| c.v.clone()).collect::<Vec<_>>())?;
    let w_bar = vec_mean(&clients.iter().map(|c| c.w.clone()).collect::<Vec<_>>())?;
    let y_bar = vec_mean(&clients.iter().map(|c| c.y.clone()).collect::<Vec<_>>())?;
    let x_bar = vec_mean(&clients.iter().map(|c| c.x.clone()).collect::<Vec<_>>())?;
    if hp.varrho_tied {
        server.acc.varrho = 1.0 - hp.momenta_at(k, t).1;
    }
    let (a, b) = server.acc.generate(&w_bar, &v_bar)?;
    server.a = a;
    server.b = b;
    let eta = hp.eta_at(k, t);
    let (x_new, y_new) = gda_move(problem, hp, eta, &x_bar, &y_bar, &w_bar, &v_bar, &server.a, &server.b)?;
    for c in clients.iter_mut() {
        c.x = x_new.clone();
        c.y = y_new.clone();
        c.w = w_bar.clone();
        c.v = v_bar.clone();
    }
    server.x_bar = x_new;
    server.y_bar = y_new;
    counters.comm_rounds += 1;
    Ok(())
}

/// Full run with default metric options.
pub fn run(problem: &ProblemInstance, hp: &HyperParams) -> Result<RunTrace> {
    run_with(problem, hp, &MetricOptions::default())
}

pub fn run_with(problem: &ProblemInstance, hp: &HyperParams, opts: &MetricOptions) -> Result<RunTrace> {
    let started = Instant::now();
    let (mut clients, mut server, mut counters) = init_round(problem, hp)?;
    let k = problem.num_clients();
    let sampled_index = rng::stream(hp.seed, k as u64 + 1).random_range(1..=hp.steps);
    let mut rec = metrics::Recorder::new(problem, opts, hp.steps as usize);
    rec.record(0, false, &clients, &counters)?;
    let mut sampled = None;
    for t in 1..=hp.steps {
        let sync = hp.is_sync(t);
        if sync {
            sync_step(problem, hp, t, &mut clients, &mut server, &mut counters)?;
        } else {
            let (a, b) = (&server.a, &server.b);
            let used = clients
                .par_iter_mut()
                .map(|c| local_step(problem, hp, t, c, a, b))
                .collect::<Result<Vec<u64>>>()?;
            counters.sfo_per_client += used[0];
            counters.local_steps += 1;
        }
        if !clients
            .iter()
            .all(|c| c.x.is_finite() && c.y.is_finite() && c.w.is_finite() && c.v.is_finite())
        {
            return Err(Error::Diverged(t as usize));
        }
        let (x_bar, y_bar) = rec.record(t, sync, &clients, &counters)?;
        if t == sampled_index {
            sampled = Some((x_bar, y_bar));
        }
    }
    let (sx, sy) = sampled.expect("sampled index lies in 1..=T");
    let echo = format!("{}{}", problem.describe(), hp.describe());
    Ok(rec.finish(echo, sampled_index, sx, sy, counters, started.elapsed().as_secs_f64()))
}

/// Local SGDA with heavy-ball estimate buffers, under the same sync skeleton.
pub fn baseline_momentum_local_sgda(problem: &ProblemInstance, hp: &HyperParams) -> Result<RunTrace> {
    let hp = HyperParams {
        variant: Variant::MomentumLocalSgda,
        ..hp.clone()
    };
    run(problem, &hp)
}

impl HyperParams {
    /// `key = value` lines in the config grammar's algorithm section.
    pub fn describe(&self) -> String {
        let opt = |v: Option<f64>, none: &str| v.map_or(none.to_string(), |x| x.to_string());
        format!(
            "variant = {}\ngamma = {}\nlambda = {}\neta_n = {}\neta_m = {}\nc1 = {}\nc2 = {}\nq = {}\nT = {}\nrho = {}\nrho_u = {}\nvarrho = {}\nvarrho_tied = {}\nmomentum_beta = {}\nseed = {}\neta_const = {}\nmomentum_const = {}\nfreeze_accumulators = {}\n",
            self.variant,
            self.gamma,
            self.lambda,
            self.eta_n,
            opt(self.eta_m, "auto"),
            self.c1,
            self.c2,
            self.q,
            self.steps,
            self.rho,
            self.rho_u,
            self.varrho,
            self.varrho_tied,
            self.momentum_beta,
            self.seed,
            opt(self.eta_const, "none"),
            opt(self.momentum_const, "none"),
            self.freeze_accumulators,
        )
    }
}
