//! Hyperparameter constraint systems of the convergence theorems and
//! numeric probes of the smoothness, concavity and variance assumptions.

use std::fmt::Write as _;

use crate::algorithms::HyperParams;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problems::{ProblemInstance, Provenance, SampleRef};
use crate::rng;

/// Inflation applied to sampled constants before validation.
pub const SAFETY_MARGIN: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenances {
    pub l_f: Provenance,
    pub mu: Provenance,
    pub sigma: Provenance,
    pub delta_x: Provenance,
    pub delta_y: Provenance,
}

/// Problem constants plus the spectral bounds `ρ I ⪯ A_t ⪯ ρ_u I` of the
/// adaptive matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSet {
    pub l_f: f64,
    pub mu: f64,
    pub sigma: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub rho: f64,
    pub rho_u: f64,
    pub provenance: Provenances,
}

impl ConstantSet {
    /// All fields analytic.
    pub fn analytic(l_f: f64, mu: f64, sigma: f64, delta_x: f64, delta_y: f64, rho: f64, rho_u: f64) -> Result<Self> {
        let c = ConstantSet {
            l_f,
            mu,
            sigma,
            delta_x,
            delta_y,
            rho,
            rho_u,
            provenance: Provenances {
                l_f: Provenance::Analytic,
                mu: Provenance::Analytic,
                sigma: Provenance::Analytic,
                delta_x: Provenance::Analytic,
                delta_y: Provenance::Analytic,
            },
        };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.l_f >= self.mu) {
            return Err(Error::InvalidArgument(format!(
                "constants need L_f >= mu > 0 (got L_f={}, mu={})",
                self.l_f, self.mu
            )));
        }
        if !(self.sigma >= 0.0 && self.delta_x >= 0.0 && self.delta_y >= 0.0) {
            return Err(Error::InvalidArgument("sigma and delta bounds must be >= 0".into()));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.l_f / self.mu
    }

    /// Smoothness of `F(x) = max_y f(x, y)`: `L_f (1 + L_f / mu)`.
    pub fn big_l(&self) -> f64 {
        self.l_f * (1.0 + self.l_f / self.mu)
    }

    pub fn with_matrix_bounds(mut self, rho: f64, rho_u: f64) -> Self {
        self.rho = rho;
        self.rho_u = rho_u;
        self
    }

    /// Sampled fields inflated by [`SAFETY_MARGIN`] (`mu` deflated).
    pub fn for_validator(&self) -> ConstantSet {
        let up = |v: f64, p: Provenance| {
            if p == Provenance::Estimated {
                v * SAFETY_MARGIN
            } else {
                v
            }
        };
        let pr = self.provenance;
        let mut c = *self;
        c.l_f = up(self.l_f, pr.l_f);
        c.sigma = up(self.sigma, pr.sigma);
        c.delta_x = up(self.delta_x, pr.delta_x);
        c.delta_y = up(self.delta_y, pr.delta_y);
        if pr.mu == Provenance::Estimated {
            c.mu = self.mu / SAFETY_MARGIN;
        }
        c.l_f = c.l_f.max(c.mu);
        c
    }

    /// `key = value (provenance)` lines.
    pub fn render(&self) -> String {
        let p = self.provenance;
        format!(
            "L_f = {} ({})\nmu = {} ({})\nsigma = {} ({})\ndelta_x = {} ({})\ndelta_y = {} ({})\nkappa = {}\nL = {}\nrho = {}\nrho_u = {}\n",
            self.l_f,
            p.l_f,
            self.mu,
            p.mu,
            self.sigma,
            p.sigma,
            self.delta_x,
            p.delta_x,
            self.delta_y,
            p.delta_y,
            self.kappa(),
            self.big_l(),
            self.rho,
            self.rho_u
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: &'static str,
    /// The constrained quantity.
    pub lhs: f64,
    /// The bound it is compared against.
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub constraints: Vec<Constraint>,
}

impl ConstraintReport {
    pub fn overall(&self) -> bool {
        self.constraints.iter().all(|c| c.satisfied)
    }

    pub fn get(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn violated(&self) -> Vec<&'static str> {
        self.constraints
            .iter()
            .filter(|c| !c.satisfied)
            .map(|c| c.name)
            .collect()
    }

    /// Aligned table.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>6} {:>24} {:>24}", "constraint", "ok", "value", "bound");
        for c in &self.constraints {
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>24.12e} {:>24.12e}",
                c.name,
                if c.satisfied { "yes" } else { "NO" },
                c.lhs,
                c.rhs
            );
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.overall() { "satisfied" } else { "violated" }
        );
        out
    }

    /// `name=satisfied|lhs|rhs` lines.
    pub fn render_kv(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            let _ = writeln!(out, "{}={}|{:e}|{:e}", c.name, c.satisfied, c.lhs, c.rhs);
        }
        let _ = writeln!(out, "overall={}", self.overall());
        out
    }
}

/// Names of the ten constraints, in report order.
pub const CONSTRAINT_NAMES: [&str; 10] = [
    "m_lower",
    "c_sq_upper",
    "c1_lower",
    "c2_lower",
    "tau_upper",
    "gamma_upper",
    "lambda_upper",
    "rho_range",
    "rho_u_range",
    "n_positive",
];

fn entry(name: &'static str, lhs: f64, rhs: f64, satisfied: bool) -> Constraint {
    Constraint {
        name,
        lhs,
        rhs,
        satisfied,
    }
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `Λ = 1/16 + L_f² ρ_u / (4 μ²) + 16 λ² L_f² / (K ρ²)`.
pub fn lambda_aux(hp: &HyperParams, c: &ConstantSet, clients: usize) -> f64 {
    let k = clients as f64;
    1.0 / 16.0
        + c.l_f.powi(2) * c.rho_u / (4.0 * c.mu.powi(2))
        + 16.0 * hp.lambda.powi(2) * c.l_f.powi(2) / (k * c.rho.powi(2))
}

/// The adaptive-matrix constraint system. `ρ` and `ρ_u` come from `c`; the
/// lower end of `rho_u_range` is the standing requirement `ρ_u >= ρ`.
pub fn validate_theorem1(hp: &HyperParams, c: &ConstantSet, clients: usize) -> ConstraintReport {
    let c = c.for_validator();
    let k = clients as f64;
    let n = hp.eta_n;
    let m = hp.resolved_eta_m(clients);
    let (lam, gam, q) = (hp.lambda, hp.gamma, hp.q as f64);
    let (lf, mu, rho, rho_u) = (c.l_f, c.mu, c.rho, c.rho_u);
    let big_l = c.big_l();
    let s2 = 2f64.sqrt();

    let m_rhs = max_of(&[
        2.0,
        n.powi(3),
        (hp.c1 * n).powi(3) * k,
        (hp.c2 * n).powi(3) * k,
        k * (12.0 * s2 * n * lam * q * lf).powi(3) / rho.powi(3),
    ]);
    let csq = hp.c1.powi(2) + hp.c2.powi(2);
    let csq_rhs = 12f64.powi(4) * lam.powi(4) * q.powi(2) * lf.powi(2) / rho.powi(4);
    let base = 2.0 / (3.0 * n.powi(3) * k);
    let c1_rhs = base + 9.0 * rho_u * lf.powi(2) / (2.0 * mu.powi(2) * rho);
    let c2_rhs = base + 4.5;
    let tau = lam / gam;
    let tau_rhs = ((5.0 * k).sqrt() / (4.0 * (2.0 * lambda_aux(hp, &c, clients)).sqrt())).min(1.0);
    let gamma_rhs = min_of(&[
        m.cbrt() * rho / (4.0 * big_l * n),
        lam * mu / (16.0 * rho_u * big_l),
        rho * mu / (16.0 * rho_u * lf.powi(2)),
        2.0 * lam * mu.powi(2) * rho / (27.0 * lf.powi(2) * rho_u),
        k.sqrt() * rho / (8.0 * 3f64.sqrt() * lf),
    ]);
    let lambda_rhs = min_of(&[
        m.cbrt() / (4.0 * lf * n * rho_u),
        3.0 * (5.0 * k).sqrt() / (32.0 * s2 * mu),
    ]);
    let rho_u_rhs = 135.0 / (64.0 * rho.powi(2));

    ConstraintReport {
        constraints: vec![
            entry("m_lower", m, m_rhs, m >= m_rhs),
            entry("c_sq_upper", csq, csq_rhs, csq <= csq_rhs),
            entry("c1_lower", hp.c1, c1_rhs, hp.c1 >= c1_rhs),
            entry("c2_lower", hp.c2, c2_rhs, hp.c2 >= c2_rhs),
            entry("tau_upper", tau, tau_rhs, gam > 0.0 && tau <= tau_rhs),
            entry("gamma_upper", gam, gamma_rhs, gam > 0.0 && gam <= gamma_rhs),
            entry("lambda_upper", lam, lambda_rhs, lam > 0.0 && lam <= lambda_rhs),
            entry("rho_range", rho, 1.0, rho > 0.0 && rho <= 1.0),
            entry("rho_u_range", rho_u, rho_u_rhs, rho_u >= rho && rho_u <= rho_u_rhs),
            entry("n_positive", n, 0.0, n > 0.0),
        ],
    }
}

/// The identity-matrix system: the adaptive system at `ρ = ρ_u = 1`.
pub fn validate_theorem2(hp: &HyperParams, c: &ConstantSet, clients: usize) -> ConstraintReport {
    validate_theorem1(hp, &c.with_matrix_bounds(1.0, 1.0), clients)
}

/// Value of the bound constant `G` for display only. `primal_gap` is
/// `F(x̄_1) - F*`, `inner_gap` is `F(x̄_1) - f(x̄_1, ȳ_1)`.
pub fn informational_g(hp: &HyperParams, c: &ConstantSet, clients: usize, primal_gap: f64, inner_gap: f64) -> f64 {
    let k = clients as f64;
    let n = hp.eta_n;
    let m = hp.resolved_eta_m(clients);
    let (lam, gam, q) = (hp.lambda, hp.gamma, hp.q as f64);
    let (lf, mu, rho, rho_u, s2) = (c.l_f, c.mu, c.rho, c.rho_u, c.sigma.powi(2));
    let csq = hp.c1.powi(2) + hp.c2.powi(2);
    let delta = csq * s2 + 3.0 * hp.c2.powi(2) * c.delta_x.powi(2) + 3.0 * hp.c1.powi(2) * c.delta_y.powi(2);
    let big_lambda = lambda_aux(hp, c, clients);
    4.0 * primal_gap / (rho * gam * n)
        + 36.0 * rho_u * lf.powi(2) / (rho * lam * mu.powi(2) * n) * inner_gap
        + 8.0 * m.cbrt() * s2 / (q * k.powf(4.0 / 3.0) * n.powi(2) * rho)
        + 8.0
            * k
            * n.powi(2)
            * (csq * s2 / (rho.powi(2) * k) + big_lambda * delta / (15.0 * k * lam.powi(2) * lf.powi(2)))
            * (m + hp.steps as f64).ln()
}

fn sample_point(problem: &ProblemInstance, r: &mut rng::Rng, scale: f64) -> (Vector, Vector) {
    let x = rng::normal_vector(r, problem.dim_x(), scale);
    let y = problem.project_y(&rng::normal_vector(r, problem.dim_y(), scale));
    (x, y)
}

/// Worst slack of `||∇_y f(x, y')||² >= 2μ (max_y f(x, y) - f(x, y'))` over
/// `n_points` random pairs, using the problem's `mu`.
pub fn probe_pl(problem: &ProblemInstance, n_points: usize, seed: u64) -> Result<f64> {
    probe_pl_with_mu(problem, problem.known_constants().mu.value, n_points, seed)
}

/// [`probe_pl`] with an explicit `mu`.
pub fn probe_pl_with_mu(problem: &ProblemInstance, mu: f64, n_points: usize, seed: u64) -> Result<f64> {
    if problem.best_response(&Vector::zeros(problem.dim_x())).is_none() {
        return Err(Error::Unsupported {
            problem: problem.kind().name(),
            what: "closed-form inner maximum",
        });
    }
    let mut r = rng::seeded(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..n_points {
        let (x, y) = sample_point(problem, &mut r, 1.0);
        worst = worst.min(pl_slack(problem, mu, &x, &y)?);
    }
    Ok(worst)
}

/// `||∇_y f(x, y)||² - 2μ (f(x, y*(x)) - f(x, y))`.
pub fn pl_slack(problem: &ProblemInstance, mu: f64, x: &Vector, y: &Vector) -> Result<f64> {
    let star = problem.best_response(x).ok_or(Error::Unsupported {
        problem: problem.kind().name(),
        what: "closed-form inner maximum",
    })?;
    let g = problem.grad_global(x, y)?.gy.norm_sq();
    let gap = problem.value_global(x, &star)? - problem.value_global(x, y)?;
    Ok(g - 2.0 * mu * gap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    /// `max ||y*(x1) - y*(x2)|| / ||x1 - x2||`
    pub best_response_ratio: f64,
    /// `max ||∇F(x1) - ∇F(x2)|| / ||x1 - x2||`
    pub grad_ratio: f64,
    pub kappa: f64,
    pub big_l: f64,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.best_response_ratio <= self.kappa && self.grad_ratio <= self.big_l
    }
}

/// Observed Lipschitz ratios of `y*(x)` and `∇F(x)` over random pairs,
/// against `κ = L_f/μ` and `L = L_f(1 + κ)` from the problem's constants.
pub fn probe_lipschitz(problem: &ProblemInstance, n_pairs: usize, seed: u64) -> Result<LipschitzReport> {
    let kc = problem.known_constants();
    let (Some(l_f), true) = (kc.l_f, problem.best_response(&Vector::zeros(problem.dim_x())).is_some()) else {
        return Err(Error::Unsupported {
            problem: problem.kind().name(),
            what: "closed-form best response and primal gradient",
        });
    };
    let mu = kc.mu.value;
    let grad_f = |x: &Vector| -> Result<Vector> {
        let y = problem.best_response(x).expect("checked above");
        Ok(problem.grad_global(x, &y)?.gx)
    };
    let mut r = rng::seeded(seed);
    let (mut ry, mut rg) = (0.0_f64, 0.0_f64);
    for _ in 0..n_pairs {
        let x1 = rng::normal_vector(&mut r, problem.dim_x(), 1.0);
        let x2 = rng::normal_vector(&mut r, problem.dim_x(), 1.0);
        let d = x1.dist(&x2);
        if d == 0.0 {
            continue;
        }
        let y1 = problem.best_response(&x1).expect("checked above");
        let y2 = problem.best_response(&x2).expect("checked above");
        ry = ry.max(y1.dist(&y2) / d);
        rg = rg.max(grad_f(&x1)?.dist(&grad_f(&x2)?) / d);
    }
    Ok(LipschitzReport {
        best_response_ratio: ry,
        grad_ratio: rg,
        kappa: l_f / mu,
        big_l: l_f * (1.0 + l_f / mu),
    })
}

/// Relative error `||fd - g|| / max(||g||, ||fd||, 1e-12)` of the exact
/// gradient of `f^k` at `(x, y)` against central finite differences with step `h`.
pub fn grad_check(problem: &ProblemInstance, k: usize, x: &Vector, y: &Vector, h: f64) -> Result<f64> {
    if !(h > 1e-8 && h < 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must lie in (1e-8, 1e-3), got {h}"
        )));
    }
    let g = problem.grad_full(k, x, y)?;
    let exact = g.gx.concat(&g.gy);
    let mut fd = Vec::with_capacity(exact.dim());
    for i in 0..x.dim() {
        let e = Vector::basis(x.dim(), i).scaled(h);
        fd.push((problem.value(k, &x.add(&e), y)? - problem.value(k, &x.sub(&e), y)?) / (2.0 * h));
    }
    for i in 0..y.dim() {
        let e = Vector::basis(y.dim(), i).scaled(h);
        fd.push((problem.value(k, x, &y.add(&e))? - problem.value(k, x, &y.sub(&e))?) / (2.0 * h));
    }
    let fd = Vector::new(fd);
    Ok(fd.dist(&exact) / exact.norm().max(fd.norm()).max(1e-12))
}

/// Largest relative error of [`grad_check`] over `n_points` random points and clients.
pub fn grad_check_random(problem: &ProblemInstance, n_points: usize, h: f64, seed: u64) -> Result<f64> {
    use rand::Rng as _;
    let mut r = rng::seeded(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n_points {
        let k = r.random_range(0..problem.num_clients());
        let (x, y) = sample_point(problem, &mut r, 1.0);
        worst = worst.max(grad_check(problem, k, &x, &y, h)?);
    }
    Ok(worst)
}

/// Largest deviation between the mean of the stochastic oracle over a
/// client's dataset and the exact client gradient, over random points.
pub fn probe_unbiased(problem: &ProblemInstance, n_points: usize, seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let mut worst = 0.0_f64;
    for _ in 0..n_points {
        let (x, y) = sample_point(problem, &mut r, 1.0);
        for k in 0..problem.num_clients() {
            let n = problem.client_len(k);
            let mut sx = Vector::zeros(problem.dim_x());
            let mut sy = Vector::zeros(problem.dim_y());
            for item in 0..n {
                let g = problem.grad_stoch(k, &x, &y, SampleRef { client: k, item })?;
                sx.axpy(1.0, &g.gx);
                sy.axpy(1.0, &g.gy);
            }
            sx.scale(1.0 / n as f64);
            sy.scale(1.0 / n as f64);
            let full = problem.grad_full(k, &x, &y)?;
            worst = worst.max(sx.dist(&full.gx)).max(sy.dist(&full.gy));
        }
    }
    Ok(worst)
}

/// Analytic constants where the problem knows them, otherwise maxima over
/// `n_samples` random points. `ρ` and `ρ_u` are set to 1.
pub fn estimate_constants(problem: &ProblemInstance, n_samples: usize, seed: u64) -> Result<ConstantSet> {
    let kc = problem.known_constants();
    let mut r = rng::seeded(seed);
    let kk = problem.num_clients();
    let (mut sigma_sq, mut dx, mut dy, mut lf) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..n_samples.max(1) {
        let (x, y) = sample_point(problem, &mut r, 1.0);
        let fulls = (0..kk)
            .map(|k| problem.grad_full(k, &x, &y))
            .collect::<Result<Vec<_>>>()?;
        for (k, full) in fulls.iter().enumerate() {
            if kc.sigma.is_none() {
                let n = problem.client_len(k);
                let mut acc = 0.0;
                for item in 0..n {
                    let g = problem.grad_stoch(k, &x, &y, SampleRef { client: k, item })?;
                    acc += g.gx.dist_sq(&full.gx) + g.gy.dist_sq(&full.gy);
                }
                sigma_sq = sigma_sq.max(acc / n as f64);
            }
            for other in &fulls[k + 1..] {
                dx = dx.max(full.gx.dist(&other.gx));
                dy = dy.max(full.gy.dist(&other.gy));
            }
        }
        if kc.l_f.is_none() {
            let (x2, y2) = sample_point(problem, &mut r, 1.0);
            let dz = x.concat(&y).dist(&x2.concat(&y2));
            if dz > 0.0 {
                for (k, full) in fulls.iter().enumerate() {
                    let g2 = problem.grad_full(k, &x2, &y2)?;
                    lf = lf.max(full.gx.concat(&full.gy).dist(&g2.gx.concat(&g2.gy)) / dz);
                }
            }
        }
    }
    let mu = kc.mu.value;
    let (l_f, l_prov) = match kc.l_f {
        Some(v) => (v, Provenance::Analytic),
        None => (lf.max(mu), Provenance::Estimated),
    };
    let (sigma, s_prov) = match kc.sigma {
        Some(v) => (v, Provenance::Analytic),
        None => (sigma_sq.sqrt(), Provenance::Estimated),
    };
    let c = ConstantSet {
        l_f,
        mu,
        sigma,
        delta_x: dx,
        delta_y: dy,
        rho: 1.0,
        rho_u: 1.0,
        provenance: Provenances {
            l_f: l_prov,
            mu: kc.mu.provenance,
            sigma: s_prov,
            delta_x: Provenance::Estimated,
            delta_y: Provenance::Estimated,
        },
    };
    c.check()?;
    Ok(c)
}
