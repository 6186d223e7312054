//! Quadratic saddle problem with heterogeneous linear terms:
//!
//! `f^k(x, y) = (τ/2)||x||² - [ (1/2)||y||² - b_kᵀy + yᵀA_k x ]`, `A_k = t_k I`,
//!
//! with `b_k` drawn from `N(0, s² I)` and re-centered to sum to zero, and
//! `t_k ~ U(0, 0.1)`. The stochastic oracle adds a pre-drawn, per-client
//! centered Gaussian noise realization to the exact gradient.

use rand::Rng as _;

use super::{Constant, GradPair, KnownConstants};
use crate::linalg::Vector;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub clients: usize,
    pub dim: usize,
    /// Scale of the linear terms; larger means more heterogeneous clients.
    pub s: f64,
    pub tau: f64,
    /// Standard deviation of the additive gradient noise.
    pub noise_sigma: f64,
    /// Noise realizations per client (the finite dataset).
    pub samples_per_client: usize,
    pub seed: u64,
    /// Subtract the mean of the raw `b_k`. Off only in tests that need a
    /// nonzero saddle.
    pub recenter: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            clients: 10,
            dim: 20,
            s: 1.0,
            tau: 10.0,
            noise_sigma: 0.0,
            samples_per_client: 100,
            seed: 0,
            recenter: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    spec: SyntheticSpec,
    b: Vec<Vector>,
    t: Vec<f64>,
    b_mean: Vector,
    t_mean: f64,
    /// `noise[k][i] = (noise on ∇_x, noise on ∇_y)`
    noise: Vec<Vec<(Vector, Vector)>>,
}

/// Build the synthetic instance with default noise settings (noise-free oracle).
pub fn make_synthetic(
    clients: usize,
    dim: usize,
    s: f64,
    tau: f64,
    seed: u64,
) -> crate::Result<super::ProblemInstance> {
    SyntheticSpec {
        clients,
        dim,
        s,
        tau,
        seed,
        ..SyntheticSpec::default()
    }
    .build()
}

impl SyntheticSpec {
    pub fn build(self) -> crate::Result<super::ProblemInstance> {
        use crate::error::Error;
        if self.clients == 0 || self.dim == 0 || self.samples_per_client == 0 {
            return Err(Error::InvalidArgument(
                "synthetic problem needs clients, dim and samples_per_client >= 1".into(),
            ));
        }
        if !(self.s > 0.0) || !(self.tau > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "synthetic problem needs s > 0, tau > 0, noise_sigma >= 0 (got s={}, tau={}, noise_sigma={})",
                self.s, self.tau, self.noise_sigma
            )));
        }
        let k = self.clients;
        let mut rng = rng::seeded(self.seed);
        let mut b = Vec::with_capacity(k);
        let mut t = Vec::with_capacity(k);
        for _ in 0..k {
            b.push(rng::normal_vector(&mut rng, self.dim, self.s));
            t.push(rng.random::<f64>() * 0.1);
        }
        if self.recenter {
            let mean = crate::linalg::vec_mean(&b)?;
            for bk in b.iter_mut().take(k - 1) {
                *bk = bk.sub(&mean);
            }
            // close the sum exactly under client-order summation
            let mut partial = Vector::zeros(self.dim);
            for bk in &b[..k - 1] {
                partial.axpy(1.0, bk);
            }
            b[k - 1] = partial.scaled(-1.0);
        }
        let mut noise = Vec::with_capacity(k);
        for _ in 0..k {
            let mut table: Vec<(Vector, Vector)> = (0..self.samples_per_client)
                .map(|_| {
                    (
                        rng::normal_vector(&mut rng, self.dim, self.noise_sigma),
                        rng::normal_vector(&mut rng, self.dim, self.noise_sigma),
                    )
                })
                .collect();
            let n = table.len() as f64;
            let mut mx = Vector::zeros(self.dim);
            let mut my = Vector::zeros(self.dim);
            for (nx, ny) in &table {
                mx.axpy(1.0 / n, nx);
                my.axpy(1.0 / n, ny);
            }
            for (nx, ny) in &mut table {
                *nx = nx.sub(&mx);
                *ny = ny.sub(&my);
            }
            noise.push(table);
        }
        let b_mean = crate::linalg::vec_mean(&b)?;
        let t_mean = t.iter().sum::<f64>() / k as f64;
        Ok(super::ProblemInstance::Synthetic(SyntheticProblem {
            spec: self,
            b,
            t,
            b_mean,
            t_mean,
            noise,
        }))
    }
}

impl SyntheticProblem {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn b(&self) -> &[Vector] {
        &self.b
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Mean coupling `t̄`, so that `Ā = t̄ I`.
    pub fn t_mean(&self) -> f64 {
        self.t_mean
    }

    pub fn b_mean(&self) -> &Vector {
        &self.b_mean
    }

    pub(super) fn num_clients(&self) -> usize {
        self.spec.clients
    }

    pub(super) fn dim_x(&self) -> usize {
        self.spec.dim
    }

    pub(super) fn dim_y(&self) -> usize {
        self.spec.dim
    }

    pub(super) fn client_len(&self, k: usize) -> usize {
        self.noise.get(k).map_or(0, Vec::len)
    }

    pub(super) fn known_constants(&self) -> KnownConstants {
        let tau = self.spec.tau;
        // largest |eigenvalue| of [[τ, -t], [-t, -1]] over clients
        let l_f = self
            .t
            .iter()
            .map(|t| ((tau - 1.0).abs() + ((tau + 1.0).powi(2) + 4.0 * t * t).sqrt()) / 2.0)
            .fold(0.0_f64, f64::max);
        let sigma = self
            .noise
            .iter()
            .map(|table| table.iter().map(|(nx, ny)| nx.norm_sq() + ny.norm_sq()).sum::<f64>() / table.len() as f64)
            .fold(0.0_f64, f64::max)
            .sqrt();
        KnownConstants {
            l_f: Some(l_f),
            mu: Constant::analytic(1.0),
            sigma: Some(sigma),
        }
    }

    pub(super) fn describe(&self) -> String {
        let s = &self.spec;
        format!(
            "problem=synthetic\nclients={}\ndim={}\ns={}\ntau={}\nnoise_sigma={}\nsamples_per_client={}\nseed={}\nrecenter={}\n",
            s.clients, s.dim, s.s, s.tau, s.noise_sigma, s.samples_per_client, s.seed, s.recenter
        )
    }

    pub(super) fn value_client(&self, k: usize, x: &Vector, y: &Vector) -> f64 {
        0.5 * self.spec.tau * x.norm_sq() - 0.5 * y.norm_sq() + self.b[k].dot(y) - self.t[k] * y.dot(x)
    }

    pub(super) fn grad_client(&self, k: usize, x: &Vector, y: &Vector) -> GradPair {
        let tau = self.spec.tau;
        let tk = self.t[k];
        let gx = x.iter().zip(y.iter()).map(|(x, y)| tau * x - tk * y).collect();
        let gy = y
            .iter()
            .zip(x.iter())
            .zip(self.b[k].iter())
            .map(|((y, x), b)| -y + b - tk * x)
            .collect();
        GradPair { gx, gy }
    }

    pub(super) fn grad_sample(&self, k: usize, item: usize, x: &Vector, y: &Vector) -> GradPair {
        let mut g = self.grad_client(k, x, y);
        let (nx, ny) = &self.noise[k][item];
        g.gx.axpy(1.0, nx);
        g.gy.axpy(1.0, ny);
        g
    }

    /// `y*(x) = b̄ - t̄ x`.
    pub fn best_response(&self, x: &Vector) -> Vector {
        self.b_mean
            .iter()
            .zip(x.iter())
            .map(|(b, x)| b - self.t_mean * x)
            .collect()
    }

    /// `F(x) = (τ/2)||x||² + (1/2)||b̄ - t̄x||²`.
    pub fn primal_value(&self, x: &Vector) -> f64 {
        0.5 * self.spec.tau * x.norm_sq() + 0.5 * self.best_response(x).norm_sq()
    }

    /// `∇F(x) = (τ + t̄²) x - t̄ b̄`.
    pub fn primal_grad(&self, x: &Vector) -> Vector {
        let c = self.spec.tau + self.t_mean * self.t_mean;
        x.iter()
            .zip(self.b_mean.iter())
            .map(|(x, b)| c * x - self.t_mean * b)
            .collect()
    }

    pub fn saddle_point(&self) -> (Vector, Vector) {
        let c = self.spec.tau + self.t_mean * self.t_mean;
        let x: Vector = self.b_mean.iter().map(|b| self.t_mean * b / c).collect();
        let y = self.best_response(&x);
        (x, y)
    }

    pub(super) fn initial_point(&self, rng: &mut Rng) -> (Vector, Vector) {
        let x = rng::normal_vector(rng, self.spec.dim, 1.0);
        let y = rng::normal_vector(rng, self.spec.dim, 1.0);
        (x, y)
    }
}
