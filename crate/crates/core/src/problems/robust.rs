//! Logistic regression against a shared input perturbation.
//!
//! `f^k(w, ϱ) = mean_i log(1 + exp(-y_i w·(x_i + ϱ)))` over client `k`'s data,
//! minimized over `w` and maximized over `||ϱ|| <= radius`.
//!
//! Generated data carry one robust feature (large signal, unit noise) and one
//! brittle feature (small signal, tiny noise); remaining features are noise.
//! A model trained without the perturbation leans on the brittle feature.

use rand::Rng as _;

use super::{Constant, GradPair, KnownConstants, LabeledPoint};
use crate::error::{Error, Result};
use crate::federation::{self, PartitionScheme};
use crate::linalg::{sigmoid_neg, softplus_neg, Vector};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSpec {
    pub clients: usize,
    pub dim: usize,
    pub n_per_client: usize,
    pub test_size: usize,
    pub radius: f64,
    pub robust_signal: f64,
    pub brittle_signal: f64,
    pub brittle_noise: f64,
    pub partition: PartitionScheme,
    pub seed: u64,
}

impl Default for RobustSpec {
    fn default() -> Self {
        RobustSpec {
            clients: 10,
            dim: 10,
            n_per_client: 100,
            test_size: 2000,
            radius: 1.0,
            robust_signal: 1.2,
            brittle_signal: 0.5,
            brittle_noise: 0.01,
            partition: PartitionScheme::ByGroup,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RobustProblem {
    spec: RobustSpec,
    clients: Vec<Vec<LabeledPoint>>,
    test: Vec<LabeledPoint>,
}

pub fn make_robust(clients: usize, dim: usize, n_per_client: usize, seed: u64) -> Result<super::ProblemInstance> {
    RobustSpec {
        clients,
        dim,
        n_per_client,
        seed,
        ..RobustSpec::default()
    }
    .build()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

impl RobustSpec {
    pub fn build(self) -> Result<super::ProblemInstance> {
        if self.clients == 0 || self.dim < 2 || self.n_per_client == 0 || self.test_size == 0 {
            return Err(Error::InvalidArgument(
                "robust problem needs clients, n_per_client, test_size >= 1 and dim >= 2".into(),
            ));
        }
        if !(self.radius > 0.0) || !(self.brittle_noise >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "robust problem needs radius > 0 and brittle_noise >= 0 (got {}, {})",
                self.radius, self.brittle_noise
            )));
        }
        let k = self.clients;
        let n = k * self.n_per_client;
        let mut r = rng::seeded(self.seed);
        let mut draw = |count: usize| -> Vec<LabeledPoint> {
            (0..count)
                .map(|_| {
                    let label = if r.random::<bool>() { 1.0 } else { -1.0 };
                    let mut features = rng::normal_vector(&mut r, self.dim, 1.0);
                    features[0] += self.robust_signal * label;
                    features[1] = self.brittle_signal * label + self.brittle_noise * features[1];
                    LabeledPoint { features, label }
                })
                .collect()
        };
        let train = draw(n);
        let test = draw(self.test_size);

        let labels: Vec<usize> = match self.partition {
            PartitionScheme::Iid => Vec::new(),
            PartitionScheme::ByGroup => {
                let pts: Vec<Vector> = train.iter().map(|p| p.features.clone()).collect();
                federation::cluster_groups(&pts, (2 * k).min(n), self.seed ^ 0x5bd1_e995)?
            }
            PartitionScheme::Dirichlet { .. } => train.iter().map(|p| usize::from(p.label > 0.0)).collect(),
        };
        let plan = federation::partition(n, &labels, k, self.partition, self.seed.wrapping_add(1))?;
        let clients = plan
            .assignment
            .iter()
            .map(|items| items.iter().map(|&i| train[i].clone()).collect())
            .collect();
        Ok(super::ProblemInstance::Robust(RobustProblem {
            spec: self,
            clients,
            test,
        }))
    }
}

impl RobustProblem {
    pub fn spec(&self) -> &RobustSpec {
        &self.spec
    }

    pub fn radius(&self) -> f64 {
        self.spec.radius
    }

    pub fn client_data(&self, k: usize) -> &[LabeledPoint] {
        &self.clients[k]
    }

    pub fn test_set(&self) -> &[LabeledPoint] {
        &self.test
    }

    pub(super) fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub(super) fn dim_x(&self) -> usize {
        self.spec.dim
    }

    pub(super) fn dim_y(&self) -> usize {
        self.spec.dim
    }

    pub(super) fn client_len(&self, k: usize) -> usize {
        self.clients.get(k).map_or(0, Vec::len)
    }

    /// The objective is not concave in the perturbation, so `mu` is a nominal 1.
    pub(super) fn known_constants(&self) -> KnownConstants {
        KnownConstants {
            l_f: None,
            mu: Constant {
                value: 1.0,
                provenance: super::Provenance::Nominal,
            },
            sigma: None,
        }
    }

    pub(super) fn describe(&self) -> String {
        let s = &self.spec;
        format!(
            "problem=robust\nclients={}\ndim={}\nn_per_client={}\ntest_size={}\nradius={}\nrobust_signal={}\nbrittle_signal={}\nbrittle_noise={}\npartition={}\nseed={}\n",
            s.clients,
            s.dim,
            s.n_per_client,
            s.test_size,
            s.radius,
            s.robust_signal,
            s.brittle_signal,
            s.brittle_noise,
            s.partition,
            s.seed
        )
    }

    fn margin(pt: &LabeledPoint, w: &[f64], rho: &[f64]) -> f64 {
        pt.label * (dot(w, &pt.features) + dot(w, rho))
    }

    fn accumulate(pt: &LabeledPoint, w: &Vector, rho: &Vector, weight: f64, g: &mut GradPair) {
        let s = sigmoid_neg(Self::margin(pt, w, rho));
        let c = -weight * s * pt.label;
        for i in 0..w.dim() {
            g.gx[i] += c * (pt.features[i] + rho[i]);
            g.gy[i] += c * w[i];
        }
    }

    fn mean_loss(data: &[LabeledPoint], w: &[f64], rho: &[f64]) -> f64 {
        data.iter()
            .map(|pt| softplus_neg(Self::margin(pt, w, rho)))
            .sum::<f64>()
            / data.len() as f64
    }

    pub(super) fn value_client(&self, k: usize, x: &Vector, y: &Vector) -> f64 {
        Self::mean_loss(&self.clients[k], x, y)
    }

    pub(super) fn grad_client(&self, k: usize, x: &Vector, y: &Vector) -> GradPair {
        let data = &self.clients[k];
        let mut g = GradPair::zeros(x.dim(), y.dim());
        let wgt = 1.0 / data.len() as f64;
        for pt in data {
            Self::accumulate(pt, x, y, wgt, &mut g);
        }
        g
    }

    pub(super) fn grad_sample(&self, k: usize, item: usize, x: &Vector, y: &Vector) -> GradPair {
        let mut g = GradPair::zeros(x.dim(), y.dim());
        Self::accumulate(&self.clients[k][item], x, y, 1.0, &mut g);
        g
    }

    /// Fraction of held-out points classified correctly by `sign(w·(x + ϱ))`.
    pub fn test_accuracy(&self, w: &Vector, rho: &Vector) -> f64 {
        let hits = self.test.iter().filter(|pt| Self::margin(pt, w, rho) > 0.0).count();
        hits as f64 / self.test.len() as f64
    }

    /// Held-out accuracy under a perturbation found by projected gradient
    /// ascent on the held-out loss, started from zero.
    pub fn worst_case_accuracy(&self, w: &Vector, steps: usize) -> f64 {
        let rho = self.attack(w, steps);
        self.test_accuracy(w, &rho)
    }

    /// Perturbation found by `steps` normalized projected ascent steps on the
    /// held-out loss.
    pub fn attack(&self, w: &Vector, steps: usize) -> Vector {
        let d = w.dim();
        let radius = self.radius();
        let mut rho = Vector::zeros(d);
        let step = 2.0 * radius / steps.max(1) as f64;
        for _ in 0..steps {
            let mut g = GradPair::zeros(d, d);
            for pt in &self.test {
                Self::accumulate(pt, w, &rho, 1.0, &mut g);
            }
            let n = g.gy.norm();
            if n == 0.0 {
                break;
            }
            rho.axpy(step / n, &g.gy);
            rho = super::project_y(super::YConstraint::EuclideanBall(radius), &rho);
        }
        rho
    }
}
