//! Square-loss AUC maximization as a minimax problem with a linear scorer.
//!
//! Primal variable `x = (w, a, b)` with `w ∈ R^dim`, dual `y = (α)`. For a
//! sample `(ξ, ℓ)` with score `h = w·ξ` and positive ratio `p`:
//!
//! ```text
//! ℓ = +1: (1-p)(h-a)² - 2(1+α)(1-p)h - p(1-p)α²
//! ℓ = -1:     p(h-b)² + 2(1+α)p h    - p(1-p)α²
//! ```
//!
//! The objective is a concave quadratic in `α` with curvature `2p(1-p)`.
//!
//! Data: points come from `2K` Gaussian clusters; the label is the top
//! `p`-quantile of a noisy linear score, so the classes are separable up to
//! the score noise. Clients receive whole feature-space clusters.

use super::{Constant, GradPair, KnownConstants};
use crate::error::{Error, Result};
use crate::federation::{self, PartitionScheme};
use crate::linalg::Vector;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AucSpec {
    pub clients: usize,
    pub dim: usize,
    pub n_per_client: usize,
    pub pos_ratio: f64,
    pub test_size: usize,
    pub partition: PartitionScheme,
    /// Standard deviation of the noise added to the labeling score.
    pub score_noise: f64,
    pub seed: u64,
}

impl Default for AucSpec {
    fn default() -> Self {
        AucSpec {
            clients: 10,
            dim: 20,
            n_per_client: 200,
            pos_ratio: 0.05,
            test_size: 2000,
            partition: PartitionScheme::ByGroup,
            score_noise: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vector,
    /// +1 or -1
    pub label: f64,
}

#[derive(Debug, Clone)]
pub struct AucProblem {
    spec: AucSpec,
    clients: Vec<Vec<LabeledPoint>>,
    test: Vec<LabeledPoint>,
    p: f64,
    l_f: f64,
}

pub fn make_auc(
    clients: usize,
    dim: usize,
    n_per_client: usize,
    pos_ratio: f64,
    seed: u64,
) -> Result<super::ProblemInstance> {
    AucSpec {
        clients,
        dim,
        n_per_client,
        pos_ratio,
        seed,
        ..AucSpec::default()
    }
    .build()
}

const CENTER_SCALE: f64 = 1.5;

impl AucSpec {
    pub fn build(self) -> Result<super::ProblemInstance> {
        if !(self.pos_ratio > 0.0 && self.pos_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pos_ratio must lie in (0, 1), got {}",
                self.pos_ratio
            )));
        }
        if self.clients == 0 || self.dim == 0 || self.n_per_client == 0 || self.test_size < 2 {
            return Err(Error::InvalidArgument(
                "auc problem needs clients, dim, n_per_client >= 1 and test_size >= 2".into(),
            ));
        }
        let k = self.clients;
        let n = k * self.n_per_client;
        let mut r = rng::seeded(self.seed);
        let mut direction = rng::normal_vector(&mut r, self.dim, 1.0);
        let dn = direction.norm();
        direction.scale(1.0 / dn);
        let n_centers = 2 * k;
        let centers: Vec<Vector> = (0..n_centers)
            .map(|_| rng::normal_vector(&mut r, self.dim, CENTER_SCALE))
            .collect();
        let feature_scale = 1.0 / ((1.0 + CENTER_SCALE * CENTER_SCALE) * self.dim as f64).sqrt();

        let mut draw = |count: usize| -> Vec<(Vector, f64)> {
            (0..count)
                .map(|_| {
                    use rand::Rng as _;
                    let c = &centers[r.random_range(0..n_centers)];
                    let mut x = rng::normal_vector(&mut r, self.dim, 1.0);
                    x.axpy(1.0, c);
                    x.scale(feature_scale);
                    let score = direction.dot(&x)
                        + self.score_noise * feature_scale * {
                            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
                            z
                        };
                    (x, score)
                })
                .collect()
        };
        let train = draw(n);
        let test = draw(self.test_size);

        // threshold: exactly round(p n) training positives, at least one of each class
        let n_pos = ((self.pos_ratio * n as f64).round() as usize).clamp(1, n.max(2) - 1);
        let mut scores: Vec<f64> = train.iter().map(|(_, s)| *s).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let threshold = if n_pos < scores.len() {
            0.5 * (scores[n_pos - 1] + scores[n_pos])
        } else {
            f64::NEG_INFINITY
        };
        let label = |s: f64| if s > threshold { 1.0 } else { -1.0 };

        let features: Vec<Vector> = train.iter().map(|(x, _)| x.clone()).collect();
        let groups = if n >= n_centers && !matches!(self.partition, PartitionScheme::Iid) {
            federation::cluster_groups(&features, n_centers, self.seed ^ 0x9e37_79b9)?
        } else {
            vec![0; n]
        };
        let group_labels: Vec<usize> = match self.partition {
            PartitionScheme::Dirichlet { .. } => train.iter().map(|(_, s)| usize::from(label(*s) > 0.0)).collect(),
            _ => groups,
        };
        let plan = federation::partition(n, &group_labels, k, self.partition, self.seed.wrapping_add(1))?;
        let clients: Vec<Vec<LabeledPoint>> = plan
            .assignment
            .iter()
            .map(|items| {
                items
                    .iter()
                    .map(|&i| LabeledPoint {
                        features: train[i].0.clone(),
                        label: label(train[i].1),
                    })
                    .collect()
            })
            .collect();
        let test: Vec<LabeledPoint> = test
            .into_iter()
            .map(|(features, s)| LabeledPoint {
                features,
                label: label(s),
            })
            .collect();

        let p = self.pos_ratio;
        let l_f = clients
            .iter()
            .flatten()
            .map(|pt| {
                let r = pt.features.norm_sq();
                let poly = r * r + 4.0 * r + 1.0;
                let c = if pt.label > 0.0 { 1.0 - p } else { p };
                (4.0 * c * c * poly + 4.0 * p * p * (1.0 - p) * (1.0 - p)).sqrt()
            })
            .fold(0.0_f64, f64::max);
        Ok(super::ProblemInstance::Auc(AucProblem {
            spec: self,
            clients,
            test,
            p,
            l_f,
        }))
    }
}

impl AucProblem {
    pub fn spec(&self) -> &AucSpec {
        &self.spec
    }

    pub fn pos_ratio(&self) -> f64 {
        self.p
    }

    pub fn client_data(&self, k: usize) -> &[LabeledPoint] {
        &self.clients[k]
    }

    /// Held-out points pooled over all clients.
    pub fn test_set(&self) -> &[LabeledPoint] {
        &self.test
    }

    pub(super) fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub(super) fn dim_x(&self) -> usize {
        self.spec.dim + 2
    }

    pub(super) fn dim_y(&self) -> usize {
        1
    }

    pub(super) fn client_len(&self, k: usize) -> usize {
        self.clients.get(k).map_or(0, Vec::len)
    }

    pub(super) fn known_constants(&self) -> KnownConstants {
        KnownConstants {
            l_f: Some(self.l_f),
            mu: Constant::analytic(2.0 * self.p * (1.0 - self.p)),
            sigma: None,
        }
    }

    pub(super) fn describe(&self) -> String {
        let s = &self.spec;
        format!(
            "problem=auc\nclients={}\ndim={}\nn_per_client={}\npos_ratio={}\ntest_size={}\npartition={}\nscore_noise={}\nseed={}\n",
            s.clients, s.dim, s.n_per_client, s.pos_ratio, s.test_size, s.partition, s.score_noise, s.seed
        )
    }

    fn split<'a>(&self, x: &'a Vector) -> (&'a [f64], f64, f64) {
        let d = self.spec.dim;
        (&x.as_slice()[..d], x[d], x[d + 1])
    }

    fn sample_value(&self, pt: &LabeledPoint, x: &Vector, alpha: f64) -> f64 {
        let p = self.p;
        let (w, a, b) = self.split(x);
        let h: f64 = w.iter().zip(pt.features.iter()).map(|(w, f)| w * f).sum();
        let tail = -p * (1.0 - p) * alpha * alpha;
        if pt.label > 0.0 {
            (1.0 - p) * (h - a) * (h - a) - 2.0 * (1.0 + alpha) * (1.0 - p) * h + tail
        } else {
            p * (h - b) * (h - b) + 2.0 * (1.0 + alpha) * p * h + tail
        }
    }

    /// Adds `weight * ∇f(x, α; pt)` into `(gx, gy)`.
    fn accumulate(&self, pt: &LabeledPoint, x: &Vector, alpha: f64, weight: f64, g: &mut GradPair) {
        let p = self.p;
        let d = self.spec.dim;
        let (w, a, b) = self.split(x);
        let h: f64 = w.iter().zip(pt.features.iter()).map(|(w, f)| w * f).sum();
        let (coef_w, ga, gb, galpha) = if pt.label > 0.0 {
            (
                2.0 * (1.0 - p) * (h - a) - 2.0 * (1.0 + alpha) * (1.0 - p),
                -2.0 * (1.0 - p) * (h - a),
                0.0,
                -2.0 * (1.0 - p) * h - 2.0 * p * (1.0 - p) * alpha,
            )
        } else {
            (
                2.0 * p * (h - b) + 2.0 * (1.0 + alpha) * p,
                0.0,
                -2.0 * p * (h - b),
                2.0 * p * h - 2.0 * p * (1.0 - p) * alpha,
            )
        };
        for (gi, f) in g.gx.as_mut_slice()[..d].iter_mut().zip(pt.features.iter()) {
            *gi += weight * coef_w * f;
        }
        g.gx[d] += weight * ga;
        g.gx[d + 1] += weight * gb;
        g.gy[0] += weight * galpha;
    }

    pub(super) fn value_client(&self, k: usize, x: &Vector, y: &Vector) -> f64 {
        let data = &self.clients[k];
        data.iter().map(|pt| self.sample_value(pt, x, y[0])).sum::<f64>() / data.len() as f64
    }

    pub(super) fn grad_client(&self, k: usize, x: &Vector, y: &Vector) -> GradPair {
        let data = &self.clients[k];
        let mut g = GradPair::zeros(self.dim_x(), 1);
        let wgt = 1.0 / data.len() as f64;
        for pt in data {
            self.accumulate(pt, x, y[0], wgt, &mut g);
        }
        g
    }

    pub(super) fn grad_sample(&self, k: usize, item: usize, x: &Vector, y: &Vector) -> GradPair {
        let mut g = GradPair::zeros(self.dim_x(), 1);
        self.accumulate(&self.clients[k][item], x, y[0], 1.0, &mut g);
        g
    }

    /// Coefficient `c(x)` of the linear term in `α` of the global objective.
    fn alpha_linear_coef(&self, x: &Vector) -> f64 {
        let p = self.p;
        let (w, _, _) = self.split(x);
        let k = self.clients.len() as f64;
        self.clients
            .iter()
            .map(|data| {
                data.iter()
                    .map(|pt| {
                        let h: f64 = w.iter().zip(pt.features.iter()).map(|(w, f)| w * f).sum();
                        if pt.label > 0.0 {
                            -2.0 * (1.0 - p) * h
                        } else {
                            2.0 * p * h
                        }
                    })
                    .sum::<f64>()
                    / data.len() as f64
            })
            .sum::<f64>()
            / k
    }

    /// `α*(x) = c(x) / (2p(1-p))`.
    pub fn best_response(&self, x: &Vector) -> Vector {
        let p = self.p;
        Vector::new(vec![self.alpha_linear_coef(x) / (2.0 * p * (1.0 - p))])
    }

    /// Linear scores `w·ξ` of the held-out set.
    pub fn test_scores(&self, w: &[f64]) -> Vec<f64> {
        self.test
            .iter()
            .map(|pt| w.iter().zip(pt.features.iter()).map(|(w, f)| w * f).sum())
            .collect()
    }
}
