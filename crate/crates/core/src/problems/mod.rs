//! K-client minimax problem instances.
//!
//! Each client `k` owns a local objective `f^k(x, y)` over a finite dataset.
//! The global objective is the equally weighted mean over clients. Problems
//! expose exact per-client gradients, per-sample stochastic gradients and,
//! where one exists, the closed-form inner maximizer `y*(x)`.

mod auc;
mod robust;
mod synthetic;

pub use auc::{make_auc, AucProblem, AucSpec, LabeledPoint};
pub use robust::{make_robust, RobustProblem, RobustSpec};
pub use synthetic::{make_synthetic, SyntheticProblem, SyntheticSpec};

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Estimated,
    /// Placeholder value where the instance does not satisfy the assumption.
    Nominal,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Analytic => "analytic",
            Provenance::Estimated => "estimated",
            Provenance::Nominal => "nominal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

impl Constant {
    pub fn analytic(value: f64) -> Self {
        Constant {
            value,
            provenance: Provenance::Analytic,
        }
    }

    pub fn estimated(value: f64) -> Self {
        Constant {
            value,
            provenance: Provenance::Estimated,
        }
    }
}

/// Constants an instance knows without sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownConstants {
    pub l_f: Option<f64>,
    pub mu: Constant,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YConstraint {
    Unconstrained,
    EuclideanBall(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Synthetic,
    Auc,
    Robust,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Synthetic => "synthetic",
            ProblemKind::Auc => "auc",
            ProblemKind::Robust => "robust",
        }
    }
}

/// One realization of the client-local randomness: an item of client `client`'s dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRef {
    pub client: usize,
    pub item: usize,
}

/// Partial gradients `(∇_x f, ∇_y f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradPair {
    pub gx: Vector,
    pub gy: Vector,
}

impl GradPair {
    pub fn zeros(dx: usize, dy: usize) -> Self {
        GradPair {
            gx: Vector::zeros(dx),
            gy: Vector::zeros(dy),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Synthetic(SyntheticProblem),
    Auc(AucProblem),
    Robust(RobustProblem),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            ProblemInstance::Synthetic($p) => $e,
            ProblemInstance::Auc($p) => $e,
            ProblemInstance::Robust($p) => $e,
        }
    };
}

impl ProblemInstance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemInstance::Synthetic(_) => ProblemKind::Synthetic,
            ProblemInstance::Auc(_) => ProblemKind::Auc,
            ProblemInstance::Robust(_) => ProblemKind::Robust,
        }
    }

    pub fn num_clients(&self) -> usize {
        dispatch!(self, p => p.num_clients())
    }

    pub fn dim_x(&self) -> usize {
        dispatch!(self, p => p.dim_x())
    }

    pub fn dim_y(&self) -> usize {
        dispatch!(self, p => p.dim_y())
    }

    /// Size of client `k`'s dataset.
    pub fn client_len(&self, k: usize) -> usize {
        dispatch!(self, p => p.client_len(k))
    }

    pub fn known_constants(&self) -> KnownConstants {
        dispatch!(self, p => p.known_constants())
    }

    pub fn y_constraint(&self) -> YConstraint {
        match self {
            ProblemInstance::Robust(p) => YConstraint::EuclideanBall(p.radius()),
            _ => YConstraint::Unconstrained,
        }
    }

    /// Generation parameters as `key=value` lines.
    pub fn describe(&self) -> String {
        dispatch!(self, p => p.describe())
    }

    fn check_point(&self, k: usize, x: &Vector, y: &Vector) -> Result<()> {
        if k >= self.num_clients() {
            return Err(Error::OutOfRange {
                what: "client",
                index: k,
                limit: self.num_clients(),
            });
        }
        if x.dim() != self.dim_x() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_x(),
                found: x.dim(),
            });
        }
        if y.dim() != self.dim_y() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_y(),
                found: y.dim(),
            });
        }
        Ok(())
    }

    /// Stochastic partial gradients of `f^k` on one sample.
    pub fn grad_stoch(&self, k: usize, x: &Vector, y: &Vector, xi: SampleRef) -> Result<GradPair> {
        self.check_point(k, x, y)?;
        if xi.client != k {
            return Err(Error::InvalidArgument(format!(
                "sample of client {} used for client {k}",
                xi.client
            )));
        }
        if xi.item >= self.client_len(k) {
            return Err(Error::OutOfRange {
                what: "item",
                index: xi.item,
                limit: self.client_len(k),
            });
        }
        Ok(dispatch!(self, p => p.grad_sample(k, xi.item, x, y)))
    }

    /// Exact partial gradients of `f^k`.
    pub fn grad_full(&self, k: usize, x: &Vector, y: &Vector) -> Result<GradPair> {
        self.check_point(k, x, y)?;
        Ok(dispatch!(self, p => p.grad_client(k, x, y)))
    }

    /// Gradient of the global objective (mean of client gradients in client order).
    pub fn grad_global(&self, x: &Vector, y: &Vector) -> Result<GradPair> {
        let k = self.num_clients();
        let mut gx = Vector::zeros(self.dim_x());
        let mut gy = Vector::zeros(self.dim_y());
        for c in 0..k {
            let g = self.grad_full(c, x, y)?;
            gx.axpy(1.0, &g.gx);
            gy.axpy(1.0, &g.gy);
        }
        gx.scale(1.0 / k as f64);
        gy.scale(1.0 / k as f64);
        Ok(GradPair { gx, gy })
    }

    /// `f^k(x, y)`.
    pub fn value(&self, k: usize, x: &Vector, y: &Vector) -> Result<f64> {
        self.check_point(k, x, y)?;
        Ok(dispatch!(self, p => p.value_client(k, x, y)))
    }

    /// `f(x, y)`, the mean of the client objectives.
    pub fn value_global(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let k = self.num_clients();
        let mut s = 0.0;
        for c in 0..k {
            s += self.value(c, x, y)?;
        }
        Ok(s / k as f64)
    }

    pub fn project_y(&self, y: &Vector) -> Vector {
        project_y(self.y_constraint(), y)
    }

    /// Closed-form `y*(x) = argmax_y f(x, y)` where one exists.
    pub fn best_response(&self, x: &Vector) -> Option<Vector> {
        match self {
            ProblemInstance::Synthetic(p) => Some(p.best_response(x)),
            ProblemInstance::Auc(p) => Some(p.best_response(x)),
            ProblemInstance::Robust(_) => None,
        }
    }

    /// Saddle point of the global objective, available in closed form for the
    /// synthetic family only.
    pub fn saddle_point(&self) -> Result<(Vector, Vector)> {
        match self {
            ProblemInstance::Synthetic(p) => Ok(p.saddle_point()),
            _ => Err(Error::Unsupported {
                problem: self.kind().name(),
                what: "closed-form saddle point",
            }),
        }
    }

    /// Starting point `(x_1, y_1)` shared by all clients.
    pub fn initial_point(&self, rng: &mut Rng) -> (Vector, Vector) {
        match self {
            ProblemInstance::Synthetic(p) => p.initial_point(rng),
            _ => (Vector::zeros(self.dim_x()), Vector::zeros(self.dim_y())),
        }
    }

    pub fn as_synthetic(&self) -> Option<&SyntheticProblem> {
        match self {
            ProblemInstance::Synthetic(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_auc(&self) -> Option<&AucProblem> {
        match self {
            ProblemInstance::Auc(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_robust(&self) -> Option<&RobustProblem> {
        match self {
            ProblemInstance::Robust(p) => Some(p),
            _ => None,
        }
    }
}

/// Identity when unconstrained, else `y * min(1, r / ||y||)`.
pub fn project_y(constraint: YConstraint, y: &Vector) -> Vector {
    match constraint {
        YConstraint::Unconstrained => y.clone(),
        YConstraint::EuclideanBall(r) => {
            let n = y.norm();
            if n <= r {
                y.clone()
            } else {
                y.scaled(r / n)
            }
        }
    }
}
