//! Recursive variance-reduced gradient estimators and server-side diagonal
//! preconditioner generators.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{DiagMatrix, Vector};

/// `g_new + (1 - momentum) * (prev_est - g_old)`.
///
/// `momentum == 1` returns `g_new` bit for bit.
pub fn storm_update(g_new: &Vector, g_old: &Vector, prev_est: &Vector, momentum: f64) -> Result<Vector> {
    if !(momentum > 0.0 && momentum <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "momentum must lie in (0, 1], got {momentum}"
        )));
    }
    for other in [g_old, prev_est] {
        if other.dim() != g_new.dim() {
            return Err(Error::DimensionMismatch {
                expected: g_new.dim(),
                found: other.dim(),
            });
        }
    }
    if momentum == 1.0 {
        return Ok(g_new.clone());
    }
    let keep = 1.0 - momentum;
    Ok(g_new
        .iter()
        .zip(g_old.iter())
        .zip(prev_est.iter())
        .map(|((g, o), p)| g + keep * (p - o))
        .collect())
}

/// `(min(1, c1 η²), min(1, c2 η²))`: the y-side and x-side estimator momenta.
pub fn momentum_schedule(c1: f64, c2: f64, eta_t: f64) -> (f64, f64) {
    let e2 = eta_t * eta_t;
    ((c1 * e2).min(1.0), (c2 * e2).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixMode {
    Identity,
    AdamStyle,
    AdaBeliefStyle,
}

impl fmt::Display for MatrixMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixMode::Identity => "identity",
            MatrixMode::AdamStyle => "adam",
            MatrixMode::AdaBeliefStyle => "adabelief",
        })
    }
}

impl FromStr for MatrixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(MatrixMode::Identity),
            "adam" => Ok(MatrixMode::AdamStyle),
            "adabelief" => Ok(MatrixMode::AdaBeliefStyle),
            _ => Err(Error::Parse(format!("unknown matrix mode `{s}`"))),
        }
    }
}

/// Second-moment state behind the server's adaptive matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveAccumulator {
    /// x-side accumulator
    pub a: Vector,
    /// y-side accumulator
    pub b: Vector,
    /// Averaged estimates seen at the previous generation (AdaBelief reference).
    pub last_sync_grads: Option<(Vector, Vector)>,
    pub mode: MatrixMode,
    /// Diagonal floor.
    pub rho: f64,
    /// Decay of the accumulators.
    pub varrho: f64,
    /// Keep the accumulators at zero; matrices are then `rho * I`.
    pub frozen: bool,
}

impl AdaptiveAccumulator {
    pub fn new(mode: MatrixMode, dim_x: usize, dim_y: usize, rho: f64, varrho: f64) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho must be finite and >= 0, got {rho}"
            )));
        }
        if !(0.0..1.0).contains(&varrho) {
            return Err(Error::InvalidArgument(format!(
                "varrho must lie in [0, 1), got {varrho}"
            )));
        }
        Ok(AdaptiveAccumulator {
            a: Vector::zeros(dim_x),
            b: Vector::zeros(dim_y),
            last_sync_grads: None,
            mode,
            rho,
            varrho,
            frozen: false,
        })
    }

    /// Generate `(A, B)` from the averaged estimates according to `mode`.
    pub fn generate(&mut self, w_bar: &Vector, v_bar: &Vector) -> Result<(DiagMatrix, DiagMatrix)> {
        match self.mode {
            MatrixMode::Identity => Ok((DiagMatrix::identity(w_bar.dim()), DiagMatrix::identity(v_bar.dim()))),
            MatrixMode::AdamStyle => adam_matrix_update(self, w_bar, v_bar),
            MatrixMode::AdaBeliefStyle => adabelief_matrix_update(self, w_bar, v_bar),
        }
    }

    fn check_dims(&self, w_bar: &Vector, v_bar: &Vector) -> Result<()> {
        for (acc, g) in [(&self.a, w_bar), (&self.b, v_bar)] {
            if acc.dim() != g.dim() {
                return Err(Error::DimensionMismatch {
                    expected: acc.dim(),
                    found: g.dim(),
                });
            }
        }
        Ok(())
    }

    fn absorb(&mut self, sx: &Vector, sy: &Vector) {
        if self.frozen {
            return;
        }
        let r = self.varrho;
        for (acc, s) in [(&mut self.a, sx), (&mut self.b, sy)] {
            for (a, s) in acc.as_mut_slice().iter_mut().zip(s.iter()) {
                *a = (r * *a + (1.0 - r) * s * s).min(f64::MAX);
            }
        }
    }

    fn matrices(&self) -> Result<(DiagMatrix, DiagMatrix)> {
        let build = |acc: &Vector| DiagMatrix::new(acc.iter().map(|a| a.sqrt() + self.rho).collect());
        Ok((build(&self.a)?, build(&self.b)?))
    }
}

/// `a ← ϱa + (1-ϱ)w̄²`, `A = diag(sqrt(a) + ρ)`, and likewise `B` from `v̄`.
pub fn adam_matrix_update(
    acc: &mut AdaptiveAccumulator,
    w_bar: &Vector,
    v_bar: &Vector,
) -> Result<(DiagMatrix, DiagMatrix)> {
    if acc.mode != MatrixMode::AdamStyle {
        return Err(Error::InvalidArgument(format!(
            "adam update on a {} accumulator",
            acc.mode
        )));
    }
    acc.check_dims(w_bar, v_bar)?;
    acc.absorb(w_bar, v_bar);
    acc.matrices()
}

/// Like [`adam_matrix_update`] on the innovation `w̄ - w̄_prev`, where
/// `w̄_prev` is the previous generation's input (zero on the first call).
pub fn adabelief_matrix_update(
    acc: &mut AdaptiveAccumulator,
    w_bar: &Vector,
    v_bar: &Vector,
) -> Result<(DiagMatrix, DiagMatrix)> {
    if acc.mode != MatrixMode::AdaBeliefStyle {
        return Err(Error::InvalidArgument(format!(
            "adabelief update on a {} accumulator",
            acc.mode
        )));
    }
    acc.check_dims(w_bar, v_bar)?;
    let (dx, dy) = match &acc.last_sync_grads {
        Some((pw, pv)) => (w_bar.sub(pw), v_bar.sub(pv)),
        None => (w_bar.clone(), v_bar.clone()),
    };
    acc.absorb(&dx, &dy);
    acc.last_sync_grads = Some((w_bar.clone(), v_bar.clone()));
    acc.matrices()
}
