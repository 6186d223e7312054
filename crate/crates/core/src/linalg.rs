//! Dense vectors, diagonal matrices and the oracle counters.
//!
//! Everything here is `f64`. Reductions over clients always run in client
//! index order so that a fixed input order gives bit-identical output.

use std::ops::{Deref, Index, IndexMut};

use crate::error::{Error, Result};

/// Dense real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    /// Unit vector `e_i` in `dim` dimensions.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Vector::zeros(dim);
        v.0[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Vector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (s, o) in self.0.iter_mut().zip(&other.0) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for s in &mut self.0 {
            *s *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Vector {
        Vector(self.0.iter().map(|s| s * a).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Elementwise square.
    pub fn squared(&self) -> Vector {
        Vector(self.0.iter().map(|a| a * a).collect())
    }

    /// `self + eta * (target - self)`, evaluated coordinatewise in exactly
    /// this form so that reductions between code paths stay bitwise equal.
    pub fn interpolate(&self, target: &Vector, eta: f64) -> Vector {
        debug_assert_eq!(self.dim(), target.dim());
        Vector(self.0.iter().zip(&target.0).map(|(s, t)| s + eta * (t - s)).collect())
    }

    /// Concatenation `[self; other]`.
    pub fn concat(&self, other: &Vector) -> Vector {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Vector(v)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

/// Diagonal matrix with strictly positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagMatrix {
    diag: Vector,
}

impl DiagMatrix {
    pub fn new(diag: Vector) -> Result<Self> {
        check_positive(&diag)?;
        Ok(DiagMatrix { diag })
    }

    pub fn identity(dim: usize) -> Self {
        DiagMatrix {
            diag: Vector::filled(dim, 1.0),
        }
    }

    pub fn diag(&self) -> &Vector {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.dim()
    }

    /// Smallest diagonal entry.
    pub fn min_entry(&self) -> f64 {
        self.diag.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest diagonal entry (the spectral norm).
    pub fn max_entry(&self) -> f64 {
        self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_identity(&self) -> bool {
        self.diag.iter().all(|&d| d == 1.0)
    }
}

fn check_positive(diag: &Vector) -> Result<()> {
    for (index, &value) in diag.iter().enumerate() {
        // NaN fails this comparison too
        if !(value > 0.0) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
    }
    Ok(())
}

/// Coordinatewise mean of `vs`, summed in list order. A coordinate on which
/// all inputs agree is returned unchanged.
pub fn vec_mean(vs: &[Vector]) -> Result<Vector> {
    let first = vs.first().ok_or(Error::Empty("vec_mean of zero vectors"))?;
    let dim = first.dim();
    if let Some(v) = vs.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.dim(),
        });
    }
    Ok(mean_of(vs, dim))
}

/// Mean over an iterator of borrowed vectors, same rules as [`vec_mean`].
pub(crate) fn mean_of<'a, I>(vs: I, dim: usize) -> Vector
where
    I: IntoIterator<Item = &'a Vector>,
{
    let mut acc = Vector::zeros(dim);
    let mut same = vec![true; dim];
    let mut first: Option<&Vector> = None;
    let mut n = 0usize;
    for v in vs {
        let f = *first.get_or_insert(v);
        for (i, s) in same.iter_mut().enumerate() {
            acc.0[i] += v.0[i];
            *s &= v.0[i] == f.0[i];
        }
        n += 1;
    }
    let k = n as f64;
    for (i, a) in acc.0.iter_mut().enumerate() {
        *a = match first {
            Some(f) if same[i] => f.0[i],
            _ => *a / k,
        };
    }
    acc
}

/// Action of `A^{-1}` on `g` for diagonal `A`: `g_i / a_i`.
pub fn precondition(a: &DiagMatrix, g: &Vector) -> Result<Vector> {
    if a.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: g.dim(),
        });
    }
    check_positive(&a.diag)?;
    Ok(g.iter().zip(a.diag.iter()).map(|(g, d)| g / d).collect())
}

/// Oracle and communication counters for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    /// Stochastic first-order oracle calls per client.
    pub sfo_per_client: u64,
    pub comm_rounds: u64,
    pub local_steps: u64,
}

/// `log(1 + exp(-z))` without overflow.
pub fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(z))`, the magnitude of the loss derivative at margin `z`.
pub fn sigmoid_neg(z: f64) -> f64 {
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}
