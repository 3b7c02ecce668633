//! Elements of L2([0,1]) stored as orthonormal-basis coefficients.
//!
//! A [`FunctionVec`] keeps the leading coefficients `c_1, ..., c_L` against a
//! fixed orthonormal basis together with the squared norm of everything past
//! index `L`. Inner products only see the explicit coefficients; the tail is
//! treated as orthogonal to the other operand, which is exact whenever one of
//! the two functions is finite-rank.
//!
//! Grid data enter through [`analyze_grid`], which integrates samples against
//! the basis with the composite midpoint rule.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

type Evaluator<T> = Arc<dyn Fn(usize, T) -> T + Send + Sync>;

/// Orthonormal basis of L2([0,1]), indexed from 1.
#[derive(Clone)]
pub enum Basis<T> {
    /// `phi_1 = 1`, `phi_{2m} = sqrt(2) cos(2 pi m t)`, `phi_{2m+1} = sqrt(2) sin(2 pi m t)`.
    TrigonometricFourier,
    /// Caller-provided evaluator `(l, t) -> phi_l(t)`; orthonormality is the caller's promise.
    UserSuppliedOrthonormal(Evaluator<T>),
}

impl<T> fmt::Debug for Basis<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::TrigonometricFourier => f.write_str("TrigonometricFourier"),
            Basis::UserSuppliedOrthonormal(_) => f.write_str("UserSuppliedOrthonormal(..)"),
        }
    }
}

impl<T: Scalar> Default for Basis<T> {
    fn default() -> Self {
        Basis::TrigonometricFourier
    }
}

impl<T: Scalar> Basis<T> {
    pub fn user_supplied<F>(evaluator: F) -> Self
    where
        F: Fn(usize, T) -> T + Send + Sync + 'static,
    {
        Basis::UserSuppliedOrthonormal(Arc::new(evaluator))
    }

    /// Evaluates `phi_l(t)` for `l >= 1`.
    pub fn eval(&self, l: usize, t: T) -> T {
        assert!(l >= 1, "basis functions are indexed from 1");
        match self {
            Basis::TrigonometricFourier => {
                if l == 1 {
                    return T::one();
                }
                let m = T::from_usize_lossy(l / 2);
                let arg = T::TAU() * m * t;
                let root2 = T::SQRT_2();
                if l % 2 == 0 {
                    root2 * arg.cos()
                } else {
                    root2 * arg.sin()
                }
            }
            Basis::UserSuppliedOrthonormal(f) => f(l, t),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Basis::TrigonometricFourier => "trig",
            Basis::UserSuppliedOrthonormal(_) => "user",
        }
    }
}

/// Midpoints `(i + 1/2) / n` of the uniform grid on [0,1].
pub fn midpoint_grid<T: Scalar>(n: usize) -> Vec<T> {
    let nf = T::from_usize_lossy(n);
    let half = T::lit(0.5);
    (0..n).map(|i| (T::from_usize_lossy(i) + half) / nf).collect()
}

/// Quadrature approximation of `<f, g>` for two sampled functions.
pub fn quadrature_inner<T: Scalar>(f: &[T], g: &[T]) -> T {
    debug_assert_eq!(f.len(), g.len());
    let n = T::from_usize_lossy(f.len());
    f.iter().zip(g).map(|(&a, &b)| a * b).sum::<T>() / n
}

/// A function in L2([0,1]): leading basis coefficients plus tail mass.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionVec<T> {
    coeffs: Vec<T>,
    tail_norm_sq: T,
}

impl<T: Scalar> FunctionVec<T> {
    /// Finite-rank function with the given coefficients.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        Self::with_tail(coeffs, T::zero())
    }

    pub fn with_tail(coeffs: Vec<T>, tail_norm_sq: T) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Data("a function needs at least one coefficient".into()));
        }
        if !(tail_norm_sq >= T::zero()) || !tail_norm_sq.is_finite() {
            return Err(Error::Data(format!("tail norm must be finite and nonnegative, got {tail_norm_sq}")));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Data(format!("non-finite coefficient {bad}")));
        }
        Ok(FunctionVec { coeffs, tail_norm_sq })
    }

    pub fn zeros(len: usize) -> Self {
        FunctionVec {
            coeffs: vec![T::zero(); len.max(1)],
            tail_norm_sq: T::zero(),
        }
    }

    /// The basis function `phi_l` itself, padded to `len` coefficients.
    pub fn unit(l: usize, len: usize) -> Self {
        assert!(l >= 1, "basis functions are indexed from 1");
        let mut f = Self::zeros(len.max(l));
        f.coeffs[l - 1] = T::one();
        f
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn tail_norm_sq(&self) -> T {
        self.tail_norm_sq
    }

    /// Number of explicit coefficients.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coefficient of `phi_l` (1-based), zero beyond the stored length.
    pub fn coeff(&self, l: usize) -> T {
        self.coeffs.get(l.wrapping_sub(1)).copied().unwrap_or_else(T::zero)
    }

    pub fn is_finite_rank(&self) -> bool {
        self.tail_norm_sq == T::zero()
    }

    /// `sum_l c_l(f) c_l(g)`; tails do not contribute.
    pub fn inner_product(&self, other: &Self) -> T {
        self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> T {
        self.coeffs.iter().map(|&c| c * c).sum::<T>() + self.tail_norm_sq
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Splits `f` into `(<f,phi_1>, ..., <f,phi_J>)` and the squared norm of the rest.
    pub fn project_head(&self, j: usize) -> (Vec<T>, T) {
        assert!(j >= 1, "projection dimension must be positive");
        let mut head = vec![T::zero(); j];
        let keep = j.min(self.coeffs.len());
        head[..keep].copy_from_slice(&self.coeffs[..keep]);
        let tail = self.coeffs[keep..].iter().map(|&c| c * c).sum::<T>() + self.tail_norm_sq;
        (head, tail)
    }

    /// `self - other`. Tail masses add, consistent with orthogonal unknown tails.
    pub fn sub(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (1..=len).map(|l| self.coeff(l) - other.coeff(l)).collect();
        FunctionVec {
            coeffs,
            tail_norm_sq: self.tail_norm_sq + other.tail_norm_sq,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (1..=len).map(|l| self.coeff(l) + other.coeff(l)).collect();
        FunctionVec {
            coeffs,
            tail_norm_sq: self.tail_norm_sq + other.tail_norm_sq,
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        FunctionVec {
            coeffs: self.coeffs.iter().map(|&c| c * factor).collect(),
            tail_norm_sq: self.tail_norm_sq * factor * factor,
        }
    }

    /// `||self - other||^2` without allocating the difference.
    pub fn dist_sq(&self, other: &Self) -> T {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut acc = self.tail_norm_sq + other.tail_norm_sq;
        for l in 1..=len {
            let d = self.coeff(l) - other.coeff(l);
            acc += d * d;
        }
        acc
    }

    /// Samples the explicit part of `f` at the midpoints of an `n`-point grid.
    pub fn synthesize(&self, basis: &Basis<T>, n: usize) -> Vec<T> {
        let grid = midpoint_grid::<T>(n);
        grid.iter()
            .map(|&t| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| c * basis.eval(i + 1, t))
                    .sum()
            })
            .collect()
    }
}

/// Projects grid samples onto the first `l_max` basis functions.
///
/// Samples are taken at the grid midpoints `(i + 1/2)/N`. The residual mass
/// `max(0, ||f||^2_quad - sum c_l^2)` becomes the tail.
pub fn analyze_grid<T: Scalar>(samples: &[T], basis: &Basis<T>, l_max: usize) -> Result<FunctionVec<T>> {
    let n = samples.len();
    if l_max == 0 {
        return Err(Error::Data("need at least one coefficient".into()));
    }
    if n < 4 * l_max {
        return Err(Error::Data(format!(
            "grid of {n} points is too coarse for {l_max} coefficients (need at least {})",
            4 * l_max
        )));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("non-finite grid sample".into()));
    }
    let grid = midpoint_grid::<T>(n);
    let nf = T::from_usize_lossy(n);
    let coeffs: Vec<T> = (1..=l_max)
        .map(|l| {
            samples
                .iter()
                .zip(&grid)
                .map(|(&s, &t)| s * basis.eval(l, t))
                .sum::<T>()
                / nf
        })
        .collect();
    let total = samples.iter().map(|&s| s * s).sum::<T>() / nf;
    let explained: T = coeffs.iter().map(|&c| c * c).sum();
    let tail = (total - explained).max(T::zero());
    FunctionVec::with_tail(coeffs, tail)
}
