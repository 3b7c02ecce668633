//! Small dense symmetric solvers used by the estimator.
//!
//! Matrices are row-major `n x n` slices. The primary path is a Cholesky
//! factorization; when a pivot loses positivity the solve falls back to an
//! LDL^T factorization with symmetric diagonal pivoting. Both paths finish
//! with iterative refinement against the original matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How a symmetric system was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Cholesky,
    PivotedLdlt,
}

/// Lower-triangular Cholesky factor, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors `a`; fails if a pivot drops below `min_pivot` (relative to the diagonal scale).
    pub fn factor(a: &[T], n: usize, min_pivot: T) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max).max(T::min_positive_value());
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for p in 0..j {
                    s -= l[i * n + p] * l[j * n + p];
                }
                if i == j {
                    if !(s > min_pivot * scale) {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in 0..i {
                s -= self.l[i * n + p] * y[p];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..n {
                s -= self.l[p * n + i] * y[p];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Smallest and largest squared diagonal of the factor.
    pub fn pivot_range(&self) -> (T, T) {
        let n = self.n;
        (0..n).fold((T::infinity(), T::zero()), |(lo, hi), i| {
            let d = self.l[i * n + i] * self.l[i * n + i];
            (lo.min(d), hi.max(d))
        })
    }
}

/// `P A P^T = L D L^T` with symmetric diagonal pivoting.
#[derive(Debug, Clone)]
pub struct PivotedLdlt<T> {
    n: usize,
    perm: Vec<usize>,
    l: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> PivotedLdlt<T> {
    pub fn factor(a: &[T], n: usize) -> Option<Self> {
        let mut work = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = vec![T::zero(); n * n];
        let mut d = vec![T::zero(); n];
        for k in 0..n {
            // largest remaining diagonal in magnitude
            let (piv, _) = (k..n)
                .map(|i| (i, work[i * n + i].abs()))
                .fold((k, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv != k {
                for c in 0..n {
                    work.swap(k * n + c, piv * n + c);
                }
                for r in 0..n {
                    work.swap(r * n + k, r * n + piv);
                }
                for c in 0..k {
                    l.swap(k * n + c, piv * n + c);
                }
                perm.swap(k, piv);
            }
            let dk = work[k * n + k];
            if dk == T::zero() || !dk.is_finite() {
                return None;
            }
            d[k] = dk;
            l[k * n + k] = T::one();
            for i in k + 1..n {
                l[i * n + k] = work[i * n + k] / dk;
            }
            for i in k + 1..n {
                for j in k + 1..=i {
                    let upd = l[i * n + k] * dk * l[j * n + k];
                    work[i * n + j] -= upd;
                    if i != j {
                        work[j * n + i] -= upd;
                    }
                }
            }
        }
        Some(PivotedLdlt { n, perm, l, d })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for p in 0..i {
                let v = self.l[i * n + p] * y[p];
                y[i] -= v;
            }
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for p in i + 1..n {
                let v = self.l[p * n + i] * y[p];
                y[i] -= v;
            }
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    pub fn pivot_range(&self) -> (T, T) {
        self.d
            .iter()
            .fold((T::infinity(), T::zero()), |(lo, hi), &v| (lo.min(v.abs()), hi.max(v.abs())))
    }
}

pub fn mat_vec<T: Scalar>(a: &[T], n: usize, x: &[T]) -> Vec<T> {
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().zip(x).map(|(&aij, &xj)| aij * xj).sum())
        .collect()
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

enum Factor<T> {
    Chol(Cholesky<T>),
    Ldlt(PivotedLdlt<T>),
}

impl<T: Scalar> Factor<T> {
    fn solve(&self, b: &[T]) -> Vec<T> {
        match self {
            Factor::Chol(c) => c.solve(b),
            Factor::Ldlt(f) => f.solve(b),
        }
    }
}

/// A factored symmetric positive-definite matrix that can be reused for several right sides.
pub struct SpdSystem<T> {
    a: Vec<T>,
    n: usize,
    factor: Factor<T>,
    method: SolveMethod,
    condition_proxy: T,
}

/// Outcome of a refined solve.
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub x: Vec<T>,
    pub residual_norm: T,
}

const REFINEMENT_STEPS: usize = 3;

impl<T: Scalar> SpdSystem<T> {
    /// Factors `a` (row-major, symmetric). Cholesky first, pivoted LDL^T if a pivot
    /// falls below `1e-10` of the diagonal scale.
    pub fn new(a: Vec<T>, n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Data(format!("matrix has {} entries, expected {}", a.len(), n * n)));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite entry in system matrix".into()));
        }
        let (factor, method, (lo, hi)) = match Cholesky::factor(&a, n, T::lit(1e-10)) {
            Some(c) => {
                let r = c.pivot_range();
                (Factor::Chol(c), SolveMethod::Cholesky, r)
            }
            None => {
                let f = PivotedLdlt::factor(&a, n)
                    .ok_or_else(|| Error::Numerical("symmetric system is singular".into()))?;
                let r = f.pivot_range();
                (Factor::Ldlt(f), SolveMethod::PivotedLdlt, r)
            }
        };
        let condition_proxy = if lo > T::zero() { hi / lo } else { T::infinity() };
        Ok(SpdSystem {
            a,
            n,
            factor,
            method,
            condition_proxy,
        })
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    /// Ratio of largest to smallest factorization pivot.
    pub fn condition_proxy(&self) -> T {
        self.condition_proxy
    }

    pub fn matrix(&self) -> &[T] {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` followed by a few steps of iterative refinement.
    pub fn solve(&self, b: &[T]) -> Result<Solution<T>> {
        if b.len() != self.n {
            return Err(Error::Data(format!("right side has length {}, expected {}", b.len(), self.n)));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite entry in right side".into()));
        }
        let mut x = self.factor.solve(b);
        let mut r = self.residual(&x, b);
        let mut rnorm = norm2(&r);
        for _ in 0..REFINEMENT_STEPS {
            if rnorm == T::zero() {
                break;
            }
            let dx = self.factor.solve(&r);
            let cand: Vec<T> = x.iter().zip(&dx).map(|(&xi, &di)| xi + di).collect();
            let cand_r = self.residual(&cand, b);
            let cand_norm = norm2(&cand_r);
            if cand_norm < rnorm {
                x = cand;
                r = cand_r;
                rnorm = cand_norm;
            } else {
                break;
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("solution is not finite".into()));
        }
        Ok(Solution { x, residual_norm: rnorm })
    }

    /// `b - A x`.
    fn residual(&self, x: &[T], b: &[T]) -> Vec<T> {
        let ax = mat_vec(&self.a, self.n, x);
        b.iter().zip(ax).map(|(&bi, axi)| bi - axi).collect()
    }
}
