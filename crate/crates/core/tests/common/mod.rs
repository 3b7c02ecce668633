//! Exact rational solve of the local normal equations, shared by test targets.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use funloc::function_space::FunctionVec;
use funloc::Dataset;

fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// All `k` in `{0..K-1}^J` with `|k| <= K-1`, in no particular order.
fn brute_indices(j: usize, k: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..j {
        let mut next = Vec::new();
        for p in &out {
            let used: u32 = p.iter().sum();
            for e in 0..(k as u32 - used) {
                let mut q = p.clone();
                q.push(e);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, b| a * BigInt::from(b))
}

fn rat_pow(x: &BigRational, e: u32) -> BigRational {
    (0..e).fold(BigRational::one(), |a, _| a * x)
}

/// Gauss-Jordan elimination in exact arithmetic; `None` when singular.
fn rational_solve(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, p);
        b.swap(c, p);
        let inv = BigRational::one() / a[c][c].clone();
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone() * &inv;
                for cc in c..n {
                    let d = f.clone() * &a[c][cc];
                    a[r][cc] -= d;
                }
                let d = f * &b[c];
                b[r] -= d;
            }
        }
    }
    Some((0..n).map(|i| b[i].clone() / a[i][i].clone()).collect())
}

pub struct OracleFit {
    pub indices: Vec<Vec<u32>>,
    pub alpha: Vec<f64>,
    pub n_local: usize,
}

/// Exact `(M + ridge * S)^{-1} Y` from the raw coefficients.
pub fn oracle(data: &Dataset, x: &FunctionVec<f64>, j: usize, k: usize, delta: f64, ridge: bool) -> Option<OracleFit> {
    let indices = brute_indices(j, k);
    let p = indices.len();
    let width = data.covariates().iter().map(|c| c.len()).max().unwrap().max(x.len());
    let r2 = rat(delta) * rat(delta);
    let mut m = vec![vec![BigRational::zero(); p]; p];
    let mut y = vec![BigRational::zero(); p];
    let mut n_local = 0;
    for (xj, &yj) in data.covariates().iter().zip(data.responses()) {
        let diffs: Vec<BigRational> = (1..=width).map(|l| rat(xj.coeff(l)) - rat(x.coeff(l))).collect();
        let mut d2 = rat(xj.tail_norm_sq()) + rat(x.tail_norm_sq());
        for d in &diffs {
            d2 += d * d;
        }
        if d2 > r2 {
            continue;
        }
        n_local += 1;
        let xi: Vec<BigRational> = indices
            .iter()
            .map(|kk| kk.iter().enumerate().fold(BigRational::one(), |a, (l, &e)| a * rat_pow(&diffs[l], e)))
            .collect();
        for a in 0..p {
            for b in 0..p {
                m[a][b] += &xi[a] * &xi[b];
            }
            y[a] += &xi[a] * rat(yj);
        }
    }
    if ridge {
        for (a, kk) in indices.iter().enumerate() {
            let total: u32 = kk.iter().sum();
            let denom = kk.iter().fold(BigInt::one(), |acc, &e| acc * factorial(e));
            m[a][a] += BigRational::new(denom, factorial(total));
        }
    }
    let alpha = rational_solve(m, y)?;
    Some(OracleFit {
        indices,
        alpha: alpha.iter().map(|v| v.to_f64().unwrap()).collect(),
        n_local,
    })
}

impl OracleFit {
    /// Coefficient of the zero multi-index, i.e. the estimate of `g(x)`.
    pub fn intercept(&self) -> f64 {
        let zero = self.indices.iter().position(|k| k.iter().all(|&e| e == 0)).unwrap();
        self.alpha[zero]
    }
}
