//! Total-degree multi-index sets and the monomials built on them.
//!
//! The set for dimension `J` and degree bound `K` holds every `k` in `N_0^J`
//! with `|k| <= K - 1`, in graded-lexicographic order with the zero index
//! first. Within a grade, indices are ordered lexicographically descending,
//! so for `J = 2, K = 3` the order is
//! `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default limit on the number of indices in a set.
pub const DEFAULT_INDEX_CAP: u64 = 20_000;
/// Largest degree bound `K` accepted.
pub const MAX_DEGREE_BOUND: usize = 20;

/// Multi-index set `{k : |k| <= K - 1}` with multinomial weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    degree_bound: usize,
    indices: Vec<Vec<u32>>,
    multinomials: Vec<u64>,
    // For i > 0: indices[i] = indices[parent] + e_coord.
    parents: Vec<(usize, usize)>,
    grade_starts: Vec<usize>,
}

/// `binomial(n, k)` in `u128`, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `|k|! / (k_1! ... k_J!)`, exact with overflow detection.
pub fn multinomial(k: &[u32]) -> Result<u64> {
    let mut acc: u64 = 1;
    let mut running: u64 = 0;
    for &kl in k {
        running += kl as u64;
        let b = binomial(running, kl as u64)
            .and_then(|b| u64::try_from(b).ok())
            .ok_or_else(|| Error::Sizing(format!("multinomial of {k:?} overflows u64")))?;
        acc = acc
            .checked_mul(b)
            .ok_or_else(|| Error::Sizing(format!("multinomial of {k:?} overflows u64")))?;
    }
    Ok(acc)
}

/// `prod_l coords_l^{k_l}` with `0^0 = 1`.
pub fn monomial<T: Scalar>(coords: &[T], k: &[u32]) -> T {
    assert_eq!(coords.len(), k.len(), "monomial dimension mismatch");
    coords
        .iter()
        .zip(k)
        .filter(|(_, &e)| e > 0)
        .fold(T::one(), |acc, (&c, &e)| acc * c.powi(e as i32))
}

fn push_compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        push_compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl MultiIndexSet {
    /// Enumerates the set for dimension `j` and degree bound `k` with the default cap.
    pub fn enumerate(j: usize, k: usize) -> Result<Self> {
        Self::enumerate_with_cap(j, k, DEFAULT_INDEX_CAP)
    }

    pub fn enumerate_with_cap(j: usize, k: usize, cap: u64) -> Result<Self> {
        if j == 0 || k == 0 {
            return Err(Error::config("J/K", format!("J and K must be positive, got J={j}, K={k}")));
        }
        if k > MAX_DEGREE_BOUND {
            return Err(Error::Sizing(format!("K={k} exceeds the supported maximum {MAX_DEGREE_BOUND}")));
        }
        let count = binomial((j + k - 1) as u64, j as u64).unwrap_or(u128::MAX);
        if count > cap as u128 {
            return Err(Error::Sizing(format!(
                "binomial(J+K-1, J) = {count} indices for J={j}, K={k} exceeds the cap {cap}"
            )));
        }

        let mut indices = Vec::with_capacity(count as usize);
        let mut grade_starts = Vec::with_capacity(k + 1);
        let mut prefix = Vec::with_capacity(j);
        for grade in 0..k as u32 {
            grade_starts.push(indices.len());
            push_compositions(grade, j, &mut prefix, &mut indices);
        }
        grade_starts.push(indices.len());

        let lookup: HashMap<&[u32], usize> = indices.iter().enumerate().map(|(i, v)| (v.as_slice(), i)).collect();
        let mut parents = Vec::with_capacity(indices.len());
        parents.push((0, 0));
        for idx in indices.iter().skip(1) {
            let coord = idx.iter().position(|&e| e > 0).expect("nonzero index");
            let mut parent = idx.clone();
            parent[coord] -= 1;
            parents.push((lookup[parent.as_slice()], coord));
        }

        let multinomials = indices.iter().map(|idx| multinomial(idx)).collect::<Result<Vec<_>>>()?;

        Ok(MultiIndexSet {
            dim: j,
            degree_bound: k,
            indices,
            multinomials,
            parents,
            grade_starts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The degree bound `K`; polynomials have degree at most `K - 1`.
    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn index(&self, i: usize) -> &[u32] {
        &self.indices[i]
    }

    pub fn multinomials(&self) -> &[u64] {
        &self.multinomials
    }

    /// Total degree of the `i`-th index.
    pub fn grade(&self, i: usize) -> usize {
        self.grade_starts.partition_point(|&s| s <= i) - 1
    }

    /// Positions of all indices with total degree `grade`.
    pub fn grade_range(&self, grade: usize) -> std::ops::Range<usize> {
        self.grade_starts[grade]..self.grade_starts[grade + 1]
    }

    /// Diagonal of the Tikhonov regularizer: `1 / multinomial(k)`.
    pub fn ridge_diagonal<T: Scalar>(&self) -> Vec<T> {
        self.multinomials
            .iter()
            .map(|&m| T::one() / T::from_u64(m).unwrap_or_else(T::max_value))
            .collect()
    }

    /// All monomials of `coords` in set order.
    pub fn monomial_row<T: Scalar>(&self, coords: &[T]) -> Vec<T> {
        let mut row = vec![T::zero(); self.len()];
        self.monomial_row_into(coords, &mut row);
        row
    }

    /// Writes the monomial row into `out` (length must equal the set size).
    pub fn monomial_row_into<T: Scalar>(&self, coords: &[T], out: &mut [T]) {
        assert_eq!(coords.len(), self.dim, "coordinate dimension mismatch");
        assert_eq!(out.len(), self.len());
        out[0] = T::one();
        for i in 1..out.len() {
            let (parent, coord) = self.parents[i];
            out[i] = out[parent] * coords[coord];
        }
    }

    /// Position of `k` in the set, if present.
    pub fn position(&self, k: &[u32]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let grade: u32 = k.iter().sum();
        if grade as usize >= self.degree_bound {
            return None;
        }
        self.grade_range(grade as usize).find(|&i| self.indices[i] == k)
    }
}
