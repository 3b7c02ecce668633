//! The ridge-regularised functional local polynomial estimator.
//!
//! For a site `x` the local design collects, over the samples inside the ball
//! `||X_j - x|| <= delta`, the monomial rows `xi_j` of the projected
//! coordinates `<X_j - x, phi_l>`, `l <= J`:
//!
//! ```text
//! M = sum_j xi_j xi_j^T,   Y = sum_j xi_j Y_j,   S = diag(1 / multinomial(k)).
//! ```
//!
//! The estimate is the first component of `(M + S)^{-1} Y`. `M` is positive
//! semidefinite and `S` positive diagonal, so the system is always SPD.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function_space::{Basis, FunctionVec};
use crate::linalg::{norm2, SolveMethod, SpdSystem};
use crate::poly_index::{MultiIndexSet, DEFAULT_INDEX_CAP};
use crate::scalar::Scalar;

/// Paired functional covariates and scalar responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    covariates: Vec<FunctionVec<T>>,
    responses: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(covariates: Vec<FunctionVec<T>>, responses: Vec<T>) -> Result<Self> {
        if covariates.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        if covariates.len() != responses.len() {
            return Err(Error::Data(format!(
                "{} covariates but {} responses",
                covariates.len(),
                responses.len()
            )));
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(Error::Data("non-finite response".into()));
        }
        Ok(Dataset { covariates, responses })
    }

    pub fn covariates(&self) -> &[FunctionVec<T>] {
        &self.covariates
    }

    pub fn responses(&self) -> &[T] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Keeps the samples whose positions are listed, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        Dataset::new(
            positions.iter().map(|&i| self.covariates[i].clone()).collect(),
            positions.iter().map(|&i| self.responses[i]).collect(),
        )
    }
}

/// Tuning of one local fit.
#[derive(Debug, Clone)]
pub struct EstimatorConfig<T> {
    /// Number of projected coordinates.
    pub j: usize,
    /// Degree bound; the local polynomial has degree at most `k - 1`.
    pub k: usize,
    /// Neighbourhood radius, in (0, 1).
    pub delta: T,
    pub basis: Basis<T>,
    /// Keep per-sample monomial rows in the design (needed by diagnostics).
    pub retain_rows: bool,
    pub index_cap: u64,
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn new(j: usize, k: usize, delta: T) -> Result<Self> {
        let cfg = EstimatorConfig {
            j,
            k,
            delta,
            basis: Basis::TrigonometricFourier,
            retain_rows: false,
            index_cap: DEFAULT_INDEX_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_rows(mut self, retain: bool) -> Self {
        self.retain_rows = retain;
        self
    }

    pub fn with_basis(mut self, basis: Basis<T>) -> Self {
        self.basis = basis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(Error::config("J", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::config("K", "must be at least 1"));
        }
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::config("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn index_set(&self) -> Result<MultiIndexSet> {
        MultiIndexSet::enumerate_with_cap(self.j, self.k, self.index_cap)
    }
}

/// `[ ||X_j - x||^2 <= delta^2 ]` for every covariate, tail mass included.
pub fn neighborhood_mask<T: Scalar>(covariates: &[FunctionVec<T>], x: &FunctionVec<T>, delta: T) -> Vec<bool> {
    let r2 = delta * delta;
    covariates.iter().map(|xj| xj.dist_sq(x) <= r2).collect()
}

/// Coordinates `(<X - x, phi_1>, ..., <X - x, phi_J>)`.
pub fn local_coords<T: Scalar>(xj: &FunctionVec<T>, x: &FunctionVec<T>, j: usize) -> Vec<T> {
    (1..=j).map(|l| xj.coeff(l) - x.coeff(l)).collect()
}

/// Normal-equation data of one local fit.
#[derive(Debug, Clone)]
pub struct LocalDesign<T> {
    index_set: MultiIndexSet,
    gram: Vec<T>,
    ridge: Vec<T>,
    rhs: Vec<T>,
    local_indices: Vec<usize>,
    xi_rows: Option<Vec<Vec<T>>>,
}

impl<T: Scalar> LocalDesign<T> {
    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    /// Number of unknowns `|K|`.
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    /// `M`, row-major.
    pub fn gram(&self) -> &[T] {
        &self.gram
    }

    /// Diagonal of `S`.
    pub fn ridge(&self) -> &[T] {
        &self.ridge
    }

    /// The right side `Y`.
    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn n_local(&self) -> usize {
        self.local_indices.len()
    }

    /// Dataset positions of the samples inside the neighbourhood, ascending.
    pub fn local_indices(&self) -> &[usize] {
        &self.local_indices
    }

    /// Monomial rows of the local samples, when retained.
    pub fn xi_rows(&self) -> Option<&[Vec<T>]> {
        self.xi_rows.as_deref()
    }

    /// `M + S`, row-major.
    pub fn system_matrix(&self) -> Vec<T> {
        let n = self.size();
        let mut a = self.gram.clone();
        for (i, &s) in self.ridge.iter().enumerate() {
            a[i * n + i] += s;
        }
        a
    }

    /// Factors `M + S` for repeated solves.
    pub fn factor(&self) -> Result<SpdSystem<T>> {
        SpdSystem::new(self.system_matrix(), self.size())
    }
}

/// Builds `M`, `S` and `Y` for the site `x`, accumulating in dataset order.
pub fn assemble<T: Scalar>(data: &Dataset<T>, x: &FunctionVec<T>, cfg: &EstimatorConfig<T>) -> Result<LocalDesign<T>> {
    cfg.validate()?;
    let index_set = cfg.index_set()?;
    let n = index_set.len();
    let mut gram = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    let mut local_indices = Vec::new();
    let mut rows = cfg.retain_rows.then(Vec::new);
    let mut row = vec![T::zero(); n];
    let r2 = cfg.delta * cfg.delta;

    for (pos, (xj, &yj)) in data.covariates.iter().zip(&data.responses).enumerate() {
        if xj.dist_sq(x) > r2 {
            continue;
        }
        let coords = local_coords(xj, x, cfg.j);
        index_set.monomial_row_into(&coords, &mut row);
        for a in 0..n {
            let ra = row[a];
            if ra == T::zero() {
                continue;
            }
            for b in a..n {
                gram[a * n + b] += ra * row[b];
            }
            rhs[a] += ra * yj;
        }
        local_indices.push(pos);
        if let Some(rows) = rows.as_mut() {
            rows.push(row.clone());
        }
    }
    for a in 0..n {
        for b in 0..a {
            gram[a * n + b] = gram[b * n + a];
        }
    }
    let ridge = index_set.ridge_diagonal();
    Ok(LocalDesign {
        index_set,
        gram,
        ridge,
        rhs,
        local_indices,
        xi_rows: rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    /// Largest over smallest factorization pivot of `M + S`.
    pub condition_proxy: f64,
    pub method: SolveMethod,
    /// `||(M + S) alpha - Y||` after refinement.
    pub residual_norm: f64,
}

/// Output of one local fit.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult<T> {
    pub g_hat: T,
    pub alpha: Vec<T>,
    pub n_local: usize,
    /// Coefficients on the degree-one indices: naive first-derivative coordinates.
    pub gradient: Vec<T>,
    pub solver_report: SolverReport,
}

/// Solves `(M + S) alpha = Y`.
pub fn solve<T: Scalar>(design: &LocalDesign<T>) -> Result<EstimateResult<T>> {
    let system = design.factor()?;
    let sol = system.solve(&design.rhs)?;
    let tol = T::lit(1e-10 * (T::EPSILON_F64 / f64::EPSILON).max(1.0)) * norm2(&design.rhs);
    if sol.residual_norm > tol {
        log::warn!(
            "residual {} exceeds {} after refinement (condition proxy {})",
            sol.residual_norm,
            tol,
            system.condition_proxy()
        );
    }
    let gradient = if design.index_set.degree_bound() > 1 {
        design.index_set.grade_range(1).map(|i| sol.x[i]).collect()
    } else {
        Vec::new()
    };
    Ok(EstimateResult {
        g_hat: sol.x[0],
        alpha: sol.x,
        n_local: design.n_local(),
        gradient,
        solver_report: SolverReport {
            condition_proxy: system.condition_proxy().as_f64(),
            method: system.method(),
            residual_norm: sol.residual_norm.as_f64(),
        },
    })
}

/// `assemble` followed by `solve`.
pub fn estimate_at<T: Scalar>(data: &Dataset<T>, x: &FunctionVec<T>, cfg: &EstimatorConfig<T>) -> Result<EstimateResult<T>> {
    solve(&assemble(data, x, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(c: &[f64]) -> FunctionVec<f64> {
        FunctionVec::new(c.to_vec()).unwrap()
    }

    fn small_dataset() -> Dataset<f64> {
        let xs = vec![fv(&[0.1, 0.0]), fv(&[0.0, 0.2]), fv(&[2.0, 0.0]), fv(&[-0.1, -0.1])];
        Dataset::new(xs, vec![1.0, 2.0, 50.0, 3.0]).unwrap()
    }

    #[test]
    fn mask_examples() {
        let x = fv(&[0.0, 0.0]);
        assert_eq!(neighborhood_mask(&[x.clone()], &x, 1e-9), vec![true]);
        assert_eq!(neighborhood_mask(&[fv(&[0.3, 0.4])], &x, 0.4), vec![false]);
        // distances 0.5, 0.3, 1.0, sqrt(0.1)~0.316, tail 0.2
        let curves = vec![
            fv(&[0.3, 0.4]),
            fv(&[0.0, 0.3]),
            fv(&[0.6, 0.8]),
            fv(&[0.1, 0.3]),
            FunctionVec::with_tail(vec![0.0], 0.04).unwrap(),
        ];
        assert_eq!(neighborhood_mask(&curves, &x, 0.32), vec![false, true, false, true, true]);
    }

    #[test]
    fn constant_fit_reduces_to_ridged_mean() {
        let data = small_dataset();
        let x = fv(&[0.0, 0.0]);
        let cfg = EstimatorConfig::new(2, 1, 0.5).unwrap();
        let d = assemble(&data, &x, &cfg).unwrap();
        assert_eq!(d.gram(), &[3.0]);
        assert_eq!(d.rhs(), &[6.0]);
        assert_eq!(d.ridge(), &[1.0]);
        let r = solve(&d).unwrap();
        assert!((r.g_hat - 1.5).abs() < 1e-12);
        assert!(r.gradient.is_empty());
    }

    #[test]
    fn empty_neighborhood_returns_zero() {
        let data = small_dataset();
        let x = fv(&[10.0, 0.0]);
        let cfg = EstimatorConfig::new(2, 3, 0.5).unwrap();
        let d = assemble(&data, &x, &cfg).unwrap();
        assert_eq!(d.n_local(), 0);
        assert!(d.gram().iter().all(|&v| v == 0.0));
        assert!(d.rhs().iter().all(|&v| v == 0.0));
        let r = solve(&d).unwrap();
        assert_eq!(r.g_hat, 0.0);
        assert!(r.alpha.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_point_doubles_gram() {
        let x = fv(&[0.0, 0.0]);
        let p = fv(&[0.2, -0.1]);
        let cfg = EstimatorConfig::new(2, 3, 0.5).unwrap();
        let one = assemble(&Dataset::new(vec![p.clone()], vec![1.0]).unwrap(), &x, &cfg).unwrap();
        let two = assemble(&Dataset::new(vec![p.clone(), p], vec![1.0, 1.0]).unwrap(), &x, &cfg).unwrap();
        for (a, b) in one.gram().iter().zip(two.gram()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn ridge_diagonal_and_symmetry() {
        let data = small_dataset();
        let cfg = EstimatorConfig::new(2, 3, 0.5).unwrap().with_rows(true);
        let d = assemble(&data, &fv(&[0.0, 0.0]), &cfg).unwrap();
        assert_eq!(d.ridge()[0], 1.0);
        assert!(d.ridge().iter().all(|&s| s > 0.0 && s <= 1.0));
        let n = d.size();
        for a in 0..n {
            for b in 0..n {
                assert_eq!(d.gram()[a * n + b], d.gram()[b * n + a]);
            }
        }
        assert_eq!(d.xi_rows().unwrap().len(), 3);
        assert_eq!(d.local_indices(), &[0, 1, 3]);
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::<f64>::new(2, 2, 1.0).is_err());
        assert!(EstimatorConfig::<f64>::new(2, 2, 0.0).is_err());
        assert!(EstimatorConfig::<f64>::new(0, 2, 0.5).is_err());
        assert!(EstimatorConfig::<f64>::new(2, 0, 0.5).is_err());
        assert!(Dataset::<f64>::new(vec![], vec![]).is_err());
        assert!(Dataset::new(vec![fv(&[1.0])], vec![]).is_err());
    }

    #[test]
    fn gradient_reads_degree_one_coefficients() {
        // noiseless linear response y = 2 c_1 - c_2 around x = 0
        let xs: Vec<_> = (0..40)
            .map(|i| {
                let a = (i as f64 * 0.37).sin() * 0.3;
                let b = (i as f64 * 0.91).cos() * 0.3;
                fv(&[a, b])
            })
            .collect();
        let ys: Vec<f64> = xs.iter().map(|f| 2.0 * f.coeff(1) - f.coeff(2)).collect();
        let data = Dataset::new(xs, ys).unwrap();
        let cfg = EstimatorConfig::new(2, 2, 0.9).unwrap();
        let r = estimate_at(&data, &fv(&[0.0, 0.0]), &cfg).unwrap();
        assert_eq!(r.gradient.len(), 2);
        assert!(r.gradient[0] > 1.0 && r.gradient[1] < -0.3);
    }

    #[test]
    fn single_precision_estimate() {
        let xs = vec![
            FunctionVec::<f32>::new(vec![0.1, 0.0]).unwrap(),
            FunctionVec::<f32>::new(vec![0.0, 0.2]).unwrap(),
        ];
        let data = Dataset::new(xs, vec![1.0f32, 2.0]).unwrap();
        let cfg = EstimatorConfig::<f32>::new(2, 1, 0.5).unwrap();
        let r = estimate_at(&data, &FunctionVec::zeros(2), &cfg).unwrap();
        assert!((r.g_hat - 1.0).abs() < 1e-6);
    }
}
