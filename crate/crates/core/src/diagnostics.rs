//! Error decomposition and bound audits for targets with known derivatives.
//!
//! For a fit at `x` with `A = M + S` and `w = A^{-1} e_0`,
//!
//! ```text
//! g_hat - g(x) = B1 + B2 + B3 + V
//! B1 = -w^T S G                      (ridge bias)
//! B2 =  sum_local (w^T xi_j) R_D(j)   (finite-dimensional truncation)
//! B3 =  sum_local (w^T xi_j) R_S(j)   (Taylor remainder)
//! V  =  sum_local (w^T xi_j) eps_j    (noise)
//! ```
//!
//! where `G` holds the Taylor coefficients of the target at `x`. The split is
//! an algebraic identity once the stored noise realisations are supplied,
//! so its residual measures the assembly and the solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{assemble, local_coords, Dataset, EstimatorConfig, LocalDesign};
use crate::function_space::FunctionVec;
use crate::linalg::{Cholesky, SpdSystem};
use crate::poly_index::MultiIndexSet;
use crate::rng::{purpose, stream_rng};
use crate::scalar::Scalar;
use crate::simulation::{sample_covariates, GaussianCovariateModel, RegressionTarget};

/// Absolute slack added to every bound comparison.
pub const BOUND_SLACK: f64 = 1e-10;
/// Monte Carlo standard errors tolerated by statistical checks.
pub const MC_SIGMAS: f64 = 3.0;
/// Smallest acceptable pivot of the Monte Carlo second-moment matrix.
pub const MIN_MOMENT_PIVOT: f64 = 1e-12;
/// Largest Monte Carlo sample used by [`u0_monte_carlo`] before giving up.
pub const MAX_MOMENT_SAMPLES: usize = 10_000_000;

fn factorial<T: Scalar>(k: usize) -> T {
    (1..=k).fold(T::one(), |acc, q| acc * T::from_usize_lossy(q))
}

/// `R_S = g(X) - sum_{k<K} g^(k)(x; X-x, ..., X-x) / k!`.
pub fn remainder_rs<T: Scalar>(target: &RegressionTarget<T>, x: &FunctionVec<T>, xj: &FunctionVec<T>, k: usize) -> Result<T> {
    let h = xj.sub(x);
    Ok(target.value(xj) - target.taylor_along(x, &h, k)?)
}

/// `R_D`: Taylor sum along `X - x` minus the same sum along its projection on `phi_1..phi_J`.
pub fn remainder_rd<T: Scalar>(
    target: &RegressionTarget<T>,
    x: &FunctionVec<T>,
    xj: &FunctionVec<T>,
    j: usize,
    k: usize,
) -> Result<T> {
    let h = xj.sub(x);
    let head = FunctionVec::new(local_coords(xj, x, j))?;
    Ok(target.taylor_along(x, &h, k)? - target.taylor_along(x, &head, k)?)
}

/// Bound on `|R_D|` inside the ball:
/// `sum_{k=1}^{K-1} delta^{k-1} ||g^(k)(x;.)|| / (k-1)! * ||(X - x) beyond J||`.
pub fn truncation_bound<T: Scalar>(
    target: &RegressionTarget<T>,
    x: &FunctionVec<T>,
    xj: &FunctionVec<T>,
    j: usize,
    k: usize,
    delta: T,
) -> Result<T> {
    let (_, tail) = xj.sub(x).project_head(j);
    Ok(b2cond_sum(target, x, k, delta)? * tail.sqrt())
}

/// Bound on `|R_S|` inside the ball: `sup_y ||g^(K)(y;.)|| delta^K / K!`.
pub fn taylor_remainder_bound<T: Scalar>(target: &RegressionTarget<T>, x: &FunctionVec<T>, k: usize, delta: T) -> Result<T> {
    Ok(target.sup_derivative_norm(x, k, delta)? * delta.powi(k as i32) / factorial::<T>(k))
}

fn b2cond_sum<T: Scalar>(target: &RegressionTarget<T>, x: &FunctionVec<T>, k: usize, delta: T) -> Result<T> {
    let mut acc = T::zero();
    for order in 1..k {
        acc += delta.powi(order as i32 - 1) * target.derivative_norm(x, order)? / factorial::<T>(order - 1);
    }
    Ok(acc)
}

/// `sum_{k=1}^{K-1} delta^{k-1} ||g^(k)(x;.)|| / (k-1)!`.
pub fn b2cond_value<T: Scalar>(target: &RegressionTarget<T>, x: &FunctionVec<T>, cfg: &EstimatorConfig<T>) -> Result<T> {
    b2cond_sum(target, x, cfg.k, cfg.delta)
}

/// `G^T S G` and its bound `sum_{k<K} J^k ||g^(k)(x;.)||^2 / k!^2`.
pub fn ridge_energy<T: Scalar>(target: &RegressionTarget<T>, x: &FunctionVec<T>, set: &MultiIndexSet) -> Result<(T, T)> {
    let g = target.frechet_coefficients(x, set);
    let s: Vec<T> = set.ridge_diagonal();
    let energy = g.iter().zip(&s).map(|(&gk, &sk)| gk * gk * sk).sum();
    let jf = T::from_usize_lossy(set.dim());
    let mut bound = T::zero();
    for k in 0..set.degree_bound() {
        let nk = target.derivative_norm(x, k)?;
        let fk = factorial::<T>(k);
        bound += jf.powi(k as i32) * nk * nk / (fk * fk);
    }
    Ok((energy, bound))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport<T> {
    pub b1: T,
    pub b2: T,
    pub b3: T,
    pub v: T,
    pub g_hat: T,
    pub g_true: T,
    /// `|(g_hat - g(x)) - (B1 + B2 + B3 + V)|`.
    pub identity_residual: T,
    /// Local samples whose `R_D` or `R_S` exceeds its bound by more than [`BOUND_SLACK`].
    pub remainder_bound_violations: usize,
    /// `G^T S G`.
    pub ridge_energy: T,
    /// `e_0^T (M + S)^{-1} e_0`.
    pub variance_proxy: T,
    pub j: usize,
    pub k: usize,
    pub delta: T,
    pub n_local: usize,
}

/// Splits `g_hat - g(x)` into its four parts. `noise` holds the `eps_j` used to build the responses.
pub fn decompose_error<T: Scalar>(
    data: &Dataset<T>,
    x: &FunctionVec<T>,
    cfg: &EstimatorConfig<T>,
    target: &RegressionTarget<T>,
    noise: &[T],
) -> Result<DecompositionReport<T>> {
    if noise.len() != data.len() {
        return Err(Error::Data(format!(
            "{} noise realisations for {} samples",
            noise.len(),
            data.len()
        )));
    }
    let design = assemble(data, x, &cfg.clone().with_rows(true))?;
    decompose_design(&design, data, x, cfg, target, noise)
}

/// Same as [`decompose_error`] for an already assembled design (rows must be retained).
pub fn decompose_design<T: Scalar>(
    design: &LocalDesign<T>,
    data: &Dataset<T>,
    x: &FunctionVec<T>,
    cfg: &EstimatorConfig<T>,
    target: &RegressionTarget<T>,
    noise: &[T],
) -> Result<DecompositionReport<T>> {
    let rows = design
        .xi_rows()
        .ok_or_else(|| Error::config("retain_rows", "error decomposition needs the local monomial rows"))?;
    let set = design.index_set();
    let n = design.size();
    let system: SpdSystem<T> = design.factor()?;
    let alpha = system.solve(design.rhs())?.x;
    let mut e0 = vec![T::zero(); n];
    e0[0] = T::one();
    let w = system.solve(&e0)?.x;

    let g = target.frechet_coefficients(x, set);
    let b1 = -w
        .iter()
        .zip(design.ridge())
        .zip(&g)
        .map(|((&wi, &si), &gi)| wi * si * gi)
        .sum::<T>();

    let rs_bound = taylor_remainder_bound(target, x, cfg.k, cfg.delta)?;
    let slack = T::lit(BOUND_SLACK);
    let (mut b2, mut b3, mut v) = (T::zero(), T::zero(), T::zero());
    let mut violations = 0;
    for (row, &pos) in rows.iter().zip(design.local_indices()) {
        let xj = &data.covariates()[pos];
        let weight: T = w.iter().zip(row).map(|(&a, &b)| a * b).sum();
        let rd = remainder_rd(target, x, xj, cfg.j, cfg.k)?;
        let rs = remainder_rs(target, x, xj, cfg.k)?;
        let rd_bound = truncation_bound(target, x, xj, cfg.j, cfg.k, cfg.delta)?;
        if rd.abs() > rd_bound + slack || rs.abs() > rs_bound + slack {
            violations += 1;
        }
        b2 += weight * rd;
        b3 += weight * rs;
        v += weight * noise[pos];
    }

    let g_hat = alpha[0];
    let g_true = target.value(x);
    let identity_residual = ((g_hat - g_true) - (b1 + b2 + b3 + v)).abs();
    let ridge_energy = g
        .iter()
        .zip(design.ridge())
        .map(|(&gk, &sk)| gk * gk * sk)
        .sum();
    Ok(DecompositionReport {
        b1,
        b2,
        b3,
        v,
        g_hat,
        g_true,
        identity_residual,
        remainder_bound_violations: violations,
        ridge_energy,
        variance_proxy: w[0],
        j: cfg.j,
        k: cfg.k,
        delta: cfg.delta,
        n_local: design.n_local(),
    })
}

/// Monte Carlo estimate of `u0 = e_0^T M_n^{-1} e_0` against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub u0_hat: f64,
    /// Batch-means standard error of `u0_hat` (0 when a batch was singular).
    pub u0_se: f64,
    /// `c2 exp(8 c1 (K-1)) J^{(8 c1 + 2)(K-1)} / P[X in N]`.
    pub u0_bound: f64,
    pub u0_pass: bool,
    pub c1: f64,
    pub c2: f64,
    pub c2_star: f64,
    /// Monte Carlo sample size actually used.
    pub samples: usize,
    pub smallball_hat: f64,
    /// `e_0^T (M + S)^{-1} e_0` for the diagnosed dataset, when one is supplied.
    pub variance_proxy: Option<f64>,
    pub b2cond_value: Option<f64>,
}

const U0_BATCHES: usize = 10;

/// Estimates `u0` from `m` covariate draws, doubling `m` while the moment matrix is singular.
///
/// `c2_star` overrides the tight small-ball constant computed from the model.
pub fn u0_monte_carlo<T: Scalar>(
    model: &GaussianCovariateModel<T>,
    x: &FunctionVec<T>,
    cfg: &EstimatorConfig<T>,
    m: usize,
    seed: u64,
    c2_star: Option<f64>,
) -> Result<BoundsReport> {
    cfg.validate()?;
    let set = cfg.index_set()?;
    let size = set.len();
    let r2 = cfg.delta * cfg.delta;
    let mut m = m.max(U0_BATCHES);
    let mut attempt = 0u64;
    loop {
        let per_batch = m.div_ceil(U0_BATCHES);
        let mut batch_sums = vec![vec![0.0f64; size * size]; U0_BATCHES];
        let mut batch_counts = vec![0usize; U0_BATCHES];
        let mut row = vec![T::zero(); size];
        for (b, (sum, count)) in batch_sums.iter_mut().zip(batch_counts.iter_mut()).enumerate() {
            let mut rng = stream_rng(seed, &[purpose::MONTE_CARLO, attempt, b as u64]);
            for _ in 0..per_batch {
                let xi = model.sample_one(&mut rng);
                if xi.dist_sq(x) > r2 {
                    continue;
                }
                *count += 1;
                set.monomial_row_into(&local_coords(&xi, x, cfg.j), &mut row);
                for a in 0..size {
                    let ra = row[a].as_f64();
                    for c in a..size {
                        sum[a * size + c] += ra * row[c].as_f64();
                    }
                }
            }
        }
        let total_samples = per_batch * U0_BATCHES;
        let mut total = vec![0.0f64; size * size];
        for s in &batch_sums {
            for (t, v) in total.iter_mut().zip(s) {
                *t += v;
            }
        }
        let count: usize = batch_counts.iter().sum();
        let u0_of = |sum: &[f64], samples: usize| -> Option<f64> {
            let mut mat: Vec<f64> = sum.iter().map(|v| v / samples as f64).collect();
            for a in 0..size {
                for c in 0..a {
                    mat[a * size + c] = mat[c * size + a];
                }
            }
            let chol = Cholesky::factor(&mat, size, 0.0)?;
            if chol.pivot_range().0 < MIN_MOMENT_PIVOT {
                return None;
            }
            let mut e0 = vec![0.0; size];
            e0[0] = 1.0;
            Some(chol.solve(&e0)[0])
        };
        match u0_of(&total, total_samples) {
            Some(u0_hat) if count > 0 => {
                let batches: Option<Vec<f64>> = batch_sums.iter().map(|s| u0_of(s, per_batch)).collect();
                let u0_se = batches
                    .map(|b| {
                        let mean = b.iter().sum::<f64>() / b.len() as f64;
                        let var = b.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b.len() - 1) as f64;
                        (var / b.len() as f64).sqrt()
                    })
                    .unwrap_or(0.0);
                let smallball_hat = count as f64 / total_samples as f64;
                let c2_star = c2_star.unwrap_or_else(|| model.small_ball_constant(x, cfg.delta).as_f64());
                let c1 = 1.0 + 2.0 * c2_star;
                let c2 = 1.0;
                let km1 = (cfg.k - 1) as f64;
                let u0_bound = c2 * (8.0 * c1 * km1).exp() * (cfg.j as f64).powf((8.0 * c1 + 2.0) * km1) / smallball_hat;
                let u0_pass = u0_hat <= u0_bound + MC_SIGMAS * u0_se + BOUND_SLACK;
                return Ok(BoundsReport {
                    u0_hat,
                    u0_se,
                    u0_bound,
                    u0_pass,
                    c1,
                    c2,
                    c2_star,
                    samples: total_samples,
                    smallball_hat,
                    variance_proxy: None,
                    b2cond_value: None,
                });
            }
            _ => {
                if m >= MAX_MOMENT_SAMPLES {
                    return Err(Error::Numerical(format!(
                        "second-moment matrix stays singular after {total_samples} draws ({count} inside the ball)"
                    )));
                }
                m = (2 * m).min(MAX_MOMENT_SAMPLES);
                attempt += 1;
            }
        }
    }
}

/// Replication average of `e_0^T (M + S)^{-1} e_0` against `((2 - delta^2)/(1 - delta^2)) u0 / n`.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceProxyReport {
    pub n: usize,
    pub replications: usize,
    pub mean: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn variance_proxy_study<T: Scalar>(
    model: &GaussianCovariateModel<T>,
    x: &FunctionVec<T>,
    cfg: &EstimatorConfig<T>,
    n: usize,
    replications: usize,
    u0: f64,
    seed: u64,
) -> Result<VarianceProxyReport> {
    if replications < 2 {
        return Err(Error::config("replications", "need at least two replications"));
    }
    let values = (0..replications)
        .map(|r| {
            let xs = sample_covariates(model, n, seed, &[purpose::MONTE_CARLO, r as u64]);
            let data = Dataset::new(xs, vec![T::zero(); n])?;
            let design = assemble(&data, x, cfg)?;
            let system = design.factor()?;
            let mut e0 = vec![T::zero(); design.size()];
            e0[0] = T::one();
            Ok(system.solve(&e0)?.x[0].as_f64())
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / replications as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (replications - 1) as f64;
    let se = (var / replications as f64).sqrt();
    let d2 = cfg.delta.as_f64().powi(2);
    let bound = (2.0 - d2) / (1.0 - d2) * u0 / n as f64;
    Ok(VarianceProxyReport {
        n,
        replications,
        mean,
        se,
        bound,
        pass: mean <= bound + MC_SIGMAS * se + BOUND_SLACK,
    })
}

/// One diagonal entry of the conditional second-moment operator against its Gaussian bound.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCheck {
    pub j: usize,
    /// Monte Carlo `E(<X - x, phi_j>^2 | X in N)`.
    pub estimate: f64,
    pub se: f64,
    /// `<z, phi_j>^2 + lambda_j`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalMomentReport {
    pub draws: usize,
    pub conditioned: usize,
    pub diagonal: Vec<MomentCheck>,
    /// Tail sums `sum_{j > J}` for each `J < jmax`, with the same bound structure.
    pub tail_sums: Vec<MomentCheck>,
}

/// Conditional second moments `<phi_j, Gamma_N phi_j>` for `j <= jmax` from `draws` covariates.
pub fn conditional_moments<T: Scalar>(
    model: &GaussianCovariateModel<T>,
    x: &FunctionVec<T>,
    delta: T,
    jmax: usize,
    draws: usize,
    seed: u64,
) -> Result<ConditionalMomentReport> {
    let mut rng = stream_rng(seed, &[purpose::MONTE_CARLO]);
    let r2 = delta * delta;
    let rank = model.rank().max(jmax);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for _ in 0..draws {
        let xi = model.sample_one(&mut rng);
        if xi.dist_sq(x) <= r2 {
            samples.push((1..=rank).map(|l| (xi.coeff(l) - x.coeff(l)).as_f64().powi(2)).collect());
        }
    }
    let c = samples.len();
    if c < 2 {
        return Err(Error::Numerical(format!("only {c} of {draws} draws fell inside the ball")));
    }
    let z = model.offset(x);
    let bound_of = |l: usize| z.coeff(l).as_f64().powi(2) + model.eigenvalue(l).as_f64();
    let check = |vals: Vec<f64>, bound: f64, j: usize| {
        let mean = vals.iter().sum::<f64>() / c as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (c - 1) as f64;
        let se = (var / c as f64).sqrt();
        MomentCheck {
            j,
            estimate: mean,
            se,
            bound,
            pass: mean <= bound + MC_SIGMAS * se + BOUND_SLACK,
        }
    };
    let diagonal = (1..=jmax)
        .map(|l| check(samples.iter().map(|s| s[l - 1]).collect(), bound_of(l), l))
        .collect();
    let tail_sums = (1..jmax)
        .map(|jj| {
            let vals = samples.iter().map(|s| s[jj..].iter().sum()).collect();
            let bound = (jj + 1..=rank).map(bound_of).sum();
            check(vals, bound, jj)
        })
        .collect();
    Ok(ConditionalMomentReport {
        draws,
        conditioned: c,
        diagonal,
        tail_sums,
    })
}

/// Monte Carlo audit of the truncation and Taylor remainder bounds on draws inside the ball.
#[derive(Debug, Clone, Serialize)]
pub struct RemainderAudit {
    pub conditioned_draws: usize,
    pub attempts: usize,
    pub rd_violations: usize,
    pub rs_violations: usize,
    /// Largest `|R_D| / bound` seen (0 when every bound vanished).
    pub max_rd_ratio: f64,
    pub max_rs_ratio: f64,
}

pub fn remainder_audit<T: Scalar>(
    model: &GaussianCovariateModel<T>,
    target: &RegressionTarget<T>,
    x: &FunctionVec<T>,
    cfg: &EstimatorConfig<T>,
    conditioned_draws: usize,
    seed: u64,
) -> Result<RemainderAudit> {
    let mut rng = stream_rng(seed, &[purpose::MONTE_CARLO]);
    let r2 = cfg.delta * cfg.delta;
    let rs_bound = taylor_remainder_bound(target, x, cfg.k, cfg.delta)?;
    let slack = T::lit(BOUND_SLACK);
    let max_attempts = conditioned_draws.saturating_mul(1000).max(1000);
    let mut audit = RemainderAudit {
        conditioned_draws: 0,
        attempts: 0,
        rd_violations: 0,
        rs_violations: 0,
        max_rd_ratio: 0.0,
        max_rs_ratio: 0.0,
    };
    while audit.conditioned_draws < conditioned_draws {
        if audit.attempts >= max_attempts {
            return Err(Error::Numerical(format!(
                "only {} of {} conditioned draws after {} attempts",
                audit.conditioned_draws, conditioned_draws, audit.attempts
            )));
        }
        audit.attempts += 1;
        let xi = model.sample_one(&mut rng);
        if xi.dist_sq(x) > r2 {
            continue;
        }
        audit.conditioned_draws += 1;
        let rd = remainder_rd(target, x, &xi, cfg.j, cfg.k)?.abs();
        let rd_bound = truncation_bound(target, x, &xi, cfg.j, cfg.k, cfg.delta)?;
        let rs = remainder_rs(target, x, &xi, cfg.k)?.abs();
        if rd > rd_bound + slack {
            audit.rd_violations += 1;
        }
        if rs > rs_bound + slack {
            audit.rs_violations += 1;
        }
        if rd_bound > T::zero() {
            audit.max_rd_ratio = audit.max_rd_ratio.max((rd / rd_bound).as_f64());
        }
        if rs_bound > T::zero() {
            audit.max_rs_ratio = audit.max_rs_ratio.max((rs / rs_bound).as_f64());
        }
    }
    Ok(audit)
}
