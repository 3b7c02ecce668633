//! Monte Carlo rate studies.
//!
//! A study sweeps the sample size over a grid, draws `R` independent datasets
//! per size, evaluates every arm (the tuned fit, the locally constant
//! baseline `K = 1`, and any fixed `(J, K)` arms) on the same data, and fits
//! the empirical exponent `kappa` in `median |g_hat(x) - g(x)|^2 ~ n^{-kappa}`.
//!
//! Replications are independent tasks; each draws from its own random stream
//! keyed by `(seed, n_index, replication)` and results are aggregated in
//! index order, so output does not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{estimate_at, Dataset, EstimatorConfig};
use crate::function_space::FunctionVec;
use crate::scalar::Scalar;
use crate::simulation::{simulate, GaussianCovariateModel, NoiseModel, RegressionTarget};

/// Fraction of empty-neighbourhood replications at one `n` that aborts a study.
pub const MAX_EMPTY_FRACTION: f64 = 0.2;
pub const DEFAULT_SMALLBALL_FLOOR: f64 = 0.05;

/// Growth rule for `J` and `K` with the sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningRule {
    pub d0: f64,
    pub d1: f64,
    /// Eigenvalue decay exponent of the covariate model.
    pub gamma: f64,
    pub c1: f64,
    pub j_override: Option<usize>,
    pub k_override: Option<usize>,
}

impl TuningRule {
    pub fn new(d0: f64, d1: f64, gamma: f64, c1: f64) -> Self {
        TuningRule {
            d0,
            d1,
            gamma,
            c1,
            j_override: None,
            k_override: None,
        }
    }

    pub fn with_overrides(mut self, j: Option<usize>, k: Option<usize>) -> Self {
        self.j_override = j;
        self.k_override = k;
        self
    }
}

/// `J(n) = max(2, ceil((log n)^D0))`, `K(n) = max(1, floor(D1 log n / log log n))`; overrides win.
pub fn tune(n: usize, rule: &TuningRule) -> Result<(usize, usize)> {
    if n < 10 {
        return Err(Error::config("n", format!("tuning needs n >= 10, got {n}")));
    }
    let ln = (n as f64).ln();
    let j = rule
        .j_override
        .unwrap_or_else(|| (ln.powf(rule.d0).ceil() as usize).max(2));
    let k = rule
        .k_override
        .unwrap_or_else(|| ((rule.d1 * ln / ln.ln()).floor() as usize).max(1));
    Ok((j, k))
}

/// Rate conditions on `(gamma, D0, D1, c1)`.
///
/// `cond2_printed` evaluates the published second condition literally, which
/// cannot hold together with `(4 c1 + 1) D0 < 1`; `cond2_derived` uses the
/// sign that follows from the Stirling exponent and is the one enforced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    /// `gamma * D0 > 1`.
    pub cond1: bool,
    pub cond1_value: f64,
    /// `(4 c1 + 1) D0 < 1` and `2 D1 ((4 c1 + 1) D0 - 1) > 1`.
    pub cond2_printed: bool,
    pub cond2_printed_value: f64,
    /// `2 D1 (1 - (4 c1 + 1) D0) > 1`.
    pub cond2_derived: bool,
    pub cond2_derived_value: f64,
    /// `(8 c1 + 3) D0 D1 < 1`.
    pub cond3: bool,
    pub cond3_value: f64,
    /// `1 - (8 c1 + 3) D0 D1`.
    pub kappa_target: f64,
    pub all_hold: bool,
}

pub fn check_conditions(rule: &TuningRule) -> ConditionCheck {
    let TuningRule { d0, d1, gamma, c1, .. } = *rule;
    let cond1_value = gamma * d0;
    let a = (4.0 * c1 + 1.0) * d0;
    let cond2_printed_value = 2.0 * d1 * (a - 1.0);
    let cond2_derived_value = 2.0 * d1 * (1.0 - a);
    let cond3_value = (8.0 * c1 + 3.0) * d0 * d1;
    let cond1 = cond1_value > 1.0;
    let cond2_derived = cond2_derived_value > 1.0;
    let cond3 = cond3_value < 1.0;
    ConditionCheck {
        cond1,
        cond1_value,
        cond2_printed: a < 1.0 && cond2_printed_value > 1.0,
        cond2_printed_value,
        cond2_derived,
        cond2_derived_value,
        cond3,
        cond3_value,
        kappa_target: 1.0 - cond3_value,
        all_hold: cond1 && cond2_derived && cond3,
    }
}

/// Least-squares fit of `log err` on `log n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Negative slope.
    pub kappa: f64,
    pub intercept: f64,
    pub used: usize,
    /// Points dropped because their error was not positive.
    pub excluded: usize,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, e)| *n > 0.0 && *e > 0.0 && e.is_finite())
        .map(|&(n, e)| (n.ln(), e.ln()))
        .collect();
    let excluded = points.len() - usable.len();
    if excluded > 0 {
        log::warn!("{excluded} nonpositive error values excluded from the rate fit");
    }
    if usable.len() < 3 {
        return Err(Error::Numerical(format!(
            "rate fit needs at least 3 positive points, have {}",
            usable.len()
        )));
    }
    let m = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("rate fit needs at least two distinct sample sizes".into()));
    }
    let slope = sxy / sxx;
    Ok(RateFit {
        kappa: -slope,
        intercept: my - slope * mx,
        used: usable.len(),
        excluded,
    })
}

/// Something that turns a dataset into a point estimate at `x`.
pub trait PointEstimator<T>: Sync {
    /// Returns the estimate and the number of samples in the neighbourhood.
    fn estimate(&self, data: &Dataset<T>, x: &FunctionVec<T>, cfg: &EstimatorConfig<T>) -> Result<(T, usize)>;
}

/// The functional local polynomial estimator.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalPolynomial;

impl<T: Scalar> PointEstimator<T> for LocalPolynomial {
    fn estimate(&self, data: &Dataset<T>, x: &FunctionVec<T>, cfg: &EstimatorConfig<T>) -> Result<(T, usize)> {
        let r = estimate_at(data, x, cfg)?;
        Ok((r.g_hat, r.n_local))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    /// `(J, K)` from the tuning rule.
    Tuned,
    /// `K = 1`: uniform-kernel local average over the ball.
    Baseline,
    Fixed { j: usize, k: usize },
}

impl ArmKind {
    pub fn name(&self) -> String {
        match self {
            ArmKind::Tuned => "tuned".into(),
            ArmKind::Baseline => "baseline".into(),
            ArmKind::Fixed { j, k } => format!("fixed_J{j}_K{k}"),
        }
    }

    fn params(&self, n: usize, rule: &TuningRule) -> Result<(usize, usize)> {
        match *self {
            ArmKind::Tuned => tune(n, rule),
            ArmKind::Baseline => Ok((tune(n, rule)?.0, 1)),
            ArmKind::Fixed { j, k } => Ok((j, k)),
        }
    }
}

/// Everything a rate study needs.
#[derive(Debug, Clone)]
pub struct StudySpec<T> {
    pub model: GaussianCovariateModel<T>,
    pub target: RegressionTarget<T>,
    pub noise: NoiseModel<T>,
    pub site: FunctionVec<T>,
    pub delta: T,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub rule: TuningRule,
    pub fixed_arms: Vec<(usize, usize)>,
    pub seed: u64,
    pub smallball_floor: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl<T: Scalar> StudySpec<T> {
    pub fn arms(&self) -> Vec<ArmKind> {
        let mut arms = vec![ArmKind::Tuned, ArmKind::Baseline];
        arms.extend(self.fixed_arms.iter().map(|&(j, k)| ArmKind::Fixed { j, k }));
        arms
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must not be empty"));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 10) {
            return Err(Error::config("n_grid", format!("sample sizes must be at least 10, got {n}")));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_grid", "must be strictly increasing"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be positive"));
        }
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::config("delta", "must lie in (0, 1)"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be positive"));
        }
        Ok(())
    }
}

/// Error summary of one arm at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerN {
    pub n: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    pub median_sq_err: f64,
    pub mean_sq_err: f64,
    pub q10: f64,
    pub q90: f64,
    pub mean_n_local: f64,
    pub smallball_hat: f64,
    pub empty_neighborhoods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmResult {
    pub arm: String,
    pub kind: ArmKind,
    pub per_n: Vec<PerN>,
    pub kappa_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateStudyResult {
    pub arms: Vec<ArmResult>,
    /// Exponent of the tuned arm.
    pub kappa_hat: Option<f64>,
    pub baseline_kappa_hat: Option<f64>,
    pub conditions: ConditionCheck,
    pub seed: u64,
    pub replications: usize,
    pub advisories: Vec<String>,
}

impl RateStudyResult {
    pub fn arm(&self, name: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.arm == name)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

struct Outcome {
    sq_err: f64,
    n_local: usize,
}

/// Runs the study with the given estimator.
pub fn run_rate_study<T: Scalar, E: PointEstimator<T>>(spec: &StudySpec<T>, estimator: &E) -> Result<RateStudyResult> {
    spec.validate()?;
    let arms = spec.arms();
    let g_true = spec.target.value(&spec.site).as_f64();

    let mut configs: Vec<Vec<EstimatorConfig<T>>> = Vec::with_capacity(spec.n_grid.len());
    for &n in &spec.n_grid {
        let per_arm = arms
            .iter()
            .map(|arm| {
                let (j, k) = arm.params(n, &spec.rule)?;
                let cfg = EstimatorConfig::new(j, k, spec.delta)?;
                cfg.index_set()?;
                Ok(cfg.with_basis(spec.model.basis().clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        configs.push(per_arm);
    }

    let tasks: Vec<(usize, usize)> = (0..spec.n_grid.len())
        .flat_map(|ni| (0..spec.replications).map(move |r| (ni, r)))
        .collect();
    let run_task = |&(ni, r): &(usize, usize)| -> Result<Vec<Outcome>> {
        let n = spec.n_grid[ni];
        let sim = simulate(&spec.model, &spec.target, &spec.noise, n, spec.seed, &[ni as u64, r as u64])?;
        configs[ni]
            .iter()
            .map(|cfg| {
                let (g_hat, n_local) = estimator.estimate(&sim.data, &spec.site, cfg)?;
                let err = g_hat.as_f64() - g_true;
                Ok(Outcome {
                    sq_err: err * err,
                    n_local,
                })
            })
            .collect()
    };
    let outcomes: Vec<Vec<Outcome>> = match spec.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::config("threads", e.to_string()))?;
            pool.install(|| tasks.par_iter().map(run_task).collect::<Result<Vec<_>>>())?
        }
        None => tasks.par_iter().map(run_task).collect::<Result<Vec<_>>>()?,
    };

    let reps = spec.replications;
    let mut advisories = Vec::new();
    let mut arm_results: Vec<ArmResult> = arms
        .iter()
        .map(|a| ArmResult {
            arm: a.name(),
            kind: *a,
            per_n: Vec::with_capacity(spec.n_grid.len()),
            kappa_hat: None,
        })
        .collect();

    for (ni, &n) in spec.n_grid.iter().enumerate() {
        let block = &outcomes[ni * reps..(ni + 1) * reps];
        let total_local: usize = block.iter().map(|o| o[0].n_local).sum();
        let smallball_hat = total_local as f64 / (n * reps) as f64;
        let empty = block.iter().filter(|o| o[0].n_local == 0).count();
        if empty as f64 > MAX_EMPTY_FRACTION * reps as f64 {
            return Err(Error::config(
                "delta",
                format!(
                    "{empty} of {reps} replications at n = {n} had no samples within delta; \
                     increase delta or the covariate variance"
                ),
            ));
        }
        if smallball_hat < spec.smallball_floor {
            advisories.push(format!(
                "empirical small-ball probability {smallball_hat:.4} at n = {n} is below the floor {}",
                spec.smallball_floor
            ));
        }
        for (ai, result) in arm_results.iter_mut().enumerate() {
            let mut errs: Vec<f64> = block.iter().map(|o| o[ai].sq_err).collect();
            errs.sort_by(f64::total_cmp);
            let cfg = &configs[ni][ai];
            result.per_n.push(PerN {
                n,
                j: cfg.j,
                k: cfg.k,
                delta: spec.delta.as_f64(),
                median_sq_err: quantile_sorted(&errs, 0.5),
                mean_sq_err: errs.iter().sum::<f64>() / reps as f64,
                q10: quantile_sorted(&errs, 0.1),
                q90: quantile_sorted(&errs, 0.9),
                mean_n_local: total_local as f64 / reps as f64,
                smallball_hat,
                empty_neighborhoods: empty,
            });
        }
    }

    for result in &mut arm_results {
        if result.per_n.len() >= 3 {
            let pts: Vec<(f64, f64)> = result.per_n.iter().map(|p| (p.n as f64, p.median_sq_err)).collect();
            result.kappa_hat = fit_rate(&pts).ok().map(|f| f.kappa);
        }
    }

    Ok(RateStudyResult {
        kappa_hat: arm_results[0].kappa_hat,
        baseline_kappa_hat: arm_results[1].kappa_hat,
        arms: arm_results,
        conditions: check_conditions(&spec.rule),
        seed: spec.seed,
        replications: reps,
        advisories,
    })
}
