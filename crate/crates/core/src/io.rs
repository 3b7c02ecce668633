//! Configuration files, dataset CSVs, result files and run manifests.
//!
//! Configs are JSON with unknown keys rejected. Tabular output is CSV with LF
//! line endings and floats written with 17 significant digits so that
//! reparsing reproduces the in-memory values exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::Dataset;
use crate::experiments::{RateStudyResult, StudySpec, TuningRule, DEFAULT_SMALLBALL_FLOOR};
use crate::function_space::{analyze_grid, Basis, FunctionVec};
use crate::scalar::Scalar;
use crate::simulation::{EigenDecay, GaussianCovariateModel, NoiseLaw, NoiseModel, PolyCoord, RegressionTarget};

pub const TOOL_VERSION: &str = concat!("funloc ", env!("CARGO_PKG_VERSION"));

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_REPLICATIONS: usize = 200;
pub const DEFAULT_SIGMA: f64 = 0.25;
pub const DEFAULT_D0: f64 = 0.09;
pub const DEFAULT_D1: f64 = 0.95;
pub const DEFAULT_FIXED_ARMS: [(usize, usize); 2] = [(3, 3), (4, 3)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenKind {
    Exp,
    Poly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub kind: EigenKind,
    #[serde(rename = "C_lambda", default = "one")]
    pub c_lambda: f64,
    #[serde(rename = "C_gamma1", default)]
    pub c_gamma1: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl EigenConfig {
    pub fn decay(&self) -> Result<EigenDecay> {
        let d = match self.kind {
            EigenKind::Exp => EigenDecay::Exponential {
                c_lambda: self.c_lambda,
                c_gamma1: self.c_gamma1.unwrap_or(1.0),
                gamma: self
                    .gamma
                    .ok_or_else(|| Error::config("model.eigen.gamma", "required for kind \"exp\""))?,
            },
            EigenKind::Poly => EigenDecay::Polynomial {
                c_lambda: self.c_lambda,
                p: self.p.ok_or_else(|| Error::config("model.eigen.p", "required for kind \"poly\""))?,
            },
        };
        d.validate()?;
        Ok(d)
    }

    /// Decay exponent fed to the rate conditions; polynomial decay has none (0).
    pub fn gamma_for_conditions(&self) -> f64 {
        match self.kind {
            EigenKind::Exp => self.gamma.unwrap_or(0.0),
            EigenKind::Poly => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub eigen: EigenConfig,
    #[serde(default)]
    pub mean_coeffs: Vec<f64>,
    /// Truncation level; chosen from the eigenvalue decay when absent.
    #[serde(rename = "L", default)]
    pub l: Option<usize>,
}

impl ModelConfig {
    pub fn build<T: Scalar>(&self) -> Result<GaussianCovariateModel<T>> {
        let decay = self.eigen.decay()?;
        if self.l == Some(0) {
            return Err(Error::config("model.L", "must be positive"));
        }
        let mean = coeffs_or_zero::<T>(&self.mean_coeffs, "model.mean_coeffs")?;
        GaussianCovariateModel::from_decay(mean, decay, self.l)
    }
}

fn coeffs_or_zero<T: Scalar>(c: &[f64], path: &str) -> Result<FunctionVec<T>> {
    if c.is_empty() {
        return Ok(FunctionVec::zeros(1));
    }
    FunctionVec::new(c.iter().map(|&v| T::lit(v)).collect()).map_err(|e| Error::config(path, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    ExpLinear,
    CosLinear,
    Quadratic,
    PolyCoord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: TargetKind,
    #[serde(default)]
    pub theta_coeffs: Option<Vec<f64>>,
    /// Expansion point of a `poly_coord` target; defaults to the zero function.
    #[serde(default)]
    pub center_coeffs: Option<Vec<f64>>,
    #[serde(default)]
    pub terms: Option<Vec<TermConfig>>,
}

impl TargetConfig {
    pub fn build<T: Scalar>(&self) -> Result<RegressionTarget<T>> {
        let theta = || -> Result<FunctionVec<T>> {
            let t = self
                .theta_coeffs
                .as_ref()
                .ok_or_else(|| Error::config("target.theta_coeffs", "required for ridge targets"))?;
            if t.is_empty() {
                return Err(Error::config("target.theta_coeffs", "must not be empty"));
            }
            coeffs_or_zero(t, "target.theta_coeffs")
        };
        Ok(match self.kind {
            TargetKind::ExpLinear => RegressionTarget::ExpLinear(theta()?),
            TargetKind::CosLinear => RegressionTarget::CosLinear(theta()?),
            TargetKind::Quadratic => RegressionTarget::Quadratic(theta()?),
            TargetKind::PolyCoord => {
                let terms = self
                    .terms
                    .as_ref()
                    .filter(|t| !t.is_empty())
                    .ok_or_else(|| Error::config("target.terms", "required for poly_coord"))?;
                let dim = terms[0].exponents.len();
                let center = coeffs_or_zero(self.center_coeffs.as_deref().unwrap_or(&[]), "target.center_coeffs")?;
                let terms = terms.iter().map(|t| (t.exponents.clone(), T::lit(t.coeff))).collect();
                RegressionTarget::PolyCoord(PolyCoord::new(center, dim, terms)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLawConfig {
    Gaussian,
    Uniform,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_law")]
    pub law: NoiseLawConfig,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}
fn default_law() -> NoiseLawConfig {
    NoiseLawConfig::Gaussian
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma: DEFAULT_SIGMA,
            law: NoiseLawConfig::Gaussian,
        }
    }
}

impl NoiseConfig {
    pub fn build<T: Scalar>(&self) -> Result<NoiseModel<T>> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::config("noise.sigma", format!("must be finite and nonnegative, got {}", self.sigma)));
        }
        let law = match self.law {
            NoiseLawConfig::Gaussian => NoiseLaw::Gaussian,
            NoiseLawConfig::Uniform => NoiseLaw::Uniform,
            NoiseLawConfig::None => NoiseLaw::None,
        };
        NoiseModel::new(T::lit(self.sigma), law)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    #[serde(rename = "D0", default = "default_d0")]
    pub d0: f64,
    #[serde(rename = "D1", default = "default_d1")]
    pub d1: f64,
    #[serde(rename = "J_override", default)]
    pub j_override: Option<usize>,
    #[serde(rename = "K_override", default)]
    pub k_override: Option<usize>,
    /// Defaults to `1 + 2 c2*` with the tight small-ball constant of the model.
    #[serde(default)]
    pub c1: Option<f64>,
}

fn default_d0() -> f64 {
    DEFAULT_D0
}
fn default_d1() -> f64 {
    DEFAULT_D1
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            d0: DEFAULT_D0,
            d1: DEFAULT_D1,
            j_override: None,
            k_override: None,
            c1: None,
        }
    }
}

/// Rate-study configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: ModelConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Site `x`; defaults to the covariate mean.
    #[serde(default)]
    pub site_coeffs: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fixed_arms")]
    pub fixed_arms: Vec<(usize, usize)>,
    #[serde(default = "default_floor")]
    pub smallball_floor: f64,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}
fn default_fixed_arms() -> Vec<(usize, usize)> {
    DEFAULT_FIXED_ARMS.to_vec()
}
fn default_floor() -> f64 {
    DEFAULT_SMALLBALL_FLOOR
}

fn site_of<T: Scalar>(site: &Option<Vec<f64>>, model: &GaussianCovariateModel<T>) -> Result<FunctionVec<T>> {
    match site {
        Some(c) if !c.is_empty() => coeffs_or_zero(c, "site_coeffs"),
        _ => Ok(model.mean().clone()),
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

impl StudyConfig {
    /// Checks ranges and canonicalises the grid. Returns notices for the user.
    pub fn validate(&mut self) -> Result<Vec<String>> {
        let mut notices = Vec::new();
        check_delta(self.delta)?;
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid", "must not be empty"));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 10) {
            return Err(Error::config("n_grid", format!("sample sizes must be at least 10, got {n}")));
        }
        if self.n_grid.windows(2).any(|w| w[0] > w[1]) {
            self.n_grid.sort_unstable();
            notices.push("n_grid was not sorted; sorted ascending".to_string());
        }
        let before = self.n_grid.len();
        self.n_grid.dedup();
        if self.n_grid.len() != before {
            notices.push("duplicate entries removed from n_grid".to_string());
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be positive"));
        }
        if !(self.tuning.d0 > 0.0) {
            return Err(Error::config("tuning.D0", "must be positive"));
        }
        if !(self.tuning.d1 > 0.0) {
            return Err(Error::config("tuning.D1", "must be positive"));
        }
        if self.tuning.j_override == Some(0) {
            return Err(Error::config("tuning.J_override", "must be positive"));
        }
        if self.tuning.k_override == Some(0) {
            return Err(Error::config("tuning.K_override", "must be positive"));
        }
        if let Some((i, _)) = self.fixed_arms.iter().enumerate().find(|(_, (j, k))| *j == 0 || *k == 0) {
            return Err(Error::config(format!("fixed_arms[{i}]"), "J and K must be positive"));
        }
        if !(self.smallball_floor >= 0.0 && self.smallball_floor <= 1.0) {
            return Err(Error::config("smallball_floor", "must lie in [0, 1]"));
        }
        self.noise.build::<f64>()?;
        self.model.build::<f64>()?;
        self.target.build::<f64>()?;
        Ok(notices)
    }

    pub fn to_spec<T: Scalar>(&self, threads: Option<usize>) -> Result<StudySpec<T>> {
        let model = self.model.build::<T>()?;
        let site = site_of(&self.site_coeffs, &model)?;
        let delta = T::lit(self.delta);
        let c1 = match self.tuning.c1 {
            Some(c) => c,
            None => 1.0 + 2.0 * model.small_ball_constant(&site, delta).as_f64(),
        };
        let rule = TuningRule::new(self.tuning.d0, self.tuning.d1, self.model.eigen.gamma_for_conditions(), c1)
            .with_overrides(self.tuning.j_override, self.tuning.k_override);
        Ok(StudySpec {
            target: self.target.build()?,
            noise: self.noise.build()?,
            site,
            delta,
            n_grid: self.n_grid.clone(),
            replications: self.replications,
            rule,
            fixed_arms: self.fixed_arms.clone(),
            seed: self.seed,
            smallball_floor: self.smallball_floor,
            threads,
            model,
        })
    }
}

/// Configuration of `diagnose` and `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub model: ModelConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub site_coeffs: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_u0_samples")]
    pub u0_samples: usize,
    #[serde(default)]
    pub c2_star: Option<f64>,
}

fn default_u0_samples() -> usize {
    200_000
}

impl DiagnoseConfig {
    pub fn validate(&self) -> Result<Vec<String>> {
        check_delta(self.delta)?;
        if self.j == 0 {
            return Err(Error::config("J", "must be positive"));
        }
        if self.k == 0 {
            return Err(Error::config("K", "must be positive"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        if self.u0_samples == 0 {
            return Err(Error::config("u0_samples", "must be positive"));
        }
        if let Some(c) = self.c2_star {
            if !(c >= 0.0) {
                return Err(Error::config("c2_star", "must be nonnegative"));
            }
        }
        self.noise.build::<f64>()?;
        self.model.build::<f64>()?;
        self.target.build::<f64>()?;
        Ok(Vec::new())
    }

    pub fn site<T: Scalar>(&self, model: &GaussianCovariateModel<T>) -> Result<FunctionVec<T>> {
        site_of(&self.site_coeffs, model)
    }
}

/// Parses JSON, reporting the JSON path of any structural error.
pub fn parse_config<C: for<'de> Deserialize<'de>>(text: &str) -> Result<C> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
    })
}

/// Loads and validates a rate-study config.
pub fn load_config(path: &Path) -> Result<(StudyConfig, Vec<String>)> {
    let text = fs::read_to_string(path)?;
    let mut cfg: StudyConfig = parse_config(&text)?;
    let notices = cfg.validate()?;
    Ok((cfg, notices))
}

pub fn load_diagnose_config(path: &Path) -> Result<DiagnoseConfig> {
    let text = fs::read_to_string(path)?;
    let cfg: DiagnoseConfig = parse_config(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// SHA-256 of the config with keys sorted, hex encoded.
pub fn config_digest(text: &str) -> Result<String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::config(".", e.to_string()))?;
    let canonical = serde_json::to_string(&value).map_err(|e| Error::Data(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Provenance of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config_digest: String, seed: u64, outputs: Vec<String>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            config_digest,
            seed,
            timestamp,
            outputs,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub j: usize,
    pub k: usize,
    pub median_sq_err: f64,
    pub mean_sq_err: f64,
    pub q10: f64,
    pub q90: f64,
    pub mean_n_local: f64,
    pub smallball_hat: f64,
    pub arm: String,
}

pub const RESULTS_HEADER: [&str; 10] = [
    "n",
    "J",
    "K",
    "median_sq_err",
    "mean_sq_err",
    "q10",
    "q90",
    "mean_n_local",
    "smallball_hat",
    "arm",
];

#[derive(Serialize)]
struct Summary<'a> {
    kappa_hat: Option<f64>,
    baseline_kappa_hat: Option<f64>,
    arm_kappa_hat: BTreeMap<&'a str, Option<f64>>,
    conditions: &'a crate::experiments::ConditionCheck,
    tuning: TuningSummary,
    seed: u64,
    replications: usize,
    config_digest: &'a str,
    advisories: &'a [String],
}

#[derive(Serialize)]
struct TuningSummary {
    #[serde(rename = "D0")]
    d0: f64,
    #[serde(rename = "D1")]
    d1: f64,
    gamma: f64,
    c1: f64,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("{other:?}")),
    }
}

/// Writes `results.csv`, `summary.json`, `plotdata.csv` and `manifest.json`.
pub fn write_results(result: &RateStudyResult, rule: &TuningRule, config_digest: &str, out_dir: &Path) -> Result<RunManifest> {
    if result.arms.is_empty() || result.arms.iter().all(|a| a.per_n.is_empty()) {
        return Err(Error::Data("rate study has no per-n results; nothing written".into()));
    }
    fs::create_dir_all(out_dir)?;

    let results_path = out_dir.join("results.csv");
    let mut w = csv_writer(&results_path)?;
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for arm in &result.arms {
        for p in &arm.per_n {
            w.write_record([
                p.n.to_string(),
                p.j.to_string(),
                p.k.to_string(),
                fmt_float(p.median_sq_err),
                fmt_float(p.mean_sq_err),
                fmt_float(p.q10),
                fmt_float(p.q90),
                fmt_float(p.mean_n_local),
                fmt_float(p.smallball_hat),
                arm.arm.clone(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;

    let plot_path = out_dir.join("plotdata.csv");
    let mut w = csv_writer(&plot_path)?;
    w.write_record(["arm", "log_n", "log_median_sq_err"]).map_err(csv_err)?;
    for arm in &result.arms {
        for p in &arm.per_n {
            w.write_record([arm.arm.clone(), fmt_float((p.n as f64).ln()), fmt_float(p.median_sq_err.ln())])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;

    let summary = Summary {
        kappa_hat: result.kappa_hat,
        baseline_kappa_hat: result.baseline_kappa_hat,
        arm_kappa_hat: result.arms.iter().map(|a| (a.arm.as_str(), a.kappa_hat)).collect(),
        conditions: &result.conditions,
        tuning: TuningSummary {
            d0: rule.d0,
            d1: rule.d1,
            gamma: rule.gamma,
            c1: rule.c1,
        },
        seed: result.seed,
        replications: result.replications,
        config_digest,
        advisories: &result.advisories,
    };
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;

    let manifest = RunManifest::new(
        config_digest.to_string(),
        result.seed,
        vec![
            "results.csv".into(),
            "summary.json".into(),
            "plotdata.csv".into(),
            "manifest.json".into(),
        ],
    );
    manifest.write(out_dir)?;
    Ok(manifest)
}

/// Parses a `results.csv` written by [`write_results`].
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Data(format!("unexpected results header {header:?}")));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Data(format!("bad number {s:?}"))) };
    let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Data(format!("bad integer {s:?}"))) };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let r = rec.map_err(csv_err)?;
        rows.push(ResultRow {
            n: int(&r[0])?,
            j: int(&r[1])?,
            k: int(&r[2])?,
            median_sq_err: num(&r[3])?,
            mean_sq_err: num(&r[4])?,
            q10: num(&r[5])?,
            q90: num(&r[6])?,
            mean_n_local: num(&r[7])?,
            smallball_hat: num(&r[8])?,
            arm: r[9].to_string(),
        });
    }
    Ok(rows)
}

/// Reads a functional dataset.
///
/// The first column must be `y`. The remaining columns are basis
/// coefficients when their names start with `coeff` (an optional final
/// `tail_norm_sq` column carries tail mass), and otherwise grid values on
/// the uniform midpoint grid, projected onto `grid_coeffs` basis functions
/// (default: a quarter of the grid size).
pub fn read_dataset<T: Scalar>(path: &Path, basis: &Basis<T>, grid_coeffs: Option<usize>) -> Result<Dataset<T>> {
    let (header, rows) = read_numeric_csv(path)?;
    if header.first().map(String::as_str) != Some("y") {
        return Err(Error::config(path.display().to_string(), "first column must be `y`"));
    }
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for row in rows {
        ys.push(T::lit(row[0]));
        xs.push(curve_from_columns(&header[1..], &row[1..], basis, grid_coeffs)?);
    }
    Dataset::new(xs, ys)
}

/// Reads a single curve (first data row) in the same column conventions, without `y`.
pub fn read_curve<T: Scalar>(path: &Path, basis: &Basis<T>, grid_coeffs: Option<usize>) -> Result<FunctionVec<T>> {
    let (header, rows) = read_numeric_csv(path)?;
    let row = rows
        .first()
        .ok_or_else(|| Error::config(path.display().to_string(), "no data rows"))?;
    curve_from_columns(&header, row, basis, grid_coeffs)
}

fn curve_from_columns<T: Scalar>(header: &[String], values: &[f64], basis: &Basis<T>, grid_coeffs: Option<usize>) -> Result<FunctionVec<T>> {
    if header.is_empty() {
        return Err(Error::Data("no curve columns".into()));
    }
    if header.iter().all(|h| h.starts_with("coeff") || h == "tail_norm_sq") {
        let mut coeffs = Vec::new();
        let mut tail = T::zero();
        for (h, &v) in header.iter().zip(values) {
            if h == "tail_norm_sq" {
                tail = T::lit(v);
            } else {
                coeffs.push(T::lit(v));
            }
        }
        FunctionVec::with_tail(coeffs, tail)
    } else {
        let samples: Vec<T> = values.iter().map(|&v| T::lit(v)).collect();
        let l = grid_coeffs.unwrap_or(samples.len() / 4).max(1);
        analyze_grid(&samples, basis, l)
    }
}

fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::config(format!("{}:row {}", path.display(), i + 1), format!("not a number: {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::config(format!("{}:row {}", path.display(), i + 1), "wrong number of columns"));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes a dataset in coefficient form (`y,coeff_1,...`) or, with `grid`, as grid samples.
pub fn write_dataset<T: Scalar>(path: &Path, data: &Dataset<T>, basis: &Basis<T>, grid: Option<usize>) -> Result<()> {
    let width = data.covariates().iter().map(FunctionVec::len).max().unwrap_or(1);
    let mut w = csv_writer(path)?;
    let mut header = vec!["y".to_string()];
    match grid {
        Some(n) => header.extend((1..=n).map(|i| format!("t_{i}"))),
        None => header.extend((1..=width).map(|l| format!("coeff_{l}"))),
    }
    w.write_record(&header).map_err(csv_err)?;
    for (x, &y) in data.covariates().iter().zip(data.responses()) {
        let mut rec = vec![fmt_float(y.as_f64())];
        match grid {
            Some(n) => rec.extend(x.synthesize(basis, n).into_iter().map(|v| fmt_float(v.as_f64()))),
            None => rec.extend((1..=width).map(|l| fmt_float(x.coeff(l).as_f64()))),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
