//! Simulated functional regression data.
//!
//! Covariates follow a truncated Karhunen-Loeve expansion
//! `X = y + sum_{l <= L} sqrt(lambda_l) eta_l phi_l` with i.i.d. standard
//! normal `eta_l`. Regression targets come with closed-form Frechet
//! derivatives so that Taylor coefficients, remainders and derivative norms
//! are available exactly.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimator::Dataset;
use crate::function_space::{Basis, FunctionVec};
use crate::poly_index::{binomial, monomial, MultiIndexSet};
use crate::rng::{purpose, stream_rng};
use crate::scalar::Scalar;

/// Relative tail mass discarded when the truncation level is chosen automatically.
pub const TRUNCATION_REL_TOL: f64 = 1e-12;
/// Upper limit for automatically chosen truncation levels.
pub const MAX_TRUNCATION: usize = 4096;

/// Eigenvalue sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenDecay {
    /// `lambda_j = c_lambda * exp(-c_gamma1 * j^gamma)`.
    Exponential { c_lambda: f64, c_gamma1: f64, gamma: f64 },
    /// `lambda_j = c_lambda * j^(-p)`.
    Polynomial { c_lambda: f64, p: f64 },
}

impl EigenDecay {
    pub fn value(&self, j: usize) -> f64 {
        let jf = j as f64;
        match *self {
            EigenDecay::Exponential { c_lambda, c_gamma1, gamma } => c_lambda * (-c_gamma1 * jf.powf(gamma)).exp(),
            EigenDecay::Polynomial { c_lambda, p } => c_lambda * jf.powf(-p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            EigenDecay::Exponential { c_lambda, c_gamma1, gamma } => c_lambda > 0.0 && c_gamma1 > 0.0 && gamma > 0.0,
            EigenDecay::Polynomial { c_lambda, p } => c_lambda > 0.0 && p > 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "model.eigen",
                "eigenvalue parameters must be positive (and p > 1 for polynomial decay)",
            ))
        }
    }

    /// Smallest `L` with `sum_{j>L} lambda_j <= 1e-12 sum_j lambda_j`, capped at [`MAX_TRUNCATION`].
    ///
    /// The infinite sum is approximated by the sum up to the cap; for slowly
    /// decaying sequences the cap is returned.
    pub fn truncation_level(&self) -> usize {
        let values: Vec<f64> = (1..=MAX_TRUNCATION).map(|j| self.value(j)).collect();
        let total: f64 = values.iter().sum();
        let mut tail = total;
        for (l, v) in values.iter().enumerate() {
            tail -= v;
            if tail <= TRUNCATION_REL_TOL * total {
                return l + 1;
            }
        }
        MAX_TRUNCATION
    }

    pub fn eigenvalues<T: Scalar>(&self, len: usize) -> Vec<T> {
        (1..=len).map(|j| T::lit(self.value(j))).collect()
    }
}

/// Gaussian covariate law with mean `y` and covariance eigenpairs `(lambda_l, phi_l)`.
#[derive(Debug, Clone)]
pub struct GaussianCovariateModel<T> {
    mean: FunctionVec<T>,
    eigenvalues: Vec<T>,
    basis: Basis<T>,
}

impl<T: Scalar> GaussianCovariateModel<T> {
    pub fn new(mean: FunctionVec<T>, eigenvalues: Vec<T>, basis: Basis<T>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::config("model.eigen", "need at least one eigenvalue"));
        }
        if eigenvalues.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::config("model.eigen", "eigenvalues must be positive and finite"));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::config("model.eigen", "eigenvalues must be nonincreasing"));
        }
        Ok(GaussianCovariateModel { mean, eigenvalues, basis })
    }

    /// Model from an eigenvalue generator; `len = None` picks the truncation level automatically.
    pub fn from_decay(mean: FunctionVec<T>, decay: EigenDecay, len: Option<usize>) -> Result<Self> {
        decay.validate()?;
        let len = len.unwrap_or_else(|| decay.truncation_level());
        if len == 0 {
            return Err(Error::config("model.L", "truncation level must be positive"));
        }
        Self::new(mean, decay.eigenvalues(len), Basis::TrigonometricFourier)
    }

    pub fn mean(&self) -> &FunctionVec<T> {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Basis<T> {
        &self.basis
    }

    /// `lambda_l` for `l >= 1`, zero beyond the truncation.
    pub fn eigenvalue(&self, l: usize) -> T {
        self.eigenvalues.get(l.wrapping_sub(1)).copied().unwrap_or_else(T::zero)
    }

    /// Number of coefficients of a sampled curve.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len().max(self.mean.len())
    }

    /// Offset `z = y - x` of the mean from the site.
    pub fn offset(&self, x: &FunctionVec<T>) -> FunctionVec<T> {
        self.mean.sub(x)
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> FunctionVec<T> {
        let coeffs: Vec<T> = (1..=self.rank())
            .map(|l| {
                let eta: f64 = StandardNormal.sample(rng);
                self.mean.coeff(l) + self.eigenvalue(l).sqrt() * T::lit(eta)
            })
            .collect();
        FunctionVec::with_tail(coeffs, self.mean.tail_norm_sq()).expect("finite sample")
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<FunctionVec<T>> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// Tight constant `c2* = sup_j <z, phi_j>^2 / (lambda_j delta^2)` for the small-ball condition.
    ///
    /// Infinite when `z` has mass outside the eigen-directions.
    pub fn small_ball_constant(&self, x: &FunctionVec<T>, delta: T) -> T {
        let z = self.offset(x);
        if z.tail_norm_sq() > T::zero() {
            return T::infinity();
        }
        let mut sup = T::zero();
        for l in 1..=z.len() {
            let zl = z.coeff(l);
            if zl == T::zero() {
                continue;
            }
            let lam = self.eigenvalue(l);
            if lam == T::zero() {
                return T::infinity();
            }
            sup = sup.max(zl * zl / (lam * delta * delta));
        }
        sup
    }
}

/// Draws `n` covariates from the stream `(master_seed, path, COVARIATES)`.
pub fn sample_covariates<T: Scalar>(
    model: &GaussianCovariateModel<T>,
    n: usize,
    master_seed: u64,
    path: &[u64],
) -> Vec<FunctionVec<T>> {
    let mut full = path.to_vec();
    full.push(purpose::COVARIATES);
    model.sample(n, &mut stream_rng(master_seed, &full))
}

/// One-dimensional profile of a ridge functional `g(x) = f(<theta, x>)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Profile {
    Exp,
    Cos,
    Square,
}

impl Profile {
    fn derivative<T: Scalar>(self, k: usize, s: T) -> T {
        match self {
            Profile::Exp => s.exp(),
            Profile::Cos => (s + T::from_usize_lossy(k) * T::FRAC_PI_2()).cos(),
            Profile::Square => match k {
                0 => s * s,
                1 => T::lit(2.0) * s,
                2 => T::lit(2.0),
                _ => T::zero(),
            },
        }
    }

    /// `sup { |f^(k)(u)| : |u - s| <= r }`.
    fn sup_derivative<T: Scalar>(self, k: usize, s: T, r: T) -> T {
        match self {
            Profile::Exp => (s + r).exp(),
            Profile::Cos => {
                let a = s + T::from_usize_lossy(k) * T::FRAC_PI_2() - r;
                let b = a + r + r;
                // |cos| reaches 1 at multiples of pi
                if (b / T::PI()).floor() >= (a / T::PI()).ceil() {
                    T::one()
                } else {
                    a.cos().abs().max(b.cos().abs())
                }
            }
            Profile::Square => {
                let m = s.abs() + r;
                match k {
                    0 => m * m,
                    1 => T::lit(2.0) * m,
                    2 => T::lit(2.0),
                    _ => T::zero(),
                }
            }
        }
    }
}

/// Polynomial in the coordinates `u_l = <X - center, phi_l>`, `l <= dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoord<T> {
    center: FunctionVec<T>,
    dim: usize,
    terms: Vec<(Vec<u32>, T)>,
}

impl<T: Scalar> PolyCoord<T> {
    /// `g(X) = sum_r a_r prod_l <X - center, phi_l>^{r_l}`; every exponent vector has length `dim`.
    pub fn new(center: FunctionVec<T>, dim: usize, terms: Vec<(Vec<u32>, T)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("target.dim", "must be positive"));
        }
        if terms.iter().any(|(r, a)| r.len() != dim || !a.is_finite()) {
            return Err(Error::config("target.terms", format!("every exponent vector needs length {dim}")));
        }
        Ok(PolyCoord { center, dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(r, _)| r.iter().sum::<u32>() as usize).max().unwrap_or(0)
    }

    fn coords(&self, x: &FunctionVec<T>) -> Vec<T> {
        (1..=self.dim).map(|l| x.coeff(l) - self.center.coeff(l)).collect()
    }

    fn eval_coords(&self, u: &[T]) -> T {
        self.terms.iter().map(|(r, a)| *a * monomial(u, r)).sum()
    }

    /// `d^m P(u) / m!` for `m` of length `dim`.
    fn scaled_partial(&self, u: &[T], m: &[u32]) -> T {
        self.terms
            .iter()
            .filter(|(r, _)| r.iter().zip(m).all(|(ri, mi)| ri >= mi))
            .map(|(r, a)| {
                let mut v = *a;
                for l in 0..self.dim {
                    let c = binomial(r[l] as u64, m[l] as u64).unwrap_or(0);
                    v *= T::from_u128(c).unwrap_or_else(T::max_value) * u[l].powi((r[l] - m[l]) as i32);
                }
                v
            })
            .sum()
    }

    /// `sup |d^m P(v)| / m!` over `|v_l - u_l| <= r` (termwise bound).
    fn scaled_partial_bound(&self, u: &[T], m: &[u32], r: T) -> T {
        self.terms
            .iter()
            .filter(|(e, _)| e.iter().zip(m).all(|(ei, mi)| ei >= mi))
            .map(|(e, a)| {
                let mut v = a.abs();
                for l in 0..self.dim {
                    let c = binomial(e[l] as u64, m[l] as u64).unwrap_or(0);
                    v *= T::from_u128(c).unwrap_or_else(T::max_value) * (u[l].abs() + r).powi((e[l] - m[l]) as i32);
                }
                v
            })
            .sum()
    }

    /// Frobenius norm of the order-`k` derivative tensor, built from per-index entries `entry(m) = d^m P / m!`.
    fn tensor_frobenius(&self, k: usize, entry: impl Fn(&[u32]) -> T) -> Result<T> {
        let set = MultiIndexSet::enumerate(self.dim, k + 1)?;
        let mut acc = T::zero();
        for i in set.grade_range(k) {
            let m = set.index(i);
            let fact: T = m
                .iter()
                .map(|&e| (1..=e).fold(T::one(), |f, q| f * T::from_u32(q).unwrap_or_else(T::max_value)))
                .fold(T::one(), |a, b| a * b);
            let partial = entry(m) * fact;
            acc += T::from_u64(set.multinomials()[i]).unwrap_or_else(T::max_value) * partial * partial;
        }
        Ok(acc.sqrt())
    }
}

/// Regression functionals with closed-form Frechet derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressionTarget<T> {
    /// `g(x) = exp(<theta, x>)`.
    ExpLinear(FunctionVec<T>),
    /// `g(x) = cos(<theta, x>)`.
    CosLinear(FunctionVec<T>),
    /// `g(x) = <theta, x>^2`.
    Quadratic(FunctionVec<T>),
    PolyCoord(PolyCoord<T>),
}

impl<T: Scalar> RegressionTarget<T> {
    fn ridge(&self) -> Option<(Profile, &FunctionVec<T>)> {
        match self {
            RegressionTarget::ExpLinear(t) => Some((Profile::Exp, t)),
            RegressionTarget::CosLinear(t) => Some((Profile::Cos, t)),
            RegressionTarget::Quadratic(t) => Some((Profile::Square, t)),
            RegressionTarget::PolyCoord(_) => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            RegressionTarget::ExpLinear(_) => "exp_linear",
            RegressionTarget::CosLinear(_) => "cos_linear",
            RegressionTarget::Quadratic(_) => "quadratic",
            RegressionTarget::PolyCoord(_) => "poly_coord",
        }
    }

    pub fn value(&self, x: &FunctionVec<T>) -> T {
        match self {
            RegressionTarget::PolyCoord(p) => p.eval_coords(&p.coords(x)),
            _ => {
                let (f, theta) = self.ridge().expect("ridge target");
                f.derivative(0, theta.inner_product(x))
            }
        }
    }

    /// `g^(k)(x; u_1, ..., u_k)`, with `k = directions.len()`.
    pub fn directional(&self, x: &FunctionVec<T>, directions: &[FunctionVec<T>]) -> T {
        let k = directions.len();
        match self {
            RegressionTarget::PolyCoord(p) => {
                // sum over ordered coordinate tuples of d_{l1..lk} P * prod u_i[l_i]
                let u = p.coords(x);
                let dim = p.dim;
                let mut total = T::zero();
                let mut tuple = vec![0usize; k];
                loop {
                    let mut m = vec![0u32; dim];
                    let mut weight = T::one();
                    for (i, &l) in tuple.iter().enumerate() {
                        m[l] += 1;
                        weight *= directions[i].coeff(l + 1);
                    }
                    if weight != T::zero() {
                        let fact: T = m
                            .iter()
                            .map(|&e| (1..=e).fold(T::one(), |f, q| f * T::from_u32(q).unwrap_or_else(T::max_value)))
                            .fold(T::one(), |a, b| a * b);
                        total += p.scaled_partial(&u, &m) * fact * weight;
                    }
                    // next tuple
                    let mut pos = 0;
                    loop {
                        if pos == k {
                            return total;
                        }
                        tuple[pos] += 1;
                        if tuple[pos] < dim {
                            break;
                        }
                        tuple[pos] = 0;
                        pos += 1;
                    }
                }
            }
            _ => {
                let (f, theta) = self.ridge().expect("ridge target");
                let s = theta.inner_product(x);
                directions.iter().fold(f.derivative(k, s), |acc, u| acc * theta.inner_product(u))
            }
        }
    }

    /// Operator norm `||g^(k)(x; .)||`.
    ///
    /// Exact for the ridge targets; for [`PolyCoord`] the Frobenius norm of
    /// the derivative tensor, which bounds the operator norm from above.
    pub fn derivative_norm(&self, x: &FunctionVec<T>, k: usize) -> Result<T> {
        match self {
            RegressionTarget::PolyCoord(p) => {
                let u = p.coords(x);
                p.tensor_frobenius(k, |m| p.scaled_partial(&u, m))
            }
            _ => {
                let (f, theta) = self.ridge().expect("ridge target");
                let s = theta.inner_product(x);
                Ok(f.derivative(k, s).abs() * theta.norm().powi(k as i32))
            }
        }
    }

    /// Upper bound on `sup_{||y - x|| <= delta} ||g^(k)(y; .)||`.
    ///
    /// Exact for exponential and quadratic ridges and for the cosine ridge.
    pub fn sup_derivative_norm(&self, x: &FunctionVec<T>, k: usize, delta: T) -> Result<T> {
        match self {
            RegressionTarget::PolyCoord(p) => {
                let u = p.coords(x);
                p.tensor_frobenius(k, |m| p.scaled_partial_bound(&u, m, delta))
            }
            _ => {
                let (f, theta) = self.ridge().expect("ridge target");
                let s = theta.inner_product(x);
                let tn = theta.norm();
                Ok(f.sup_derivative(k, s, delta * tn) * tn.powi(k as i32))
            }
        }
    }

    /// Taylor coefficient `G_k(x) = g^(|k|)(x; phi_1 x k_1, ..., phi_J x k_J) / prod k_l!`.
    pub fn frechet_coefficient(&self, x: &FunctionVec<T>, k: &[u32]) -> T {
        match self {
            RegressionTarget::PolyCoord(p) => {
                if k.iter().skip(p.dim).any(|&e| e > 0) {
                    return T::zero();
                }
                let m: Vec<u32> = (0..p.dim).map(|l| k.get(l).copied().unwrap_or(0)).collect();
                p.scaled_partial(&p.coords(x), &m)
            }
            _ => {
                let (f, theta) = self.ridge().expect("ridge target");
                let grade: u32 = k.iter().sum();
                let mut v = f.derivative(grade as usize, theta.inner_product(x));
                for (l, &e) in k.iter().enumerate() {
                    if e > 0 {
                        let fact = (1..=e).fold(T::one(), |acc, q| acc * T::from_u32(q).unwrap_or_else(T::max_value));
                        v *= theta.coeff(l + 1).powi(e as i32) / fact;
                    }
                }
                v
            }
        }
    }

    /// All `G_k(x)` in set order.
    pub fn frechet_coefficients(&self, x: &FunctionVec<T>, set: &MultiIndexSet) -> Vec<T> {
        set.indices().iter().map(|k| self.frechet_coefficient(x, k)).collect()
    }

    /// `P_{J,K}(coords) = sum_k G_k(x) prod coords^k`.
    pub fn taylor_polynomial(&self, x: &FunctionVec<T>, set: &MultiIndexSet, coords: &[T]) -> T {
        let g = self.frechet_coefficients(x, set);
        set.monomial_row(coords).iter().zip(&g).map(|(&m, &c)| m * c).sum()
    }

    /// `sum_{k < K} g^(k)(x; h, ..., h) / k!` along the increment `h`.
    pub fn taylor_along(&self, x: &FunctionVec<T>, h: &FunctionVec<T>, k_bound: usize) -> Result<T> {
        match self {
            RegressionTarget::PolyCoord(p) => {
                let set = MultiIndexSet::enumerate(p.dim, k_bound)?;
                let u = p.coords(x);
                let d: Vec<T> = (1..=p.dim).map(|l| h.coeff(l)).collect();
                Ok(set
                    .indices()
                    .iter()
                    .map(|m| p.scaled_partial(&u, m) * monomial(&d, m))
                    .sum())
            }
            _ => {
                let (f, theta) = self.ridge().expect("ridge target");
                let s = theta.inner_product(x);
                let t = theta.inner_product(h);
                let mut term = T::one();
                let mut acc = T::zero();
                for k in 0..k_bound {
                    if k > 0 {
                        term = term * t / T::from_usize_lossy(k);
                    }
                    acc += f.derivative(k, s) * term;
                }
                Ok(acc)
            }
        }
    }
}

/// Law of the regression errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseLaw {
    Gaussian,
    /// Uniform on `[-sigma sqrt(3), sigma sqrt(3)]`.
    Uniform,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T> {
    pub sigma: T,
    pub law: NoiseLaw,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn new(sigma: T, law: NoiseLaw) -> Result<Self> {
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(Error::config("noise.sigma", format!("must be finite and nonnegative, got {sigma}")));
        }
        Ok(NoiseModel { sigma, law })
    }

    pub fn none() -> Self {
        NoiseModel {
            sigma: T::zero(),
            law: NoiseLaw::None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self.law {
            NoiseLaw::None => T::zero(),
            NoiseLaw::Gaussian => {
                let e: f64 = StandardNormal.sample(rng);
                self.sigma * T::lit(e)
            }
            NoiseLaw::Uniform => {
                let u: f64 = rng.random_range(-1.0..1.0);
                self.sigma * T::lit(3f64.sqrt() * u)
            }
        }
    }
}

/// Responses with the noise realisations that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Responses<T> {
    pub values: Vec<T>,
    pub noise: Vec<T>,
}

/// `Y_j = g(X_j) + eps_j`.
pub fn respond<T: Scalar, R: Rng + ?Sized>(
    target: &RegressionTarget<T>,
    noise: &NoiseModel<T>,
    covariates: &[FunctionVec<T>],
    rng: &mut R,
) -> Responses<T> {
    let noise_draws: Vec<T> = covariates.iter().map(|_| noise.draw(rng)).collect();
    let values = covariates
        .iter()
        .zip(&noise_draws)
        .map(|(x, &e)| target.value(x) + e)
        .collect();
    Responses {
        values,
        noise: noise_draws,
    }
}

/// A simulated sample together with its noise realisations.
#[derive(Debug, Clone)]
pub struct SimulatedData<T> {
    pub data: Dataset<T>,
    pub noise: Vec<T>,
}

/// Covariates from stream `(seed, path, COVARIATES)`, noise from `(seed, path, NOISE)`.
pub fn simulate<T: Scalar>(
    model: &GaussianCovariateModel<T>,
    target: &RegressionTarget<T>,
    noise: &NoiseModel<T>,
    n: usize,
    master_seed: u64,
    path: &[u64],
) -> Result<SimulatedData<T>> {
    if n == 0 {
        return Err(Error::config("n", "sample size must be positive"));
    }
    let xs = sample_covariates(model, n, master_seed, path);
    let mut noise_path = path.to_vec();
    noise_path.push(purpose::NOISE);
    let resp = respond(target, noise, &xs, &mut stream_rng(master_seed, &noise_path));
    Ok(SimulatedData {
        data: Dataset::new(xs, resp.values)?,
        noise: resp.noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly_index::MultiIndexSet;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fv(c: &[f64]) -> FunctionVec<f64> {
        FunctionVec::new(c.to_vec()).unwrap()
    }

    fn model(lams: &[f64]) -> GaussianCovariateModel<f64> {
        GaussianCovariateModel::new(FunctionVec::zeros(lams.len()), lams.to_vec(), Basis::TrigonometricFourier).unwrap()
    }

    #[test]
    fn coordinate_variances_match_eigenvalues() {
        let m = model(&[1.0, 0.25]);
        let xs = sample_covariates(&m, 100_000, 11, &[]);
        let n = xs.len() as f64;
        let v1 = xs.iter().map(|x| x.coeff(1).powi(2)).sum::<f64>() / n;
        let v2 = xs.iter().map(|x| x.coeff(2).powi(2)).sum::<f64>() / n;
        assert!((v1 - 1.0).abs() <= 0.02, "{v1}");
        assert!((v2 - 0.25).abs() <= 0.005, "{v2}");
        let m1 = xs.iter().map(|x| x.coeff(1)).sum::<f64>() / n;
        assert!(m1.abs() <= 3.0 * (1.0 / n).sqrt());
        assert!(xs.iter().all(|x| x.is_finite_rank()));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = model(&[0.5, 0.1, 0.01]);
        let a = sample_covariates(&m, 50, 3, &[1, 2]);
        let b = sample_covariates(&m, 50, 3, &[1, 2]);
        assert_eq!(a, b);
    }

    #[test]
    fn model_validation() {
        assert!(GaussianCovariateModel::new(fv(&[0.0]), vec![0.1, 0.2], Basis::TrigonometricFourier).is_err());
        assert!(GaussianCovariateModel::new(fv(&[0.0]), vec![0.0], Basis::TrigonometricFourier).is_err());
        assert!(GaussianCovariateModel::<f64>::new(fv(&[0.0]), vec![], Basis::TrigonometricFourier).is_err());
    }

    #[test]
    fn truncation_levels() {
        let d = EigenDecay::Exponential {
            c_lambda: 1.0,
            c_gamma1: 1.0,
            gamma: 2.0,
        };
        // exp(-36) / exp(-1) ~ 6e-16 < 1e-12 but exp(-25)/exp(-1) ~ 4e-11 is not
        assert_eq!(d.truncation_level(), 5);
        let p = EigenDecay::Polynomial { c_lambda: 1.0, p: 2.0 };
        assert_eq!(p.truncation_level(), MAX_TRUNCATION);
    }

    #[test]
    fn responses_without_noise() {
        let m = model(&[0.3, 0.1]);
        let xs = sample_covariates(&m, 20, 5, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = RegressionTarget::ExpLinear(fv(&[0.0]));
        let r = respond(&zero, &NoiseModel::none(), &xs, &mut rng);
        assert!(r.values.iter().all(|&y| y == 1.0));

        let theta = fv(&[0.6, -0.8]);
        let q = RegressionTarget::Quadratic(theta.clone());
        let r = respond(&q, &NoiseModel::new(0.0, NoiseLaw::Gaussian).unwrap(), &xs, &mut rng);
        for (x, y) in xs.iter().zip(&r.values) {
            assert_abs_diff_eq!(*y, theta.inner_product(x).powi(2), epsilon = 1e-15);
        }
    }

    #[test]
    fn noise_is_centered_with_bounded_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000;
        for law in [NoiseLaw::Gaussian, NoiseLaw::Uniform] {
            let nm = NoiseModel::new(0.5, law).unwrap();
            let draws: Vec<f64> = (0..n).map(|_| nm.draw(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|e| e * e).sum::<f64>() / n as f64;
            assert!(mean.abs() <= 4.0 * 0.5 / (n as f64).sqrt(), "{law:?} mean {mean}");
            assert!((var - 0.25).abs() < 0.01, "{law:?} var {var}");
            if law == NoiseLaw::Uniform {
                assert!(draws.iter().all(|e| e.abs() <= 0.5 * 3f64.sqrt()));
            }
        }
        assert!(NoiseModel::new(-0.1, NoiseLaw::Gaussian).is_err());
    }

    #[test]
    fn frechet_coefficient_examples() {
        let set = MultiIndexSet::enumerate(1, 3).unwrap();
        let g = RegressionTarget::ExpLinear(fv(&[1.0]));
        let x = fv(&[0.0]);
        assert_abs_diff_eq!(g.frechet_coefficients(&x, &set)[2], 0.5, epsilon = 1e-15);

        let x = fv(&[0.3, -0.2]);
        let set2 = MultiIndexSet::enumerate(2, 3).unwrap();
        for target in [
            RegressionTarget::ExpLinear(fv(&[0.4, 0.1])),
            RegressionTarget::CosLinear(fv(&[0.4, 0.1])),
            RegressionTarget::Quadratic(fv(&[0.4, 0.1])),
        ] {
            assert_abs_diff_eq!(target.frechet_coefficients(&x, &set2)[0], target.value(&x), epsilon = 1e-15);
        }

        let c = RegressionTarget::CosLinear(fv(&[0.7]));
        assert_abs_diff_eq!(c.frechet_coefficients(&fv(&[0.0]), &set)[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ridge_norms_and_directional_forms() {
        let theta = fv(&[0.6, 0.8]);
        let x = fv(&[0.5, 0.0]);
        let g = RegressionTarget::ExpLinear(theta.clone());
        let s = 0.3f64;
        assert_abs_diff_eq!(g.derivative_norm(&x, 2).unwrap(), s.exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(g.sup_derivative_norm(&x, 2, 0.5).unwrap(), (s + 0.5).exp(), epsilon = 1e-14);
        let u = fv(&[1.0, 0.0]);
        let v = fv(&[0.0, 1.0]);
        assert_abs_diff_eq!(g.directional(&x, &[u.clone(), v.clone()]), s.exp() * 0.6 * 0.8, epsilon = 1e-14);

        let c = RegressionTarget::CosLinear(theta.clone());
        assert_abs_diff_eq!(c.directional(&x, &[u.clone()]), -s.sin() * 0.6, epsilon = 1e-14);
        // interval [0.3 + pi/2 - 0.5, 0.3 + pi/2 + 0.5] has no multiple of pi
        let a = 0.3 + std::f64::consts::FRAC_PI_2 - 0.5;
        let want = a.cos().abs().max((a + 1.0).cos().abs());
        assert_abs_diff_eq!(c.sup_derivative_norm(&x, 1, 0.5).unwrap(), want, epsilon = 1e-14);
        assert_abs_diff_eq!(c.sup_derivative_norm(&x, 0, 0.5).unwrap(), 1.0, epsilon = 1e-14);

        let q = RegressionTarget::Quadratic(theta);
        assert_abs_diff_eq!(q.derivative_norm(&x, 2).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(q.derivative_norm(&x, 3).unwrap(), 0.0);
    }

    #[test]
    fn poly_coord_reproduces_itself() {
        // g = 1 + 2 u1 - u1 u2 + 0.5 u2^2 around center c
        let center = fv(&[0.1, -0.3]);
        let p = PolyCoord::new(
            center,
            2,
            vec![(vec![0, 0], 1.0), (vec![1, 0], 2.0), (vec![1, 1], -1.0), (vec![0, 2], 0.5)],
        )
        .unwrap();
        let g = RegressionTarget::PolyCoord(p);
        let x = fv(&[0.4, 0.2]);
        let set = MultiIndexSet::enumerate(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let d = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let xp = fv(&[0.4 + d[0], 0.2 + d[1]]);
            assert_abs_diff_eq!(g.taylor_polynomial(&x, &set, &d), g.value(&xp), epsilon = 1e-12);
        }
        // first derivative along phi_1 equals 2 - u2
        let u = fv(&[1.0, 0.0]);
        assert_abs_diff_eq!(g.directional(&x, &[u]), 2.0 - 0.5, epsilon = 1e-14);
        // second-order tensor [[0,-1],[-1,1]] has Frobenius norm sqrt(3)
        assert_abs_diff_eq!(g.derivative_norm(&x, 2).unwrap(), 3f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn taylor_polynomial_approaches_exponential() {
        let g = RegressionTarget::ExpLinear(fv(&[0.8]));
        let x = fv(&[0.25]);
        let coords = [0.4];
        let want = (0.8f64 * 0.25).exp() * (0.8f64 * 0.4).exp();
        let mut last = f64::INFINITY;
        for k in [2, 4, 8, 12] {
            let set = MultiIndexSet::enumerate(1, k).unwrap();
            let err = (g.taylor_polynomial(&x, &set, &coords) - want).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-12);
        assert_abs_diff_eq!(g.taylor_polynomial(&x, &MultiIndexSet::enumerate(1, 3).unwrap(), &[0.0]), g.value(&x));
    }

    #[test]
    fn taylor_along_agrees_with_multi_index_sum() {
        let theta = fv(&[0.5, -0.4, 0.3]);
        let x = fv(&[0.1, 0.2, -0.1]);
        let h = fv(&[0.2, -0.1, 0.05]);
        let set = MultiIndexSet::enumerate(3, 4).unwrap();
        for g in [
            RegressionTarget::ExpLinear(theta.clone()),
            RegressionTarget::CosLinear(theta.clone()),
            RegressionTarget::Quadratic(theta.clone()),
        ] {
            let a = g.taylor_along(&x, &h, 4).unwrap();
            let b = g.taylor_polynomial(&x, &set, h.coeffs());
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn small_ball_constant() {
        let m = GaussianCovariateModel::new(fv(&[0.2, 0.0]), vec![0.4, 0.1], Basis::TrigonometricFourier).unwrap();
        let c = m.small_ball_constant(&fv(&[0.0, 0.1]), 0.5);
        // max(0.04 / (0.4 * 0.25), 0.01 / (0.1 * 0.25)) = max(0.4, 0.4)
        assert_abs_diff_eq!(c, 0.4, epsilon = 1e-12);
        assert_eq!(m.small_ball_constant(m.mean(), 0.5), 0.0);
        assert!(m.small_ball_constant(&fv(&[0.0, 0.0, 1.0]), 0.5).is_infinite());
    }
}
