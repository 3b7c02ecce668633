//! Estimator checks against an exact rational solve of the normal equations.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use funloc::diagnostics::decompose_error;
use funloc::estimator::{assemble, estimate_at, EstimatorConfig};
use funloc::function_space::FunctionVec;
use funloc::simulation::{simulate, EigenDecay, GaussianCovariateModel, NoiseLaw, NoiseModel, PolyCoord, RegressionTarget};
use funloc::Dataset;

use common::oracle;

fn model(len: usize) -> GaussianCovariateModel<f64> {
    let decay = EigenDecay::Exponential {
        c_lambda: 0.3,
        c_gamma1: 0.5,
        gamma: 1.0,
    };
    GaussianCovariateModel::from_decay(FunctionVec::zeros(1), decay, Some(len)).unwrap()
}

fn random_site(rng: &mut ChaCha8Rng, len: usize) -> FunctionVec<f64> {
    FunctionVec::new((0..len).map(|_| rng.random_range(-0.2..0.2)).collect()).unwrap()
}

fn theta(len: usize) -> FunctionVec<f64> {
    FunctionVec::new((1..=len).map(|l| 0.7 / l as f64).collect()).unwrap()
}

#[test]
fn agrees_with_exact_normal_equations_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = NoiseModel::new(0.5, NoiseLaw::Gaussian).unwrap();
    let mut worst = 0.0f64;
    for inst in 0..50u64 {
        let j = rng.random_range(1..=3);
        let k = rng.random_range(1..=3);
        let n = rng.random_range(10..=100);
        let len = rng.random_range(j..=6);
        let delta = rng.random_range(0.4..0.95);
        let m = model(len);
        let target = RegressionTarget::ExpLinear(theta(len));
        let sim = simulate(&m, &target, &noise, n, 100 + inst, &[]).unwrap();
        let x = random_site(&mut rng, len);
        let cfg = EstimatorConfig::new(j, k, delta).unwrap();
        let got = estimate_at(&sim.data, &x, &cfg).unwrap();
        let want = oracle(&sim.data, &x, j, k, delta, true).unwrap();
        assert_eq!(got.n_local, want.n_local);
        let set = cfg.index_set().unwrap();
        for (kk, &a) in want.indices.iter().zip(&want.alpha) {
            let pos = set.position(kk).unwrap();
            let err = (got.alpha[pos] - a).abs();
            worst = worst.max(err);
            assert!(err <= 1e-8 * (1.0 + a.abs()), "instance {inst} index {kk:?}: {} vs {a}", got.alpha[pos]);
        }
        assert_eq!(got.g_hat, got.alpha[0]);
    }
    assert!(worst < 1e-8);
}

#[test]
fn residual_is_small_relative_to_rhs() {
    let noise = NoiseModel::new(0.5, NoiseLaw::Uniform).unwrap();
    for (i, (j, k)) in [(1, 1), (2, 3), (3, 3), (4, 4), (5, 2)].into_iter().enumerate() {
        let m = model(8);
        let sim = simulate(&m, &RegressionTarget::CosLinear(theta(8)), &noise, 200, i as u64, &[]).unwrap();
        let cfg = EstimatorConfig::new(j, k, 0.7).unwrap();
        let design = assemble(&sim.data, &FunctionVec::zeros(8), &cfg).unwrap();
        let rhs_norm = design.rhs().iter().map(|v| v * v).sum::<f64>().sqrt();
        let res = funloc::estimator::solve(&design).unwrap();
        assert!(res.solver_report.residual_norm <= 1e-10 * rhs_norm, "J={j} K={k}");
    }
}

#[test]
fn k1_is_the_ridged_local_mean() {
    let m = model(4);
    let noise = NoiseModel::new(0.25, NoiseLaw::Gaussian).unwrap();
    let sim = simulate(&m, &RegressionTarget::Quadratic(theta(4)), &noise, 150, 5, &[]).unwrap();
    let x = FunctionVec::new(vec![0.05, -0.02]).unwrap();
    let cfg = EstimatorConfig::new(3, 1, 0.5).unwrap();
    let got = estimate_at(&sim.data, &x, &cfg).unwrap();
    let mut sum = 0.0;
    let mut count = 0;
    for (xj, &y) in sim.data.covariates().iter().zip(sim.data.responses()) {
        if xj.dist_sq(&x) <= 0.25 {
            sum += y;
            count += 1;
        }
    }
    assert!(count > 0);
    assert!((got.g_hat - sum / (count as f64 + 1.0)).abs() <= 1e-12);
}

#[test]
fn permutation_invariance() {
    let m = model(6);
    let noise = NoiseModel::new(0.5, NoiseLaw::Gaussian).unwrap();
    let sim = simulate(&m, &RegressionTarget::ExpLinear(theta(6)), &noise, 200, 9, &[]).unwrap();
    let x = FunctionVec::zeros(6);
    let cfg = EstimatorConfig::new(3, 3, 0.7).unwrap();
    let base = estimate_at(&sim.data, &x, &cfg).unwrap().g_hat;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let mut order: Vec<usize> = (0..sim.data.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let shuffled = sim.data.select(&order).unwrap();
        let g = estimate_at(&shuffled, &x, &cfg).unwrap().g_hat;
        assert!((g - base).abs() <= 1e-12, "{g} vs {base}");
    }
}

#[test]
fn non_local_points_have_no_influence() {
    let m = model(6);
    let noise = NoiseModel::new(0.5, NoiseLaw::Gaussian).unwrap();
    let sim = simulate(&m, &RegressionTarget::ExpLinear(theta(6)), &noise, 300, 21, &[]).unwrap();
    let x = FunctionVec::new(vec![0.1, 0.1]).unwrap();
    let cfg = EstimatorConfig::new(2, 3, 0.5).unwrap();
    let full = estimate_at(&sim.data, &x, &cfg).unwrap();
    let local: Vec<usize> = (0..sim.data.len())
        .filter(|&i| sim.data.covariates()[i].dist_sq(&x) <= 0.25)
        .collect();
    assert!(local.len() < sim.data.len());
    let only = estimate_at(&sim.data.select(&local).unwrap(), &x, &cfg).unwrap();
    assert_eq!(full.g_hat.to_bits(), only.g_hat.to_bits());
    assert_eq!(full.alpha, only.alpha);
}

#[test]
fn polynomials_of_low_degree_are_reproduced_up_to_ridge_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (j, k) in [(1, 2), (2, 2), (2, 3), (3, 3)] {
        let len = 5;
        let m = model(len);
        let x = random_site(&mut rng, 3);
        let set = funloc::MultiIndexSet::enumerate(j, k).unwrap();
        let terms: Vec<(Vec<u32>, f64)> = set
            .indices()
            .iter()
            .map(|kk| (kk.clone(), rng.random_range(-1.0..1.0)))
            .collect();
        let g_x = terms[0].1;
        let target = RegressionTarget::PolyCoord(PolyCoord::new(x.clone(), j, terms).unwrap());
        let sim = simulate(&m, &target, &NoiseModel::none(), 120, j as u64 * 10 + k as u64, &[]).unwrap();
        let delta = 0.9;

        let unridged = oracle(&sim.data, &x, j, k, delta, false).expect("nonsingular local moment matrix");
        assert!((unridged.intercept() - g_x).abs() <= 1e-8, "J={j} K={k}");

        let cfg = EstimatorConfig::new(j, k, delta).unwrap();
        let report = decompose_error(&sim.data, &x, &cfg, &target, &vec![0.0; sim.data.len()]).unwrap();
        assert_eq!(report.b2, 0.0);
        assert!(report.b3.abs() <= 1e-12 && report.v == 0.0);
        assert!(((report.g_hat - report.g_true) - report.b1).abs() <= 1e-10 * (1.0 + report.b1.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn duplicating_the_sample_matches_exact_oracle(seed in 0u64..1000, j in 1usize..=2, k in 1usize..=3) {
        let m = model(4);
        let sim = simulate(&m, &RegressionTarget::ExpLinear(theta(4)), &NoiseModel::new(0.1, NoiseLaw::Gaussian).unwrap(), 30, seed, &[]).unwrap();
        let mut xs = sim.data.covariates().to_vec();
        xs.extend_from_slice(sim.data.covariates());
        let mut ys = sim.data.responses().to_vec();
        ys.extend_from_slice(sim.data.responses());
        let doubled = Dataset::new(xs, ys).unwrap();
        let x = FunctionVec::zeros(4);
        let cfg = EstimatorConfig::new(j, k, 0.8).unwrap();
        let got = estimate_at(&doubled, &x, &cfg).unwrap();
        let want = oracle(&doubled, &x, j, k, 0.8, true).unwrap();
        prop_assert!((got.g_hat - want.intercept()).abs() <= 1e-8);
        prop_assert_eq!(got.n_local, want.n_local);
        prop_assert_eq!(want.n_local % 2, 0);
    }
}
