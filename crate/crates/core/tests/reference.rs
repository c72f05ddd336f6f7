use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sketchy_cgm::linalg::thin_svd;
use sketchy_cgm::prelude::*;
use sketchy_cgm::probgen::{gen_completion_problem, SyntheticCompletionSpec};
use sketchy_cgm::reference::{dense_gap, dense_optimum, eps_rank, phase_aligned_error, psnr, test_error, EvalSpec};

#[test]
fn phase_error_matches_a_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = |rng: &mut ChaCha8Rng| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    for _ in 0..10 {
        let x = DVector::from_fn(9, |_, _| c(&mut rng));
        let xhat = DVector::from_fn(9, |_, _| c(&mut rng));
        let grid = (0..20_000)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / 20_000.0;
                (&xhat * Complex64::from_polar(1.0, phi) - &x).norm() / x.norm()
            })
            .fold(f64::INFINITY, f64::min);
        let closed = phase_aligned_error(&xhat, &x).unwrap();
        assert!(closed <= grid + 1e-12 && closed >= grid - 1e-6, "{closed} vs {grid}");
    }
    // a global phase is invisible
    let x = DVector::from_fn(5, |_, _| c(&mut rng));
    let rotated = &x * Complex64::from_polar(1.0, 1.234);
    assert!(phase_aligned_error(&rotated, &x).unwrap() <= 1e-14);
}

#[test]
fn psnr_known_values() {
    assert!((psnr(&[1.0, 1.0], &[0.0, 0.0], 10.0).unwrap() - 20.0).abs() < 1e-12);
    assert!((psnr(&[0.5, 0.0, 0.0, 0.0], &[0.0; 4], 1.0).unwrap() - 20.0 * 4f64.log10()).abs() < 1e-12);
    assert_eq!(psnr(&[3.0], &[3.0], 1.0).unwrap(), f64::INFINITY);
}

#[test]
fn test_error_matches_dense_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = DMatrix::<f64>::from_fn(8, 6, |_, _| rng.random_range(-1.0..1.0));
    let svd = thin_svd(&x);
    let factors = FactoredMatrix { u: svd.u.clone(), sigma: svd.s.clone(), v: svd.v.clone() };
    let entries: Vec<(usize, usize)> = (0..20).map(|k| (k % 8, (3 * k) % 6)).collect();
    let values = DVector::from_fn(20, |_, _| rng.random_range(-1.0..1.0));
    for loss in [LossKind::Gauss, LossKind::Huber { delta: 1.0 }] {
        let eval = EvalSpec { entries: entries.clone(), values: values.clone(), loss };
        let dense: f64 = entries.iter().zip(values.iter()).map(|(&(i, j), b)| loss.psi(x[(i, j)], *b)).sum::<f64>() / 20.0;
        assert!((test_error(&factors, &eval).unwrap() - dense).abs() <= 1e-12);
    }
}

#[test]
fn dense_optimum_is_certified() {
    let p = gen_completion_problem::<f64>(&SyntheticCompletionSpec {
        m: 10,
        n: 8,
        rank: 2,
        observed: 0.6,
        test_fraction: 0.0,
        noise_std: 0.1,
        seed: 3,
    })
    .unwrap();
    let alpha = 0.7 * thin_svd(&p.truth()).s.sum();
    let spec = p.spec(LossKind::Gauss, alpha).unwrap();
    let opt = dense_optimum::<f64, _>(&spec.op, &spec.loss, alpha, Template::Schatten1, 1e-9, 200_000).unwrap();
    assert!(opt.gap <= 1e-9 && opt.gap >= -1e-12);
    assert!(thin_svd(&opt.x).s.sum() <= alpha * (1.0 + 1e-9));
    let recomputed = dense_gap(&spec.op, &spec.loss, alpha, Template::Schatten1, &opt.x).unwrap();
    assert!((recomputed - opt.gap).abs() <= 1e-12);
    // any feasible point is no better than the certified lower bound
    let feasible = &opt.x * 0.5;
    let value = spec.loss.value(&sketchy_cgm::reference::dense_measure(&spec.op, &feasible).unwrap()).unwrap();
    assert!(value >= opt.lower_bound());
}

proptest! {
    #[test]
    fn eps_rank_is_monotone(values in proptest::collection::vec(0.0f64..10.0, 1..20), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(eps_rank(&values, hi) <= eps_rank(&values, lo));
        prop_assert!(eps_rank(&values, lo) <= values.len());
    }
}
