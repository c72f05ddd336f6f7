use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use sketchy_cgm::linalg::thin_svd;
use sketchy_cgm::prelude::*;
use sketchy_cgm::probgen::{gen_completion_problem, gen_phase_problem, Noise, SyntheticCompletionSpec, SyntheticPhaseSpec};
use sketchy_cgm::reference::{dense_measure, dense_optimum, DenseCgm};

fn completion(m: usize, n: usize, observed: f64, noise_std: f64, seed: u64) -> sketchy_cgm::probgen::CompletionProblem<f64> {
    gen_completion_problem::<f64>(&SyntheticCompletionSpec {
        m,
        n,
        rank: 2,
        observed,
        test_fraction: 0.0,
        noise_std,
        seed,
    })
    .unwrap()
}

fn nuclear<T: Scalar>(x: &DMatrix<T>) -> f64 {
    thin_svd(x).s.iter().map(|s| s.as_f64()).sum()
}

#[test]
fn scalar_problem_converges_to_data() {
    let op = EntrySampling::full(1, 1).unwrap();
    let loss = Loss::gauss(DVector::from_vec(vec![0.5]), Normalization::Sum).unwrap();
    let spec = ProblemSpec::<f64, _>::new(op, loss, 1.0, Template::Schatten1).rank(1).eps(1e-4).max_iters(100_000);
    let sol = solve(spec).unwrap();
    assert_eq!(sol.status, Status::Converged);
    assert!(sol.gap <= 1e-4);
    assert!((sol.factors.entry(0, 0) - 0.5).abs() <= 1e-3);
    assert!((sol.z[0] - 0.5).abs() <= 1e-3);
}

#[test]
fn schatten_iterates_stay_in_the_ball() {
    let p = completion(12, 10, 0.5, 0.1, 1);
    let alpha = 0.5 * nuclear(&p.truth());
    let mut solver = SketchyCgm::new(p.spec(LossKind::Gauss, alpha).unwrap().rank(2)).unwrap();
    let mut x = DMatrix::<f64>::zeros(12, 10);
    for _ in 0..80 {
        let eval = solver.evaluate().unwrap();
        x = &x * (1.0 - eval.eta) + eval.direction.to_dense(alpha, 12, 10) * eval.eta;
        solver.advance(&eval).unwrap();
        assert!(nuclear(&x) <= alpha * (1.0 + 1e-8));
        let z = dense_measure(&p.op, &x).unwrap();
        assert!((solver.z() - z).norm() <= 1e-10 * solver.z().norm());
    }
}

#[test]
fn psd_iterates_stay_in_the_spectraplex() {
    let p = gen_phase_problem::<f64>(&SyntheticPhaseSpec { n: 8, views: 4, noise: Noise::None, seed: 2 }).unwrap();
    let alpha = p.alpha;
    let mut solver = SketchyCgm::new(p.spec(LossKind::Gauss).unwrap().rank(1)).unwrap();
    let mut x = DMatrix::<Complex64>::zeros(8, 8);
    for _ in 0..60 {
        let eval = solver.evaluate().unwrap();
        let eta = Complex64::new(eval.eta, 0.0);
        x = &x * (Complex64::new(1.0, 0.0) - eta) + eval.direction.to_dense(alpha, 8, 8) * eta;
        solver.advance(&eval).unwrap();
        let trace: f64 = x.diagonal().iter().map(|c| c.re).sum();
        assert!(trace <= alpha * (1.0 + 1e-8));
        let lmin = SymmetricEigen::new(x.clone()).eigenvalues.min();
        assert!(lmin >= -1e-8 * alpha, "eigmin {lmin}");
    }
}

#[test]
fn converged_gap_bounds_suboptimality() {
    for seed in 0..4 {
        let p = completion(8, 6, 0.7, 0.1, 10 + seed);
        let alpha = 0.6 * nuclear(&p.truth());
        let spec = p.spec(LossKind::Gauss, alpha).unwrap().eps(1e-3).max_iters(50_000).seed(seed);
        let opt = dense_optimum::<f64, _>(&spec.op, &spec.loss, alpha, Template::Schatten1, 1e-10, 200_000).unwrap();
        let sol = solve(spec).unwrap();
        assert_eq!(sol.status, Status::Converged);
        assert!(sol.objective - opt.lower_bound() <= 1e-3 + 1e-8);
        // the reported gap certifies every traced iterate
        for r in &sol.trace {
            assert!(r.objective - opt.lower_bound() <= r.gap + 1e-8);
        }
    }
}

#[test]
fn completion_reconstruction_is_near_reference_truncation() {
    let p = completion(30, 30, 0.4, 0.0, 4);
    let alpha = nuclear(&p.truth());
    let spec = p.spec(LossKind::Gauss, alpha).unwrap().rank(2).max_iters(300).eps(1e-300).seed(4);
    let dense = DenseCgm::<f64, _>::new(&spec.op, &spec.loss, alpha, Template::Schatten1, Variant::Standard, spec.spectral)
        .unwrap()
        .run(300, 0.0, false)
        .unwrap();
    let sol = solve(spec.clone()).unwrap();
    let svd = thin_svd(&dense.x);
    let (u, s, v) = (svd.u.columns(0, 2), svd.s.rows(0, 2).into_owned(), svd.v.columns(0, 2));
    let truncated: DMatrix<f64> = u * DMatrix::from_diagonal(&s) * v.transpose();
    // the iterate is not yet low rank, so the sketch can only be held to
    // its tail bound rather than to the truncation itself
    let tail = (&dense.x - &truncated).norm();
    let xhat = sol.factors.to_dense();
    assert!((&xhat - &dense.x).norm() <= 3.0 * 2f64.sqrt() * tail);
    assert!((&xhat - &truncated).norm() <= tail);
}

#[test]
fn short_phase_run_agrees_with_dense_reference() {
    let p = gen_phase_problem::<f64>(&SyntheticPhaseSpec { n: 8, views: 4, noise: Noise::Poisson { snr_db: 25.0 }, seed: 3 }).unwrap();
    for loss in [LossKind::Gauss, LossKind::Poisson] {
        let spec = p.spec(loss).unwrap().rank(1);
        let mut dense = DenseCgm::new(&spec.op, &spec.loss, spec.alpha, Template::Psd, spec.variant, spec.spectral).unwrap();
        let mut solver = SketchyCgm::new(spec.clone()).unwrap();
        for _ in 0..30 {
            let eval = solver.evaluate().unwrap();
            let reference = dense.evaluate().unwrap();
            assert!((eval.objective - reference.objective).abs() <= 1e-9 * reference.objective.abs().max(1.0));
            assert!((solver.z() - &reference.z).norm() <= 1e-9 * reference.z.norm());
            solver.advance(&eval).unwrap();
            dense.advance(&reference).unwrap();
        }
        let x = dense.x();
        let xo = x * solver.sketch().omega();
        assert!((solver.sketch().range() - &xo).norm() <= 1e-9 * xo.norm());
    }
}

#[test]
fn runs_are_deterministic() {
    let p = completion(15, 12, 0.5, 0.1, 5);
    let alpha = nuclear(&p.truth());
    let run = || solve(p.spec(LossKind::Huber { delta: 1.0 }, alpha).unwrap().rank(3).max_iters(120).eps(1e-300).seed(9)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.factors, b.factors);
    assert_eq!(a.z, b.z);
    let objectives = |s: &Solution<f64>| s.trace.iter().map(|r| r.objective).collect::<Vec<_>>();
    assert_eq!(objectives(&a), objectives(&b));
}
