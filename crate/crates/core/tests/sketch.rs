use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sketchy_cgm::prelude::*;

fn random_vec<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> DVector<T> {
    DVector::from_fn(n, |_, _| T::sample_normal(rng))
}

fn rel(a: f64, b: f64) -> f64 {
    if b > 0.0 { a / b } else { a }
}

/// Applies random cgm and linear updates to a sketch and an explicit shadow,
/// returning the worst relative mismatch of `(Y, W)` against `(X Omega, Psi X)`.
fn shadow_mismatch<T: Scalar>(m: usize, n: usize, rank: usize, steps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sketch = Sketch::<T>::new(m, n, rank, seed).unwrap();
    let mut x = DMatrix::<T>::zeros(m, n);
    let mut worst: f64 = 0.0;
    for t in 0..steps {
        let (u, v) = (random_vec::<T>(&mut rng, m), random_vec::<T>(&mut rng, n));
        if t % 7 == 3 {
            let (b1, b2) = (T::sample_normal(&mut rng), T::sample_normal(&mut rng));
            sketch.linear_update(b1, b2, &u, &v).unwrap();
            x = x * b1 + (&u * v.adjoint()) * b2;
        } else {
            let eta = 2.0 / (t as f64 + 2.0);
            let e = Real::<T>::lit(eta);
            sketch.cgm_update(&u, &v, e).unwrap();
            x = x * T::from_real(Real::<T>::lit(1.0 - eta)) + (&u * v.adjoint()) * T::from_real(e);
        }
        let xo = &x * sketch.omega();
        let px = sketch.psi() * &x;
        worst = worst
            .max(rel((sketch.range() - &xo).norm().as_f64(), xo.norm().as_f64()))
            .max(rel((sketch.corange() - &px).norm().as_f64(), px.norm().as_f64()));
    }
    worst
}

#[test]
fn sketch_tracks_shadow_over_many_updates() {
    assert!(shadow_mismatch::<f64>(30, 20, 3, 100, 1) <= 1e-10);
    assert!(shadow_mismatch::<Complex64>(16, 16, 2, 100, 2) <= 1e-10);
}

#[test]
fn full_step_recovers_rank_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for rank in [1, 3] {
        let mut sketch = Sketch::<f64>::new(25, 18, rank, 9).unwrap();
        // prior content is erased by a unit step
        sketch.cgm_update(&random_vec(&mut rng, 25), &random_vec(&mut rng, 18), 0.5).unwrap();
        let (u, v) = (random_vec::<f64>(&mut rng, 25), random_vec::<f64>(&mut rng, 18));
        sketch.cgm_update(&u, &v, 1.0).unwrap();
        let x = &u * v.transpose();
        let xhat = sketch.reconstruct(rank).unwrap().to_dense();
        assert!((xhat - &x).norm() <= 1e-10 * x.norm());
    }
}

#[test]
fn low_rank_input_is_reconstructed_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (m, n, r) = (40, 30, 4);
    let mut sketch = Sketch::<Complex64>::new(m, n, r, 3).unwrap();
    let mut x = DMatrix::zeros(m, n);
    for _ in 0..r {
        let (u, v) = (random_vec::<Complex64>(&mut rng, m), random_vec::<Complex64>(&mut rng, n));
        sketch.linear_update(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), &u, &v).unwrap();
        x += &u * v.adjoint();
    }
    let factors = sketch.reconstruct(r).unwrap();
    assert!((factors.to_dense() - &x).norm() <= 1e-9 * x.norm());
    let utu = factors.u.adjoint() * &factors.u;
    assert!((utu - DMatrix::identity(r, r)).norm() <= 1e-10);
}

#[test]
fn storage_is_linear_in_dimensions() {
    for (m, n, r) in [(10, 7, 1), (200, 150, 5), (64, 64, 2)] {
        let ledger = AllocationLedger::new();
        let sketch = ledger.scope(|| Sketch::<f64>::new(m, n, r, 0).unwrap());
        let (k, l) = (2 * r + 1, 4 * r + 3);
        let expected = (k + l) * (m + n);
        assert_eq!(sketch.storage(), expected);
        assert_eq!(ledger.peak_in(Category::Sketch), expected as u64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shadow_invariant_holds_for_any_shape(m in 1usize..12, n in 1usize..12, r in 1usize..4, seed in 0u64..1000) {
        prop_assert!(shadow_mismatch::<f64>(m, n, r, 30, seed) <= 1e-10);
    }

    #[test]
    fn zero_step_is_identity(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sketch = Sketch::<f64>::new(6, 5, 2, seed).unwrap();
        sketch.cgm_update(&random_vec(&mut rng, 6), &random_vec(&mut rng, 5), 1.0).unwrap();
        let (y, w) = (sketch.range().clone(), sketch.corange().clone());
        sketch.cgm_update(&random_vec(&mut rng, 6), &random_vec(&mut rng, 5), 0.0).unwrap();
        prop_assert_eq!(sketch.range(), &y);
        prop_assert_eq!(sketch.corange(), &w);
    }
}
