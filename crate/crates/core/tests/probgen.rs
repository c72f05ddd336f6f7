use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use sketchy_cgm::prelude::*;
use sketchy_cgm::probgen::{
    gen_completion_problem, gen_phase_problem, load_triples, parse_triples, snr_db, write_triples, Noise,
    SyntheticCompletionSpec, SyntheticPhaseSpec,
};
use sketchy_cgm::reference::dense_measure;

fn phase(n: usize, views: usize, noise: Noise, seed: u64) -> sketchy_cgm::probgen::PhaseProblem<f64> {
    gen_phase_problem::<f64>(&SyntheticPhaseSpec { n, views, noise, seed }).unwrap()
}

#[test]
fn noiseless_measurements_are_squared_coded_transforms() {
    let p = phase(12, 3, Noise::None, 1);
    let n = 12;
    assert_eq!(p.b.len(), 3 * n);
    let x = &p.truth;
    for view in 0..3 {
        let d = p.op.sensing().diagonal(view);
        for k in 0..n {
            let coeff: Complex64 = (0..n)
                .map(|j| Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64) * d[j] * x[j])
                .sum();
            let expect = coeff.norm_sqr();
            assert!((p.b[view * n + k] - expect).abs() <= 1e-10 * expect.max(1.0));
        }
    }
    let lifted = DMatrix::from_column_slice(n, 1, x.as_slice());
    let dense = dense_measure(&p.op, &(&lifted * lifted.adjoint())).unwrap();
    assert!((dense - &p.b).norm() <= 1e-10 * p.b.norm());
    assert_eq!(p.b, p.clean);
    assert!((p.alpha - p.b.mean()).abs() <= 1e-12 * p.alpha);
}

#[test]
fn measurement_count_is_ten_n() {
    for n in [16, 64, 100] {
        let p = phase(n, 10, Noise::None, 2);
        assert_eq!(p.b.len(), 10 * n);
        assert_eq!(MeasurementOperator::<Complex64>::measurements(&p.op), 10 * n);
    }
}

#[test]
fn noise_hits_the_requested_snr() {
    for seed in 0..5 {
        for snr in [10.0, 20.0, 30.0] {
            let p = phase(64, 20, Noise::Poisson { snr_db: snr }, seed);
            let realized = snr_db(&p.clean, &p.b);
            assert!((realized - snr).abs() <= 0.5, "poisson {snr} dB realized {realized}");
            assert!(p.b.iter().all(|v| *v >= 0.0));
            let p = phase(64, 20, Noise::Gaussian { snr_db: snr }, seed);
            assert!((snr_db(&p.clean, &p.b) - snr).abs() <= 1e-9);
        }
    }
}

#[test]
fn generators_are_deterministic() {
    let a = phase(32, 4, Noise::Poisson { snr_db: 15.0 }, 7);
    let b = phase(32, 4, Noise::Poisson { snr_db: 15.0 }, 7);
    assert_eq!(a.b, b.b);
    assert_eq!(a.truth, b.truth);
    let c = phase(32, 4, Noise::Poisson { snr_db: 15.0 }, 8);
    assert_ne!(a.truth, c.truth);

    let spec = SyntheticCompletionSpec { m: 20, n: 15, rank: 3, observed: 0.5, test_fraction: 0.2, noise_std: 0.1, seed: 4 };
    let (p, q) = (gen_completion_problem::<f64>(&spec).unwrap(), gen_completion_problem::<f64>(&spec).unwrap());
    assert_eq!(p.b, q.b);
    assert_eq!(p.op.entries(), q.op.entries());
}

#[test]
fn completion_split_is_disjoint() {
    let spec = SyntheticCompletionSpec { m: 30, n: 25, rank: 2, observed: 0.6, test_fraction: 0.25, noise_std: 0.0, seed: 1 };
    let p = gen_completion_problem::<f64>(&spec).unwrap();
    let total = (0.6f64 * 750.0).round() as usize;
    assert_eq!(p.b.len() + p.test.entries.len(), total);
    let train: std::collections::HashSet<_> = p.op.entries().iter().copied().collect();
    assert!(p.test.entries.iter().all(|e| !train.contains(e)));
    // noiseless values are entries of the planted matrix
    let x = p.truth();
    for (k, &(i, j)) in p.op.entries().iter().enumerate() {
        assert!((p.b[k] - x[(i, j)]).abs() <= 1e-12);
    }
}

#[test]
fn triples_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratings.txt");
    let entries = vec![(0, 1), (2, 0), (1, 1), (2, 2)];
    let values = vec![4.0, 1.5, 3.0, 5.0];
    write_triples(&path, &entries, &values).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().next().unwrap().starts_with("1 2 "));
    let t = load_triples(&path).unwrap();
    assert_eq!((t.m, t.n), (3, 3));
    assert_eq!(t.entries, entries);
    assert_eq!(t.values, values);
    assert_eq!(t.binarized(), vec![1.0, -1.0, -1.0, 1.0]);
}

#[test]
fn triples_are_compacted() {
    let t = parse_triples("# ratings\n10 7 4\n\n3 7 2.5\n10 42 1\n").unwrap();
    assert_eq!((t.m, t.n), (2, 2));
    assert_eq!(t.row_ids, vec![3, 10]);
    assert_eq!(t.col_ids, vec![7, 42]);
    assert_eq!(t.entries, vec![(1, 0), (0, 0), (1, 1)]);
    let op = t.operator().unwrap();
    assert_eq!(MeasurementOperator::<f64>::measurements(&op), 3);
}

#[test]
fn malformed_triples_report_their_line() {
    for (text, line) in [("1 1 2\n1 x 3\n", 2), ("1 1 2\n\n2 2\n", 3), ("1 1 1\n1 1 2\n", 2), ("1 1 nan\n", 1)] {
        match parse_triples(text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(matches!(parse_triples("0 1 2\n"), Err(Error::IndexOutOfRange { line: 1, .. })));
}
