//! Synthetic phase retrieval and matrix completion instances, and the
//! whitespace triple format for observed entries.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rustfft::FftNum;

use crate::error::{Error, Result};
use crate::losses::{Loss, LossKind, Normalization};
use crate::operators::{build_coded_diffraction, psd_measure, CodedDiffraction, EntrySampling, Lifted};
use crate::reference::EvalSpec;
use crate::scalar::{RealScalar, Scalar};
use crate::solver::{select_alpha_phase, ProblemSpec, Template, Variant};

/// Measurement noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    /// Additive Gaussian noise rescaled to exactly this SNR in dB.
    Gaussian { snr_db: f64 },
    /// `Poisson(c * clean) / c` with the photon scale `c` set so the expected
    /// SNR equals this value in dB.
    Poisson { snr_db: f64 },
}

impl Noise {
    fn validate(&self) -> Result<()> {
        match *self {
            Noise::Gaussian { snr_db } | Noise::Poisson { snr_db } if !(snr_db > 0.0 && snr_db.is_finite()) => {
                Err(Error::InvalidParameter(format!("SNR must be a positive number of dB, got {snr_db}")))
            }
            _ => Ok(()),
        }
    }
}

/// `10 log10(||signal||^2 / ||noise||^2)`.
pub fn snr_db<R: RealScalar>(signal: &DVector<R>, noisy: &DVector<R>) -> f64 {
    let noise = (noisy - signal).norm_squared().as_f64();
    10.0 * (signal.norm_squared().as_f64() / noise).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticPhaseSpec {
    pub n: usize,
    pub views: usize,
    pub noise: Noise,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PhaseProblem<R: RealScalar + FftNum> {
    pub op: Lifted<CodedDiffraction<R>>,
    /// Observed measurements.
    pub b: DVector<R>,
    /// Noiseless measurements `|A x|^2`.
    pub clean: DVector<R>,
    pub truth: DVector<Complex<R>>,
    /// Trace bound, the mean of `b`.
    pub alpha: R,
}

impl<R: RealScalar + FftNum> PhaseProblem<R> {
    /// Psd-template problem with `loss` on the observed measurements. The
    /// Poisson loss gets the Poisson variant.
    pub fn spec(&self, loss: LossKind) -> Result<ProblemSpec<Complex<R>, Lifted<CodedDiffraction<R>>>> {
        let variant = if loss == LossKind::Poisson {
            Variant::Poisson
        } else {
            Variant::Standard
        };
        let loss = Loss::new(loss, self.b.clone(), Normalization::Sum)?;
        Ok(ProblemSpec::new(self.op.clone(), loss, self.alpha, Template::Psd).variant(variant))
    }
}

/// Coded diffraction phase retrieval with a complex standard normal signal.
pub fn gen_phase_problem<R: RealScalar + FftNum>(spec: &SyntheticPhaseSpec) -> Result<PhaseProblem<R>> {
    spec.noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth: DVector<Complex<R>> = DVector::from_fn(spec.n, |_, _| Complex::<R>::sample_normal(&mut rng));
    let op = build_coded_diffraction::<R>(spec.n, spec.views, rng.random())?;
    let column = DMatrix::from_column_slice(spec.n, 1, truth.as_slice());
    let clean = psd_measure(&op, &column, &[R::one()])?;
    let b = match spec.noise {
        Noise::None => clean.clone(),
        Noise::Gaussian { snr_db } => {
            let xi: DVector<f64> = DVector::from_fn(clean.len(), |_, _| rng.sample(StandardNormal));
            let target = clean.norm_squared().as_f64() / 10f64.powf(snr_db / 10.0);
            let scale = (target / xi.norm_squared()).sqrt();
            DVector::from_fn(clean.len(), |i, _| clean[i] + R::lit(scale * xi[i]))
        }
        Noise::Poisson { snr_db } => {
            // E||b - clean||^2 = sum(clean) / c, so the expected SNR is
            // c ||clean||^2 / sum(clean).
            let total: f64 = clean.iter().map(|x| x.as_f64()).sum();
            let c = 10f64.powf(snr_db / 10.0) * total / clean.norm_squared().as_f64();
            let mut out = DVector::zeros(clean.len());
            for (o, x) in out.iter_mut().zip(clean.iter()) {
                let mean = c * x.as_f64().max(0.0);
                let draw = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::InvalidParameter(format!("photon count: {e}")))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
                *o = R::lit(draw / c);
            }
            out
        }
    };
    let alpha = select_alpha_phase(&b)?;
    Ok(PhaseProblem {
        op,
        b,
        clean,
        truth,
        alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticCompletionSpec {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    /// Fraction of entries observed, split between training and test.
    pub observed: f64,
    /// Share of the observed entries held out for testing.
    pub test_fraction: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CompletionProblem<R: RealScalar> {
    pub op: EntrySampling,
    pub b: DVector<R>,
    pub left: DMatrix<R>,
    pub right: DMatrix<R>,
    pub test: EvalSpec<R>,
}

impl<R: RealScalar + Scalar> CompletionProblem<R> {
    /// `X = L R^T`.
    pub fn truth(&self) -> DMatrix<R> {
        &self.left * self.right.transpose()
    }

    /// Schatten-ball problem with `loss` averaged over the training entries.
    pub fn spec(&self, loss: LossKind, alpha: R) -> Result<ProblemSpec<R, EntrySampling>> {
        let loss = Loss::new(loss, self.b.clone(), Normalization::Mean)?;
        Ok(ProblemSpec::new(self.op.clone(), loss, alpha, Template::Schatten1))
    }
}

/// Gaussian rank-`r` matrix observed on a uniformly random set of entries.
pub fn gen_completion_problem<R: RealScalar + Scalar>(spec: &SyntheticCompletionSpec) -> Result<CompletionProblem<R>> {
    let SyntheticCompletionSpec { m, n, rank, observed, test_fraction, noise_std, seed } = *spec;
    if m == 0 || n == 0 || rank == 0 || rank > m.min(n) {
        return Err(Error::InvalidParameter(format!(
            "completion needs m, n >= 1 and 1 <= rank <= min(m, n), got {m}x{n} rank {rank}"
        )));
    }
    if !(observed > 0.0 && observed <= 1.0) || !(0.0..1.0).contains(&test_fraction) || !(noise_std >= 0.0) {
        return Err(Error::InvalidParameter("completion fractions or noise out of range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = DMatrix::from_fn(m, rank, |_, _| R::sample_normal(&mut rng));
    let right = DMatrix::from_fn(n, rank, |_, _| R::sample_normal(&mut rng));
    let total = ((observed * (m * n) as f64).round() as usize).clamp(1, m * n);
    let n_test = (test_fraction * total as f64).round() as usize;
    if n_test >= total {
        return Err(Error::InvalidParameter("no training entries left".into()));
    }
    let picks = index::sample(&mut rng, m * n, total).into_vec();
    let value = |k: usize, rng: &mut ChaCha8Rng| -> R {
        let (i, j) = (k % m, k / m);
        let mut x = R::zero();
        for c in 0..rank {
            x += left[(i, c)] * right[(j, c)];
        }
        let noise: f64 = rng.sample(StandardNormal);
        x + R::lit(noise_std * noise)
    };
    let mut test_entries = Vec::with_capacity(n_test);
    let mut test_values = Vec::with_capacity(n_test);
    for &k in &picks[..n_test] {
        test_entries.push((k % m, k / m));
        test_values.push(value(k, &mut rng));
    }
    let mut train = Vec::with_capacity(total - n_test);
    let mut b = Vec::with_capacity(total - n_test);
    for &k in &picks[n_test..] {
        train.push((k % m, k / m));
        b.push(value(k, &mut rng));
    }
    Ok(CompletionProblem {
        op: EntrySampling::new(m, n, train)?,
        b: DVector::from_vec(b),
        left,
        right,
        test: EvalSpec {
            entries: test_entries,
            values: DVector::from_vec(test_values),
            loss: LossKind::Gauss,
        },
    })
}

/// Entries read from a triple file, with empty rows and columns removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Triples {
    pub m: usize,
    pub n: usize,
    /// 0-indexed, compacted.
    pub entries: Vec<(usize, usize)>,
    pub values: Vec<f64>,
    /// Original 1-indexed row ids, by compacted row.
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
}

impl Triples {
    /// Ratings above 3.5 become `+1`, the rest `-1`.
    pub fn binarized(&self) -> Vec<f64> {
        self.values.iter().map(|&v| if v > 3.5 { 1.0 } else { -1.0 }).collect()
    }

    pub fn operator(&self) -> Result<EntrySampling> {
        EntrySampling::new(self.m, self.n, self.entries.clone())
    }
}

/// Parses `i j value` lines (1-indexed). Blank lines and `#` comments are
/// skipped. Rows and columns that never appear are dropped and the rest
/// renumbered in increasing order.
pub fn parse_triples(text: &str) -> Result<Triples> {
    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 'i j value', found {} fields", fields.len()),
            });
        }
        let index = |s: &str| -> Result<usize> {
            let v: i64 = s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad index '{s}'"),
            })?;
            if v < 1 {
                return Err(Error::IndexOutOfRange {
                    line: line_no,
                    message: format!("index {v} is below 1"),
                });
            }
            Ok(v as usize)
        };
        let (i, j) = (index(fields[0])?, index(fields[1])?);
        let value: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad value '{}'", fields[2]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: "non-finite value".into(),
            });
        }
        if !seen.insert((i, j)) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate entry ({i}, {j})"),
            });
        }
        raw.push((i, j, value));
    }
    if raw.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            message: "no entries".into(),
        });
    }
    let compact = |ids: BTreeMap<usize, usize>| -> (BTreeMap<usize, usize>, Vec<usize>) {
        let order: Vec<usize> = ids.keys().copied().collect();
        let map = order.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        (map, order)
    };
    let (rows, row_ids) = compact(raw.iter().map(|&(i, _, _)| (i, 0)).collect());
    let (cols, col_ids) = compact(raw.iter().map(|&(_, j, _)| (j, 0)).collect());
    Ok(Triples {
        m: row_ids.len(),
        n: col_ids.len(),
        entries: raw.iter().map(|&(i, j, _)| (rows[&i], cols[&j])).collect(),
        values: raw.iter().map(|&(_, _, v)| v).collect(),
        row_ids,
        col_ids,
    })
}

pub fn load_triples(path: &Path) -> Result<Triples> {
    parse_triples(&fs::read_to_string(path)?)
}

/// Writes 0-indexed entries as 1-indexed `i j value` lines.
pub fn write_triples(path: &Path, entries: &[(usize, usize)], values: &[f64]) -> Result<()> {
    if entries.len() != values.len() {
        return Err(Error::DimensionMismatch {
            what: "triple values",
            expected: entries.len(),
            found: values.len(),
        });
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (&(i, j), v) in entries.iter().zip(values) {
        writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarization_threshold() {
        let t = parse_triples("1 1 4\n1 2 3\n2 1 3.5\n").unwrap();
        assert_eq!(t.binarized(), vec![1.0, -1.0, -1.0]);
    }

    #[test]
    fn empty_columns_are_compacted() {
        let t = parse_triples("1 1 5\n2 3 1\n").unwrap();
        assert_eq!((t.m, t.n), (2, 2));
        assert_eq!(t.entries, vec![(0, 0), (1, 1)]);
        assert_eq!(t.col_ids, vec![1, 3]);
        // compacting again changes nothing
        let text: String = t
            .entries
            .iter()
            .zip(&t.values)
            .map(|(&(i, j), v)| format!("{} {} {v}\n", i + 1, j + 1))
            .collect();
        let again = parse_triples(&text).unwrap();
        assert_eq!((again.m, again.n, &again.entries), (t.m, t.n, &t.entries));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = parse_triples("1 1 2\n1 x 3\n").unwrap_err();
        assert_eq!(e.line(), Some(2));
        let e = parse_triples("1 1 2\n\n0 1 3\n").unwrap_err();
        assert!(matches!(e, Error::IndexOutOfRange { line: 3, .. }));
        let e = parse_triples("1 1 2\n1 1 3\n").unwrap_err();
        assert_eq!(e.line(), Some(2));
        assert!(parse_triples("1 2\n").is_err());
    }

    #[test]
    fn noiseless_phase_measurements_are_nonnegative() {
        let spec = SyntheticPhaseSpec { n: 16, views: 10, noise: Noise::None, seed: 3 };
        let p = gen_phase_problem::<f64>(&spec).unwrap();
        assert_eq!(p.b.len(), 160);
        assert!(p.b.iter().all(|x| *x >= -1e-10));
        assert_eq!(p.b, p.clean);
    }

    #[test]
    fn gaussian_snr_is_exact() {
        let spec = SyntheticPhaseSpec { n: 32, views: 4, noise: Noise::Gaussian { snr_db: 20.0 }, seed: 1 };
        let p = gen_phase_problem::<f64>(&spec).unwrap();
        assert!((snr_db(&p.clean, &p.b) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn completion_split_sizes() {
        let spec = SyntheticCompletionSpec {
            m: 10,
            n: 8,
            rank: 2,
            observed: 0.5,
            test_fraction: 0.25,
            noise_std: 0.0,
            seed: 4,
        };
        let p = gen_completion_problem::<f64>(&spec).unwrap();
        assert_eq!(p.b.len() + p.test.entries.len(), 40);
        assert_eq!(p.test.entries.len(), 10);
        let x = p.truth();
        for (k, &(i, j)) in p.op.entries().iter().enumerate() {
            assert!((x[(i, j)] - p.b[k]).abs() < 1e-12);
        }
    }
}
