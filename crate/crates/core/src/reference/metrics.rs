use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{ensure_dim, Error, Result};
use crate::losses::LossKind;
use crate::scalar::{Real, RealScalar, Scalar, Zero};
use crate::sketch::FactoredMatrix;

/// Number of singular values strictly above `eps * sigma_1`.
pub fn eps_rank(singular_values: &[f64], eps: f64) -> usize {
    let top = singular_values.iter().copied().fold(0.0f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    singular_values.iter().filter(|s| **s > eps * top).count()
}

/// `min_phi ||e^{i phi} xhat - x|| / ||x||`. The minimizing phase is that of
/// `xhat^* x`; the residual is formed explicitly to avoid cancellation.
pub fn phase_aligned_error<T: Scalar>(xhat: &DVector<T>, x: &DVector<T>) -> Result<Real<T>> {
    ensure_dim("estimate", x.len(), xhat.len())?;
    let nx = x.norm();
    if nx == Real::<T>::zero() {
        return Err(Error::ZeroTruth);
    }
    let inner = xhat.dotc(x);
    let modulus = inner.modulus();
    let phase = if modulus == Real::<T>::zero() {
        T::one()
    } else {
        inner.unscale(modulus)
    };
    Ok((xhat * phase - x).norm() / nx)
}

/// Peak signal-to-noise ratio in dB; `+inf` when the estimate is exact.
pub fn psnr<R: RealScalar>(xhat: &[R], x: &[R], peak: R) -> Result<f64> {
    ensure_dim("estimate", x.len(), xhat.len())?;
    if x.is_empty() {
        return Err(Error::InvalidParameter("psnr of empty signals".into()));
    }
    let mse = xhat
        .iter()
        .zip(x)
        .map(|(a, b)| {
            let d = (*a - *b).as_f64();
            d * d
        })
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (peak.as_f64() / mse.sqrt()).log10())
}

/// Held-out entries for matrix completion.
#[derive(Debug, Clone)]
pub struct EvalSpec<R: RealScalar> {
    pub entries: Vec<(usize, usize)>,
    pub values: DVector<R>,
    pub loss: LossKind,
}

/// `(1/|E'|) sum psi(Xhat_ij; b'_ij)` evaluated from the factors.
pub fn test_error<T: Scalar>(factors: &FactoredMatrix<T>, eval: &EvalSpec<Real<T>>) -> Result<Real<T>> {
    ensure_dim("test values", eval.entries.len(), eval.values.len())?;
    if eval.entries.is_empty() {
        return Err(Error::InvalidParameter("empty test set".into()));
    }
    let (m, n) = (factors.nrows(), factors.ncols());
    let mut acc = Real::<T>::zero();
    for (k, &(i, j)) in eval.entries.iter().enumerate() {
        if i >= m || j >= n {
            return Err(Error::DimensionMismatch {
                what: "test entry index",
                expected: if i >= m { m } else { n },
                found: if i >= m { i } else { j },
            });
        }
        acc += eval.loss.psi(factors.entry(i, j).real(), eval.values[k]);
    }
    Ok(acc / Real::<T>::count(eval.entries.len()))
}

/// Writes `iteration,sigma_1,...` rows.
pub fn write_spectra(path: &Path, spectra: &[(usize, Vec<f64>)]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let width = spectra.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let header: Vec<String> = std::iter::once("iteration".to_string())
        .chain((1..=width).map(|k| format!("sigma_{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (t, s) in spectra {
        let row: Vec<String> = std::iter::once(t.to_string())
            .chain(s.iter().map(|x| x.to_string()))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    #[test]
    fn eps_rank_counts() {
        assert_eq!(eps_rank(&[1.0, 0.5, 0.01], 0.1), 2);
        assert_eq!(eps_rank(&[1.0, 0.5, 0.01, 0.0], 1e-300), 3);
        assert_eq!(eps_rank(&[0.0, 0.0], 0.1), 0);
        let spikes = [5.0, 4.0, 3.0, 2.0, 1.0, 1e-4, 1e-5];
        assert_eq!(eps_rank(&spikes, 1e-1), 5);
        assert_eq!(eps_rank(&spikes, 1e-2), 5);
    }

    #[test]
    fn phase_error_cases() {
        let x = DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.3)]);
        let rotated = &x * Complex64::from_polar(1.0, 0.8);
        assert!(phase_aligned_error(&rotated, &x).unwrap() < 1e-15);
        let zero = DVector::zeros(2);
        assert!((phase_aligned_error(&zero, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(phase_aligned_error(&x, &zero), Err(Error::ZeroTruth)));
    }

    #[test]
    fn psnr_cases() {
        assert_eq!(psnr(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap(), f64::INFINITY);
        assert!((psnr(&[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn test_error_exact_fit_is_zero() {
        let f = FactoredMatrix::<f64> {
            u: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            sigma: DVector::from_vec(vec![3.0]),
            v: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        };
        let eval = EvalSpec {
            entries: vec![(0, 1), (1, 1)],
            values: DVector::from_vec(vec![3.0, 0.0]),
            loss: LossKind::Gauss,
        };
        assert_eq!(test_error(&f, &eval).unwrap(), 0.0);
        let bad = EvalSpec {
            entries: vec![(2, 0)],
            values: DVector::from_vec(vec![0.0]),
            loss: LossKind::Gauss,
        };
        assert!(test_error(&f, &bad).is_err());
    }
}
