use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

use super::lifted::SensingMatrix;
use crate::error::{Error, Result};
use crate::ledger::{self, Category, Tracked};
use crate::scalar::RealScalar;

/// Synthetic Fourier-ptychography bandpass sensing matrix
/// `A = blockdiag(F_q^*, ..., F_q^*) [D_1; ...; D_s] F_n`.
///
/// Each `D_i` is a `q x n` selection of a contiguous, circularly wrapped
/// window of Fourier coefficients starting at `floor(i n / s)`, so every
/// column of `D_i` has at most one nonzero entry. DFTs are unnormalized.
#[derive(Clone)]
pub struct PtychographyBandpass<R: RealScalar + FftNum> {
    n: usize,
    patch: usize,
    views: usize,
    windows: Vec<usize>,
    fft_n: Arc<dyn Fft<R>>,
    ifft_n: Arc<dyn Fft<R>>,
    fft_q: Arc<dyn Fft<R>>,
    ifft_q: Arc<dyn Fft<R>>,
    _tracked: Tracked,
}

impl<R: RealScalar + FftNum> fmt::Debug for PtychographyBandpass<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PtychographyBandpass")
            .field("n", &self.n)
            .field("patch", &self.patch)
            .field("views", &self.views)
            .finish_non_exhaustive()
    }
}

impl<R: RealScalar + FftNum> PtychographyBandpass<R> {
    /// Windows of `patch` coefficients for `views` views; the windows must
    /// jointly cover all `n` coefficients.
    pub fn new(n: usize, patch: usize, views: usize) -> Result<Self> {
        if n == 0 || patch == 0 || views == 0 {
            return Err(Error::InvalidParameter(
                "ptychography needs n, q, s >= 1".into(),
            ));
        }
        if patch > n {
            return Err(Error::InvalidParameter(format!(
                "patch size {patch} exceeds signal length {n}"
            )));
        }
        if patch < n.div_ceil(views) {
            return Err(Error::InvalidParameter(format!(
                "{views} windows of size {patch} cannot cover {n} coefficients"
            )));
        }
        let windows = (0..views)
            .flat_map(|i| {
                let start = i * n / views;
                (0..patch).map(move |t| (start + t) % n)
            })
            .collect();
        Self::with_windows(n, patch, views, windows)
    }

    /// Explicit windows, `views * patch` Fourier indices laid out view by view.
    pub fn with_windows(n: usize, patch: usize, views: usize, windows: Vec<usize>) -> Result<Self> {
        if windows.len() != patch * views {
            return Err(Error::DimensionMismatch {
                what: "ptychography windows",
                expected: patch * views,
                found: windows.len(),
            });
        }
        if let Some(bad) = windows.iter().find(|&&k| k >= n) {
            return Err(Error::InvalidParameter(format!(
                "window index {bad} is not a Fourier coefficient of length {n}"
            )));
        }
        for view in 0..views {
            let mut w = windows[view * patch..(view + 1) * patch].to_vec();
            w.sort_unstable();
            if w.windows(2).any(|p| p[0] == p[1]) {
                return Err(Error::InvalidParameter(format!(
                    "view {view} selects a coefficient twice"
                )));
            }
        }
        let mut planner = FftPlanner::new();
        Ok(PtychographyBandpass {
            n,
            patch,
            views,
            fft_n: planner.plan_fft_forward(n),
            ifft_n: planner.plan_fft_inverse(n),
            fft_q: planner.plan_fft_forward(patch),
            ifft_q: planner.plan_fft_inverse(patch),
            _tracked: ledger::track(Category::Operator, windows.len()),
            windows,
        })
    }

    pub fn window(&self, view: usize) -> &[usize] {
        &self.windows[view * self.patch..(view + 1) * self.patch]
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn views(&self) -> usize {
        self.views
    }
}

impl<R: RealScalar + FftNum> SensingMatrix<R> for PtychographyBandpass<R> {
    fn signal_len(&self) -> usize {
        self.n
    }

    fn rows(&self) -> usize {
        self.patch * self.views
    }

    fn forward(&self, x: &[Complex<R>]) -> Vec<Complex<R>> {
        let mut spectrum = x.to_vec();
        self.fft_n.process(&mut spectrum);
        let mut out: Vec<Complex<R>> = self.windows.iter().map(|&k| spectrum[k]).collect();
        self.ifft_q.process(&mut out);
        out
    }

    fn adjoint(&self, y: &[Complex<R>]) -> Vec<Complex<R>> {
        let mut patches = y.to_vec();
        self.fft_q.process(&mut patches);
        let mut acc = vec![Complex::new(R::zero(), R::zero()); self.n];
        for (&k, p) in self.windows.iter().zip(&patches) {
            acc[k] += *p;
        }
        self.ifft_n.process(&mut acc);
        acc
    }
}
