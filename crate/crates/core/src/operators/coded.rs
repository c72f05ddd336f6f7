use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftNum, FftPlanner};

use super::lifted::{Lifted, SensingMatrix};
use crate::error::{Error, Result};
use crate::ledger::{self, Category, Tracked};
use crate::scalar::RealScalar;

/// Coded diffraction sensing matrix `A = blockdiag(F, ..., F) [D_1; ...; D_s]`.
///
/// `F` is the unnormalized DFT (`F^* F = n I`), matching the convention under
/// which the mean measurement estimates the trace of the lifted signal.
#[derive(Clone)]
pub struct CodedDiffraction<R: RealScalar + FftNum> {
    n: usize,
    views: usize,
    diagonals: Vec<Complex<R>>,
    forward: Arc<dyn Fft<R>>,
    inverse: Arc<dyn Fft<R>>,
    _tracked: Tracked,
}

impl<R: RealScalar + FftNum> fmt::Debug for CodedDiffraction<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CodedDiffraction")
            .field("n", &self.n)
            .field("views", &self.views)
            .finish_non_exhaustive()
    }
}

impl<R: RealScalar + FftNum> CodedDiffraction<R> {
    /// Builds the map from explicit modulations, `views * n` entries laid out
    /// view by view.
    pub fn from_diagonals(n: usize, views: usize, diagonals: Vec<Complex<R>>) -> Result<Self> {
        if n == 0 || views == 0 {
            return Err(Error::InvalidParameter(
                "coded diffraction needs n, s >= 1".into(),
            ));
        }
        if diagonals.len() != n * views {
            return Err(Error::DimensionMismatch {
                what: "modulation diagonals",
                expected: n * views,
                found: diagonals.len(),
            });
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(CodedDiffraction {
            n,
            views,
            diagonals,
            forward,
            inverse,
            _tracked: ledger::track(Category::Operator, n * views),
        })
    }

    /// Draws random modulations: each entry is `U1 * U2` with `U1` uniform on
    /// `{1, i, -1, -i}` and `U2` equal to `sqrt(2)/2` with probability 0.8 and
    /// `sqrt(3)` with probability 0.2.
    pub fn random(n: usize, views: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let diagonals = (0..n * views)
            .map(|_| sample_modulation::<R, _>(&mut rng))
            .collect();
        Self::from_diagonals(n, views, diagonals)
    }

    pub fn views(&self) -> usize {
        self.views
    }

    /// Modulation of view `view`.
    pub fn diagonal(&self, view: usize) -> &[Complex<R>] {
        &self.diagonals[view * self.n..(view + 1) * self.n]
    }
}

pub(crate) fn sample_modulation<R: RealScalar, G: Rng + ?Sized>(rng: &mut G) -> Complex<R> {
    let zero = R::zero();
    let one = R::one();
    let phase = match rng.random_range(0..4u8) {
        0 => Complex::new(one, zero),
        1 => Complex::new(zero, one),
        2 => Complex::new(-one, zero),
        _ => Complex::new(zero, -one),
    };
    let magnitude = if rng.random_bool(0.8) {
        R::lit(std::f64::consts::SQRT_2 / 2.0)
    } else {
        R::lit(3f64.sqrt())
    };
    phase * magnitude
}

impl<R: RealScalar + FftNum> SensingMatrix<R> for CodedDiffraction<R> {
    fn signal_len(&self) -> usize {
        self.n
    }

    fn rows(&self) -> usize {
        self.n * self.views
    }

    fn forward(&self, x: &[Complex<R>]) -> Vec<Complex<R>> {
        let mut out = Vec::with_capacity(self.rows());
        for view in 0..self.views {
            out.extend(self.diagonal(view).iter().zip(x).map(|(d, xi)| d * xi));
        }
        self.forward.process(&mut out);
        out
    }

    fn adjoint(&self, y: &[Complex<R>]) -> Vec<Complex<R>> {
        let mut buf = y.to_vec();
        self.inverse.process(&mut buf);
        let mut out = vec![Complex::new(R::zero(), R::zero()); self.n];
        for view in 0..self.views {
            let block = &buf[view * self.n..(view + 1) * self.n];
            for ((o, d), b) in out.iter_mut().zip(self.diagonal(view)).zip(block) {
                *o += d.conj() * b;
            }
        }
        out
    }
}

/// Quadratic coded diffraction measurements `|A x|^2` with `d = s n`.
pub fn build_coded_diffraction<R: RealScalar + FftNum>(
    n: usize,
    views: usize,
    seed: u64,
) -> Result<Lifted<CodedDiffraction<R>>> {
    Ok(Lifted::new(CodedDiffraction::random(n, views, seed)?))
}
