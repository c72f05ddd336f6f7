use nalgebra::DVector;
use num_complex::Complex;
use rustfft::FftNum;

use super::{check_left, check_right, check_rank_one, MeasurementOperator};
use crate::error::Result;
use crate::ledger::{self, Category};
use crate::scalar::RealScalar;

/// A structured linear map `A: C^n -> C^d` with a fast adjoint.
pub trait SensingMatrix<R: RealScalar + FftNum>: Send + Sync {
    /// Signal length `n`.
    fn signal_len(&self) -> usize;
    /// Number of rows `d`.
    fn rows(&self) -> usize;
    /// `A x`.
    fn forward(&self, x: &[Complex<R>]) -> Vec<Complex<R>>;
    /// `A^* y`.
    fn adjoint(&self, y: &[Complex<R>]) -> Vec<Complex<R>>;
}

/// Quadratic measurements `(A X) = diag(A X A^*)` lifted from a sensing
/// matrix, so that `A(x x^*)_i = |(A x)_i|^2`.
///
/// The coefficient matrices are `A_i = a_i a_i^*` where `a_i^*` is row `i` of
/// the sensing matrix, giving
/// `A(u v^*)_i = (A u)_i conj((A v)_i)` and `A^* z = A^* diag(z) A`.
#[derive(Debug, Clone)]
pub struct Lifted<S> {
    sensing: S,
}

impl<S> Lifted<S> {
    pub fn new(sensing: S) -> Self {
        Lifted { sensing }
    }

    pub fn sensing(&self) -> &S {
        &self.sensing
    }
}

impl<R: RealScalar + FftNum, S: SensingMatrix<R>> MeasurementOperator<Complex<R>> for Lifted<S> {
    fn nrows(&self) -> usize {
        self.sensing.signal_len()
    }

    fn ncols(&self) -> usize {
        self.sensing.signal_len()
    }

    fn measurements(&self) -> usize {
        self.sensing.rows()
    }

    fn apply_rank_one(
        &self,
        u: &DVector<Complex<R>>,
        v: &DVector<Complex<R>>,
    ) -> Result<DVector<Complex<R>>> {
        check_rank_one(self, u, v)?;
        let _scratch = ledger::track(Category::Workspace, 2 * self.sensing.rows());
        let au = self.sensing.forward(u.as_slice());
        let av = self.sensing.forward(v.as_slice());
        Ok(DVector::from_iterator(
            au.len(),
            au.iter().zip(&av).map(|(a, b)| a * b.conj()),
        ))
    }

    fn left_apply_adjoint(
        &self,
        z: &DVector<Complex<R>>,
        u: &DVector<Complex<R>>,
    ) -> Result<DVector<Complex<R>>> {
        check_left(self, z, u)?;
        let _scratch = ledger::track(Category::Workspace, self.sensing.rows());
        let mut au = self.sensing.forward(u.as_slice());
        for (a, w) in au.iter_mut().zip(z.iter()) {
            *a *= w.conj();
        }
        Ok(DVector::from_vec(self.sensing.adjoint(&au)))
    }

    fn right_apply_adjoint(
        &self,
        z: &DVector<Complex<R>>,
        v: &DVector<Complex<R>>,
    ) -> Result<DVector<Complex<R>>> {
        check_right(self, z, v)?;
        let _scratch = ledger::track(Category::Workspace, self.sensing.rows());
        let mut av = self.sensing.forward(v.as_slice());
        for (a, w) in av.iter_mut().zip(z.iter()) {
            *a *= *w;
        }
        Ok(DVector::from_vec(self.sensing.adjoint(&av)))
    }
}
