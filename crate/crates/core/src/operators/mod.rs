//! Black-box linear measurement maps.
//!
//! A measurement operator `A` maps an `m x n` matrix to `d` measurements
//! `(A X)_i = <A_i, X> = tr(A_i^* X)`. Solvers only ever touch it through
//! three primitives:
//!
//! * [`MeasurementOperator::apply_rank_one`]: `A(u v^*)`,
//! * [`MeasurementOperator::left_apply_adjoint`]: `(A^* z)^* u`, the conjugate
//!   transpose of the row vector `u^* (A^* z)`,
//! * [`MeasurementOperator::right_apply_adjoint`]: `(A^* z) v`.
//!
//! With the inner product `<a, b> = sum conj(a_i) b_i` these satisfy
//! `<A(u v^*), z> = u^* (A^* z) v = <left_apply_adjoint(z, u), v>`.

mod coded;
mod entry;
mod lifted;
mod ptycho;

pub use coded::{build_coded_diffraction, CodedDiffraction};
pub use entry::EntrySampling;
pub use lifted::{Lifted, SensingMatrix};
pub use ptycho::PtychographyBandpass;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, Error, Result};
use crate::scalar::{Real, RealScalar, Scalar, Zero};

pub trait MeasurementOperator<T: Scalar>: Send + Sync {
    /// Row dimension `m` of the matrix domain.
    fn nrows(&self) -> usize;
    /// Column dimension `n` of the matrix domain.
    fn ncols(&self) -> usize;
    /// Number of measurements `d`.
    fn measurements(&self) -> usize;

    /// `A(u v^*)`.
    fn apply_rank_one(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>>;

    /// `(A^* z)^* u`, an `n`-vector.
    fn left_apply_adjoint(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>>;

    /// `(A^* z) v`, an `m`-vector.
    fn right_apply_adjoint(&self, z: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>>;

    /// `A X` for a dense matrix, one column at a time. Reference/test use only.
    fn apply_dense(&self, x: &DMatrix<T>) -> Result<DVector<T>> {
        ensure_dim("dense matrix rows", self.nrows(), x.nrows())?;
        ensure_dim("dense matrix cols", self.ncols(), x.ncols())?;
        let mut out = DVector::zeros(self.measurements());
        let mut e = DVector::zeros(self.ncols());
        for j in 0..self.ncols() {
            let col = x.column(j).into_owned();
            if col.iter().all(|c| c.is_zero()) {
                continue;
            }
            e[j] = T::one();
            out += self.apply_rank_one(&col, &e)?;
            e[j] = T::zero();
        }
        Ok(out)
    }

    /// Dense `A^* z`, one column at a time. Reference/test use only.
    fn adjoint_dense(&self, z: &DVector<T>) -> Result<DMatrix<T>> {
        let mut out = DMatrix::zeros(self.nrows(), self.ncols());
        let mut e = DVector::zeros(self.ncols());
        for j in 0..self.ncols() {
            e[j] = T::one();
            let col = self.right_apply_adjoint(z, &e)?;
            out.set_column(j, &col);
            e[j] = T::zero();
        }
        Ok(out)
    }
}

impl<T: Scalar, O: MeasurementOperator<T> + ?Sized> MeasurementOperator<T> for &O {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn measurements(&self) -> usize {
        (**self).measurements()
    }
    fn apply_rank_one(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
        (**self).apply_rank_one(u, v)
    }
    fn left_apply_adjoint(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        (**self).left_apply_adjoint(z, u)
    }
    fn right_apply_adjoint(&self, z: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
        (**self).right_apply_adjoint(z, v)
    }
}

pub(crate) fn check_rank_one<T: Scalar, O: MeasurementOperator<T> + ?Sized>(
    op: &O,
    u: &DVector<T>,
    v: &DVector<T>,
) -> Result<()> {
    ensure_dim("left factor", op.nrows(), u.len())?;
    ensure_dim("right factor", op.ncols(), v.len())?;
    if !u.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteInput("left factor"));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteInput("right factor"));
    }
    Ok(())
}

pub(crate) fn check_left<T: Scalar, O: MeasurementOperator<T> + ?Sized>(
    op: &O,
    z: &DVector<T>,
    u: &DVector<T>,
) -> Result<()> {
    ensure_dim("measurement vector", op.measurements(), z.len())?;
    ensure_dim("left vector", op.nrows(), u.len())
}

pub(crate) fn check_right<T: Scalar, O: MeasurementOperator<T> + ?Sized>(
    op: &O,
    z: &DVector<T>,
    v: &DVector<T>,
) -> Result<()> {
    ensure_dim("measurement vector", op.measurements(), z.len())?;
    ensure_dim("right vector", op.ncols(), v.len())
}

/// Relative tolerance on the imaginary residue of `psd_measure`.
pub const LEAKAGE_TOLERANCE: f64 = 1e-8;

/// Measures a psd matrix given as `U diag(lambda) U^*`, returning the real
/// part of `A X`. Fails with [`Error::ImaginaryLeakage`] if the imaginary
/// residue is not negligible, which means the operator does not map
/// Hermitian matrices to real measurements.
pub fn psd_measure<T, O>(op: &O, u: &DMatrix<T>, lambda: &[Real<T>]) -> Result<DVector<Real<T>>>
where
    T: Scalar,
    O: MeasurementOperator<T> + ?Sized,
{
    ensure_dim("psd factor columns", lambda.len(), u.ncols())?;
    if lambda.iter().any(|l| *l < Real::<T>::zero()) {
        return Err(Error::InvalidParameter(
            "psd factor weights must be nonnegative".into(),
        ));
    }
    let d = op.measurements();
    let mut acc = DVector::<T>::zeros(d);
    for (j, &l) in lambda.iter().enumerate() {
        if l == Real::<T>::zero() {
            continue;
        }
        let col = u.column(j).into_owned();
        let img = op.apply_rank_one(&col, &col)?;
        acc.axpy(T::from_real(l), &img, T::one());
    }
    real_part_checked(&acc)
}

/// Real part of a measurement vector, rejecting non-negligible imaginary parts.
pub fn real_part_checked<T: Scalar>(v: &DVector<T>) -> Result<DVector<Real<T>>> {
    let re = v.map(|x| x.real());
    if T::IS_COMPLEX {
        let residue = v.map(|x| x.imaginary()).norm();
        let tol = Real::<T>::lit(LEAKAGE_TOLERANCE) * re.norm();
        if residue > tol {
            return Err(Error::ImaginaryLeakage {
                residue: residue.as_f64(),
                tolerance: tol.as_f64(),
            });
        }
    }
    Ok(re)
}

/// Embeds a real measurement vector into the operator's field.
pub fn lift<T: Scalar>(v: &DVector<Real<T>>) -> DVector<T> {
    v.map(T::from_real)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn psd_measure_of_zero_is_zero() {
        let op = build_coded_diffraction::<f64>(8, 2, 1).unwrap();
        let u = DMatrix::<Complex64>::zeros(8, 1);
        let out = psd_measure(&op, &u, &[0.0]).unwrap();
        assert_eq!(out.len(), 16);
        assert!(out.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn psd_measure_is_nonnegative() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let op = build_coded_diffraction::<f64>(16, 3, 5).unwrap();
        let u = DMatrix::<Complex64>::from_fn(16, 2, |_, _| Complex64::sample_normal(&mut rng));
        let out = psd_measure(&op, &u, &[1.5, 0.25]).unwrap();
        assert!(out.iter().all(|x| *x >= -1e-10));
    }

    #[test]
    fn leakage_is_reported() {
        let v = DVector::from_vec(vec![Complex64::new(1.0, 0.5), Complex64::new(2.0, 0.0)]);
        assert!(matches!(
            real_part_checked(&v),
            Err(Error::ImaginaryLeakage { .. })
        ));
    }

    #[test]
    fn negative_weights_are_rejected() {
        let op = build_coded_diffraction::<f64>(4, 1, 1).unwrap();
        let u = DMatrix::<Complex64>::zeros(4, 1);
        assert!(psd_measure(&op, &u, &[-1.0]).is_err());
    }
}
