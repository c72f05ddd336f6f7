use std::collections::HashSet;

use nalgebra::DVector;

use super::{check_left, check_right, check_rank_one, MeasurementOperator};
use crate::error::{Error, Result};
use crate::ledger::{self, Category, Tracked};
use crate::scalar::Scalar;

/// Samples the entries of an `m x n` matrix at a fixed list of positions.
///
/// Measurement `k` reads entry `(rows[k], cols[k])`, so
/// `A(u v^*)_k = u[i_k] * conj(v[j_k])`. Indices are 0-based.
#[derive(Debug, Clone)]
pub struct EntrySampling {
    m: usize,
    n: usize,
    entries: Vec<(usize, usize)>,
    _tracked: Tracked,
}

impl EntrySampling {
    pub fn new(m: usize, n: usize, entries: Vec<(usize, usize)>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter(
                "entry sampling needs m, n >= 1".into(),
            ));
        }
        if entries.is_empty() {
            return Err(Error::InvalidParameter(
                "entry sampling needs at least one index".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for &(i, j) in &entries {
            if i >= m || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "index ({i}, {j}) outside {m} x {n}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate index ({i}, {j})"
                )));
            }
        }
        let tracked = ledger::track(Category::Operator, 2 * entries.len());
        Ok(EntrySampling {
            m,
            n,
            entries,
            _tracked: tracked,
        })
    }

    /// Samples every entry in column-major order.
    pub fn full(m: usize, n: usize) -> Result<Self> {
        let entries = (0..n).flat_map(|j| (0..m).map(move |i| (i, j))).collect();
        Self::new(m, n, entries)
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }
}

impl<T: Scalar> MeasurementOperator<T> for EntrySampling {
    fn nrows(&self) -> usize {
        self.m
    }

    fn ncols(&self) -> usize {
        self.n
    }

    fn measurements(&self) -> usize {
        self.entries.len()
    }

    fn apply_rank_one(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
        check_rank_one(self, u, v)?;
        Ok(DVector::from_iterator(
            self.entries.len(),
            self.entries.iter().map(|&(i, j)| u[i] * v[j].conjugate()),
        ))
    }

    fn left_apply_adjoint(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        check_left(self, z, u)?;
        // (A^* z)^* u: column j collects conj(z_k) u_i over entries (i, j).
        let mut out = DVector::zeros(self.n);
        for (k, &(i, j)) in self.entries.iter().enumerate() {
            out[j] += z[k].conjugate() * u[i];
        }
        Ok(out)
    }

    fn right_apply_adjoint(&self, z: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>> {
        check_right(self, z, v)?;
        let mut out = DVector::zeros(self.m);
        for (k, &(i, j)) in self.entries.iter().enumerate() {
            out[i] += z[k] * v[j];
        }
        Ok(out)
    }
}
