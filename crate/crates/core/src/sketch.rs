//! Two-sided randomized sketch of a matrix presented as a stream of linear
//! updates.
//!
//! The sketch keeps `Y = X Omega` (range) and `W = Psi X` (co-range) for fixed
//! Gaussian test matrices `Omega` (`n x k`) and `Psi` (`l x m`) with
//! `k = 2r + 1` and `l = 4r + 3`. A rank-`r` approximation is recovered as
//! `Q [B]_r` with `Q = orth(Y)` and `B = (Psi Q) \ W`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{ComplexField, DMatrix, DVector, RealField, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::ledger::{self, Category, Tracked};
use crate::linalg::thin_svd;
use crate::scalar::{One, Real, RealScalar, Scalar, Zero};

/// Relative pivot threshold below which `Psi Q` is treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchDims {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    /// Range sketch width, `2r + 1`.
    pub k: usize,
    /// Co-range sketch height, `4r + 3`.
    pub l: usize,
}

impl SketchDims {
    pub fn new(m: usize, n: usize, rank: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("sketch needs m, n >= 1".into()));
        }
        if rank == 0 {
            return Err(Error::InvalidParameter("sketch rank must be >= 1".into()));
        }
        Ok(SketchDims {
            m,
            n,
            rank,
            k: 2 * rank + 1,
            l: 4 * rank + 3,
        })
    }

    /// Scalars held by test matrices plus sketches.
    pub fn storage(&self) -> usize {
        self.n * self.k + self.l * self.m + self.m * self.k + self.l * self.n
    }
}

#[derive(Debug, Clone)]
pub struct Sketch<T: Scalar> {
    dims: SketchDims,
    seed: u64,
    omega: DMatrix<T>,
    psi: DMatrix<T>,
    y: DMatrix<T>,
    w: DMatrix<T>,
    _tracked: Tracked,
}

impl<T: Scalar> Sketch<T> {
    /// Zero sketch with test matrices drawn from `seed`.
    pub fn new(m: usize, n: usize, rank: usize, seed: u64) -> Result<Self> {
        let dims = SketchDims::new(m, n, rank)?;
        let tracked = ledger::track(Category::Sketch, dims.storage());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = DMatrix::from_fn(n, dims.k, |_, _| T::sample_normal(&mut rng));
        let psi = DMatrix::from_fn(dims.l, m, |_, _| T::sample_normal(&mut rng));
        Ok(Sketch {
            dims,
            seed,
            omega,
            psi,
            y: DMatrix::zeros(m, dims.k),
            w: DMatrix::zeros(dims.l, n),
            _tracked: tracked,
        })
    }

    pub fn dims(&self) -> SketchDims {
        self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn omega(&self) -> &DMatrix<T> {
        &self.omega
    }

    pub fn psi(&self) -> &DMatrix<T> {
        &self.psi
    }

    /// Range sketch `Y = X Omega`.
    pub fn range(&self) -> &DMatrix<T> {
        &self.y
    }

    /// Co-range sketch `W = Psi X`.
    pub fn corange(&self) -> &DMatrix<T> {
        &self.w
    }

    /// Scalars held by the sketch.
    pub fn storage(&self) -> usize {
        self.omega.len() + self.psi.len() + self.y.len() + self.w.len()
    }

    /// Reflects `X <- beta1 X + beta2 u v^*` in both sketches.
    pub fn linear_update(&mut self, beta1: T, beta2: T, u: &DVector<T>, v: &DVector<T>) -> Result<()> {
        ensure_dim("sketch left factor", self.dims.m, u.len())?;
        ensure_dim("sketch right factor", self.dims.n, v.len())?;
        // Y <- beta1 Y + beta2 u (Omega^* v)^*
        let omega_v = self.omega.ad_mul(v);
        self.y.gerc(beta2, u, &omega_v, beta1);
        // W <- beta1 W + beta2 (Psi u) v^*
        let psi_u = &self.psi * u;
        self.w.gerc(beta2, &psi_u, v, beta1);
        Ok(())
    }

    /// Averages `u v^*` into the sketch: `X <- (1 - eta) X + eta u v^*`.
    pub fn cgm_update(&mut self, u: &DVector<T>, v: &DVector<T>, eta: Real<T>) -> Result<()> {
        if !(eta >= Real::<T>::zero() && eta <= Real::<T>::one()) {
            return Err(Error::InvalidParameter(format!(
                "step size {} outside [0, 1]",
                eta.as_f64()
            )));
        }
        let one = Real::<T>::one();
        self.linear_update(T::from_real(one - eta), T::from_real(eta), u, v)
    }

    /// Rank-`r` approximation `Q [B]_r` of the sketched matrix, in factored form.
    pub fn reconstruct(&self, rank: usize) -> Result<FactoredMatrix<T>> {
        let SketchDims { m, n, k, l, .. } = self.dims;
        if rank == 0 || rank > self.dims.rank {
            return Err(Error::InvalidParameter(format!(
                "reconstruction rank {rank} outside 1..={}",
                self.dims.rank
            )));
        }
        let _scratch = ledger::track(Category::Workspace, 2 * m * k + 2 * l * k + 2 * k * n);
        if self.y.iter().all(|x| x.is_zero()) {
            return Ok(FactoredMatrix::zero(m, n, rank.min(m).min(n)));
        }
        let q = self.y.clone().qr().q();
        let psi_q = &self.psi * &q;
        let qr = psi_q.qr();
        let r = qr.r();
        let diag: Vec<Real<T>> = r.diagonal().iter().map(|x| x.modulus()).collect();
        let max = diag.iter().copied().fold(Real::<T>::zero(), |a, b| a.max(b));
        let min = diag.iter().copied().fold(max, |a, b| a.min(b));
        if max == Real::<T>::zero() || min <= Real::<T>::lit(RANK_TOLERANCE) * max {
            return Err(Error::RankDeficientPsiQ);
        }
        let rhs = qr.q().ad_mul(&self.w);
        let b = r
            .solve_upper_triangular(&rhs)
            .ok_or(Error::RankDeficientPsiQ)?;
        let svd = thin_svd(&b);
        let keep = rank.min(svd.s.len());
        Ok(FactoredMatrix {
            u: &q * svd.u.columns(0, keep),
            sigma: svd.s.rows(0, keep).into_owned(),
            v: svd.v.columns(0, keep).into_owned(),
        })
    }

    /// Rank-`r` psd approximation: reconstructs, takes the Hermitian part
    /// `(X + X^*) / 2` in factored form and clips negative eigenvalues.
    /// Returns `U diag(lambda) U^*` with `v == u`.
    pub fn reconstruct_psd(&self, rank: usize) -> Result<FactoredMatrix<T>> {
        if self.dims.m != self.dims.n {
            return Err(Error::InvalidParameter(
                "psd reconstruction needs a square sketch".into(),
            ));
        }
        let general = self.reconstruct(rank)?;
        Ok(general.hermitian_part(rank))
    }
}

/// Low-rank matrix `U diag(sigma) V^*` with orthonormal `U`, `V` and
/// nonincreasing `sigma >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredMatrix<T: Scalar> {
    pub u: DMatrix<T>,
    pub sigma: DVector<Real<T>>,
    pub v: DMatrix<T>,
}

impl<T: Scalar> FactoredMatrix<T> {
    /// The zero matrix with `rank` canonical basis columns and zero weights.
    pub fn zero(m: usize, n: usize, rank: usize) -> Self {
        FactoredMatrix {
            u: DMatrix::identity(m, rank),
            sigma: DVector::zeros(rank),
            v: DMatrix::identity(n, rank),
        }
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Entry `(i, j)` without forming the matrix.
    pub fn entry(&self, i: usize, j: usize) -> T {
        (0..self.rank()).fold(T::zero(), |acc, c| {
            acc + self.u[(i, c)] * T::from_real(self.sigma[c]) * self.v[(j, c)].conjugate()
        })
    }

    /// Frobenius norm, `||sigma||_2` for orthonormal factors.
    pub fn frobenius_norm(&self) -> Real<T> {
        self.sigma.norm()
    }

    /// Dense `m x n` matrix. Intended for tests and small problems.
    pub fn to_dense(&self) -> DMatrix<T> {
        let scaled = DMatrix::from_fn(self.u.nrows(), self.rank(), |i, c| {
            self.u[(i, c)] * T::from_real(self.sigma[c])
        });
        scaled * self.v.adjoint()
    }

    /// `sqrt(sigma_1) u_1`, the signal estimate from a psd factorization.
    pub fn leading_vector(&self) -> DVector<T> {
        if self.rank() == 0 {
            return DVector::zeros(self.nrows());
        }
        self.u.column(0) * T::from_real(self.sigma[0].sqrt())
    }

    /// Hermitian part `(X + X^*) / 2` truncated to its `rank` largest
    /// eigenvalues with negatives clipped to zero.
    pub fn hermitian_part(&self, rank: usize) -> Self {
        let n = self.nrows();
        let p = self.rank();
        if p == 0 || self.sigma.iter().all(|s| *s == Real::<T>::zero()) {
            return FactoredMatrix::zero(n, n, rank.min(n));
        }
        // X + X^* = [U V] [[0, S], [S, 0]] [U V]^*
        let mut basis = DMatrix::<T>::zeros(n, 2 * p);
        basis.columns_mut(0, p).copy_from(&self.u);
        basis.columns_mut(p, p).copy_from(&self.v);
        let qr = basis.qr();
        let (q, r) = (qr.q(), qr.r());
        let half = Real::<T>::lit(0.5);
        let mut mid = DMatrix::<T>::zeros(2 * p, 2 * p);
        for c in 0..p {
            let s = T::from_real(self.sigma[c] * half);
            mid[(c, p + c)] = s;
            mid[(p + c, c)] = s;
        }
        let small = &r * mid * r.adjoint();
        let small = (&small + small.adjoint()) * T::from_real(half);
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let keep = rank.min(order.len());
        let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), keep, |i, c| {
            eig.eigenvectors[(i, order[c])]
        });
        let u = q * vecs;
        let sigma = DVector::from_fn(keep, |c, _| eig.eigenvalues[order[c]].max(Real::<T>::zero()));
        FactoredMatrix {
            v: u.clone(),
            u,
            sigma,
        }
    }

    /// Writes `U.csv`, `S.csv` and `V.csv` into `dir`. Complex entries are
    /// written as `re,im` column pairs.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_matrix(&dir.join("U.csv"), &self.u)?;
        write_matrix(&dir.join("V.csv"), &self.v)?;
        let mut s = BufWriter::new(fs::File::create(dir.join("S.csv"))?);
        for x in self.sigma.iter() {
            writeln!(s, "{}", x.as_f64())?;
        }
        s.flush()?;
        Ok(())
    }

    /// Reads factors written by [`FactoredMatrix::write_csv`].
    pub fn read_csv(dir: &Path) -> Result<Self> {
        let sigma_rows = read_rows(&dir.join("S.csv"))?;
        let sigma: Vec<Real<T>> = sigma_rows
            .iter()
            .map(|row| row.first().copied().unwrap_or(0.0))
            .map(Real::<T>::lit)
            .collect();
        let rank = sigma.len();
        let u = read_matrix::<T>(&dir.join("U.csv"), rank)?;
        let v = read_matrix::<T>(&dir.join("V.csv"), rank)?;
        Ok(FactoredMatrix {
            u,
            sigma: DVector::from_vec(sigma),
            v,
        })
    }
}

fn write_matrix<T: Scalar>(path: &Path, m: &DMatrix<T>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for i in 0..m.nrows() {
        let mut fields = Vec::with_capacity(m.ncols() * 2);
        for j in 0..m.ncols() {
            let x = m[(i, j)];
            fields.push(x.real().as_f64().to_string());
            if T::IS_COMPLEX {
                fields.push(x.imaginary().as_f64().to_string());
            }
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        message: format!("{}: {e}", path.display()),
                    })
                })
                .collect()
        })
        .collect()
}

fn read_matrix<T: Scalar>(path: &Path, rank: usize) -> Result<DMatrix<T>> {
    let rows = read_rows(path)?;
    let width = if T::IS_COMPLEX { 2 * rank } else { rank };
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("{}: expected {width} fields, found {}", path.display(), row.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), rank, |i, j| {
        if T::IS_COMPLEX {
            T::from_parts(Real::<T>::lit(rows[i][2 * j]), Real::<T>::lit(rows[i][2 * j + 1]))
        } else {
            T::from_real(Real::<T>::lit(rows[i][j]))
        }
    }))
}
