//! Extreme singular and eigenvectors of matrices available only through
//! matrix-vector products.
//!
//! Both routines run Lanczos with full reorthogonalization in a Krylov space
//! of fixed capacity and restart from the best Ritz vector until the explicit
//! residual meets the tolerance. Storage is `O((m + n) * krylov_dim)`.

use nalgebra::{ComplexField, DMatrix, DVector, RealField, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ledger::{self, Category};
use crate::linalg::thin_svd;
use crate::operators::{lift, MeasurementOperator};
use crate::scalar::{Real, RealScalar, Scalar, Zero};

/// A linear map `G: T^n -> T^m` with products by `G` and `G^*`.
pub trait LinearMap<T: Scalar> {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `G v`.
    fn apply(&self, v: &DVector<T>) -> Result<DVector<T>>;
    /// `G^* u`.
    fn apply_adjoint(&self, u: &DVector<T>) -> Result<DVector<T>>;
    /// `true` if the map is known to be identically zero.
    fn is_zero(&self) -> bool {
        false
    }
}

impl<T: Scalar> LinearMap<T> for DMatrix<T> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, v: &DVector<T>) -> Result<DVector<T>> {
        Ok(self * v)
    }
    fn apply_adjoint(&self, u: &DVector<T>) -> Result<DVector<T>> {
        Ok(self.ad_mul(u))
    }
    fn is_zero(&self) -> bool {
        self.iter().all(|x| x.is_zero())
    }
}

/// The gradient matrix `A^*(g)`, applied through the operator's adjoint
/// primitives and never formed.
pub struct ImplicitGradientMatrix<'a, T: Scalar, O: ?Sized> {
    op: &'a O,
    g: DVector<T>,
    _tracked: ledger::Tracked,
}

impl<'a, T: Scalar, O: MeasurementOperator<T> + ?Sized> ImplicitGradientMatrix<'a, T, O> {
    pub fn new(op: &'a O, g: DVector<T>) -> Result<Self> {
        crate::error::ensure_dim("gradient", op.measurements(), g.len())?;
        if !g.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteInput("gradient"));
        }
        let tracked = ledger::track(Category::Workspace, g.len());
        Ok(ImplicitGradientMatrix {
            op,
            g,
            _tracked: tracked,
        })
    }

    /// Wraps a real gradient vector, embedding it in the operator's field.
    pub fn from_real(op: &'a O, g: &DVector<Real<T>>) -> Result<Self> {
        Self::new(op, lift::<T>(g))
    }

    pub fn gradient(&self) -> &DVector<T> {
        &self.g
    }
}

impl<T: Scalar, O: MeasurementOperator<T> + ?Sized> LinearMap<T> for ImplicitGradientMatrix<'_, T, O> {
    fn nrows(&self) -> usize {
        self.op.nrows()
    }
    fn ncols(&self) -> usize {
        self.op.ncols()
    }
    fn apply(&self, v: &DVector<T>) -> Result<DVector<T>> {
        self.op.right_apply_adjoint(&self.g, v)
    }
    fn apply_adjoint(&self, u: &DVector<T>) -> Result<DVector<T>> {
        self.op.left_apply_adjoint(&self.g, u)
    }
    fn is_zero(&self) -> bool {
        self.g.iter().all(|x| x.is_zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Relative residual tolerance.
    pub tol: f64,
    /// Budget of Lanczos steps summed over restarts.
    pub max_iters: usize,
    /// Seed of the start vector, reused on every call.
    pub seed: u64,
    /// Krylov space capacity between restarts.
    pub krylov_dim: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            tol: 1e-8,
            max_iters: 500,
            seed: 0x5eed,
            krylov_dim: 40,
        }
    }
}

impl SpectralConfig {
    pub fn with_seed(seed: u64) -> Self {
        SpectralConfig {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("spectral tolerance must be positive".into()));
        }
        if self.max_iters == 0 || self.krylov_dim == 0 {
            return Err(Error::InvalidParameter(
                "spectral iteration budget and Krylov dimension must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Tolerance floored a little above machine precision of `R`.
    fn effective_tol<R: RealScalar>(&self) -> R {
        R::lit(self.tol).max(R::epsilon() * R::lit(64.0))
    }
}

#[derive(Debug, Clone)]
pub struct SingularTriple<T: Scalar> {
    pub u: DVector<T>,
    pub v: DVector<T>,
    pub sigma: Real<T>,
    /// Lanczos steps spent.
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct EigenPair<T: Scalar> {
    pub lambda: Real<T>,
    pub u: DVector<T>,
    /// Largest Ritz value magnitude seen, an estimate of `||G||`.
    pub norm_estimate: Real<T>,
    pub iterations: usize,
}

fn start_vector<T: Scalar>(n: usize, seed: u64) -> DVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(n, |_, _| T::sample_normal(&mut rng));
    let norm = v.norm();
    v.unscale(norm)
}

/// Classical Gram-Schmidt against the first `cols` basis vectors, done twice.
fn orthogonalize<T: Scalar>(basis: &DMatrix<T>, cols: usize, w: &mut DVector<T>) {
    if cols == 0 {
        return;
    }
    let q = basis.columns(0, cols);
    for _ in 0..2 {
        let coeffs = q.ad_mul(&*w);
        *w -= &q * coeffs;
    }
}

/// Index of the entry with largest modulus (first one on ties).
fn peak_index<T: Scalar>(x: &DVector<T>) -> usize {
    let mut best = 0;
    let mut best_val = Real::<T>::zero();
    for (i, v) in x.iter().enumerate() {
        let m = v.modulus();
        if m > best_val {
            best = i;
            best_val = m;
        }
    }
    best
}

/// Unit scalar `c` that makes `c * x[peak]` real and positive.
fn canonical_phase<T: Scalar>(x: &DVector<T>) -> T {
    let p = x[peak_index(x)];
    let m = p.modulus();
    if m == Real::<T>::zero() {
        T::one()
    } else {
        p.conjugate().unscale(m)
    }
}

/// Largest singular value of `G` with unit singular vectors, canonicalized so
/// that the largest-magnitude entry of `u` is real and positive.
pub fn max_sing_vec<T: Scalar, G: LinearMap<T> + ?Sized>(g: &G, cfg: &SpectralConfig) -> Result<SingularTriple<T>> {
    cfg.validate()?;
    if g.is_zero() {
        return Err(Error::ZeroGradient);
    }
    let (m, n) = (g.nrows(), g.ncols());
    let cap = cfg.krylov_dim.min(m).min(n).max(1);
    let _tracked = ledger::track(Category::Spectral, (m + n) * (cap + 1) + 3 * cap * cap + 2 * (m + n));
    let tol = cfg.effective_tol::<Real<T>>();
    let mut ubasis = DMatrix::<T>::zeros(m, cap);
    let mut vbasis = DMatrix::<T>::zeros(n, cap + 1);
    let mut v0 = start_vector::<T>(n, cfg.seed);
    let mut spent = 0;
    let mut best: Option<SingularTriple<T>> = None;

    while spent < cfg.max_iters {
        let steps = cap.min(cfg.max_iters - spent);
        vbasis.set_column(0, &v0);
        let mut alphas: Vec<Real<T>> = Vec::with_capacity(steps);
        let mut betas: Vec<Real<T>> = Vec::with_capacity(steps);
        let mut k = 0;
        let mut exhausted = false;
        for j in 0..steps {
            let vj = vbasis.column(j).into_owned();
            let mut p = g.apply(&vj)?;
            orthogonalize(&ubasis, j, &mut p);
            let alpha = p.norm();
            spent += 1;
            if alpha <= Real::<T>::epsilon() * Real::<T>::lit(16.0) * alphas.iter().copied().fold(alpha, |a, b| a.max(b))
                || alpha == Real::<T>::zero()
            {
                exhausted = true;
                break;
            }
            ubasis.set_column(j, &p.unscale(alpha));
            alphas.push(alpha);
            k = j + 1;
            let uj = ubasis.column(j).into_owned();
            let mut r = g.apply_adjoint(&uj)?;
            orthogonalize(&vbasis, j + 1, &mut r);
            let beta = r.norm();
            betas.push(beta);
            if beta <= Real::<T>::epsilon() * Real::<T>::lit(16.0) * alpha || j + 1 >= n {
                exhausted = true;
                break;
            }
            vbasis.set_column(j + 1, &r.unscale(beta));
        }
        if k == 0 {
            // G v0 = 0: v0 lies in the null space. Retry from a perturbed start.
            if best.is_none() && spent < cfg.max_iters {
                v0 = start_vector::<T>(n, cfg.seed.wrapping_add(spent as u64));
                continue;
            }
            break;
        }
        // Upper bidiagonal B = U^* G V restricted to the first k vectors.
        let mut b = DMatrix::<Real<T>>::zeros(k, k);
        for j in 0..k {
            b[(j, j)] = alphas[j];
            if j + 1 < k {
                b[(j, j + 1)] = betas[j];
            }
        }
        let svd = thin_svd(&b.map(T::from_real));
        let sigma = svd.s[0];
        let x = svd.u.column(0).into_owned();
        let y = svd.v.column(0).into_owned();
        let mut u = ubasis.columns(0, k) * x;
        let mut v = vbasis.columns(0, k) * y;
        u.unscale_mut(u.norm());
        v.unscale_mut(v.norm());

        let gv = g.apply(&v)?;
        let gu = g.apply_adjoint(&u)?;
        let res = (&gv - &u * T::from_real(sigma))
            .norm()
            .max((&gu - &v * T::from_real(sigma)).norm());
        let candidate = SingularTriple {
            u,
            v,
            sigma,
            iterations: spent,
        };
        if res <= tol * sigma || (exhausted && k >= m.min(n)) {
            return Ok(canonicalize_pair(candidate));
        }
        if exhausted && res <= tol.sqrt() * sigma {
            // Invariant subspace found; accept at roundoff level.
            return Ok(canonicalize_pair(candidate));
        }
        v0 = candidate.v.clone();
        best = Some(candidate);
    }
    match best {
        Some(b) if b.sigma == Real::<T>::zero() => Err(Error::ZeroGradient),
        _ => Err(Error::NoConvergence(cfg.max_iters)),
    }
}

fn canonicalize_pair<T: Scalar>(mut t: SingularTriple<T>) -> SingularTriple<T> {
    let c = canonical_phase(&t.u);
    t.u *= c;
    t.v *= c;
    t
}

/// Smallest eigenvalue of a Hermitian `G` with a unit eigenvector whose
/// largest-magnitude entry is real and positive.
pub fn min_eig<T: Scalar, G: LinearMap<T> + ?Sized>(g: &G, cfg: &SpectralConfig) -> Result<EigenPair<T>> {
    cfg.validate()?;
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "hermitian map columns",
            expected: n,
            found: g.ncols(),
        });
    }
    if g.is_zero() {
        return Err(Error::ZeroGradient);
    }
    let cap = cfg.krylov_dim.min(n).max(1);
    let _tracked = ledger::track(Category::Spectral, n * (cap + 1) + 3 * cap * cap + 2 * n);
    let tol = cfg.effective_tol::<Real<T>>();
    let mut basis = DMatrix::<T>::zeros(n, cap);
    let mut q0 = start_vector::<T>(n, cfg.seed);
    let mut spent = 0;
    let mut norm_est = Real::<T>::zero();

    while spent < cfg.max_iters {
        let steps = cap.min(cfg.max_iters - spent);
        basis.set_column(0, &q0);
        let mut alphas: Vec<Real<T>> = Vec::with_capacity(steps);
        let mut betas: Vec<Real<T>> = Vec::with_capacity(steps);
        let mut k = 0;
        let mut exhausted = false;
        for j in 0..steps {
            let qj = basis.column(j).into_owned();
            let mut w = g.apply(&qj)?;
            spent += 1;
            let alpha = qj.dotc(&w).real();
            alphas.push(alpha);
            k = j + 1;
            orthogonalize(&basis, j + 1, &mut w);
            let beta = w.norm();
            let scale = alphas
                .iter()
                .chain(betas.iter())
                .fold(Real::<T>::zero(), |a, b| a.max(b.abs()));
            if j + 1 >= n || beta <= Real::<T>::epsilon() * Real::<T>::lit(16.0) * scale {
                exhausted = true;
                break;
            }
            if j + 1 < steps {
                betas.push(beta);
                basis.set_column(j + 1, &w.unscale(beta));
            }
        }
        let mut tri = DMatrix::<Real<T>>::zeros(k, k);
        for j in 0..k {
            tri[(j, j)] = alphas[j];
            if j + 1 < k {
                tri[(j, j + 1)] = betas[j];
                tri[(j + 1, j)] = betas[j];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let mut lo = 0;
        for i in 0..k {
            norm_est = norm_est.max(eig.eigenvalues[i].abs());
            if eig.eigenvalues[i] < eig.eigenvalues[lo] {
                lo = i;
            }
        }
        let lambda = eig.eigenvalues[lo];
        let y = eig.eigenvectors.column(lo).map(T::from_real);
        let mut u = basis.columns(0, k) * y;
        u.unscale_mut(u.norm());
        let gu = g.apply(&u)?;
        let res = (&gu - &u * T::from_real(lambda)).norm();
        if norm_est == Real::<T>::zero() {
            return Err(Error::ZeroGradient);
        }
        if res <= tol * norm_est || (exhausted && k >= n) || (exhausted && res <= tol.sqrt() * norm_est) {
            let c = canonical_phase(&u);
            return Ok(EigenPair {
                lambda,
                u: u * c,
                norm_estimate: norm_est,
                iterations: spent,
            });
        }
        q0 = u;
    }
    Err(Error::NoConvergence(cfg.max_iters))
}
