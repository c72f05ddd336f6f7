//! Dense SVD with a verified result.
//!
//! nalgebra's bidiagonal SVD occasionally returns factors that do not
//! reproduce the input on nearly rank-deficient matrices. [`thin_svd`] checks
//! the reconstruction and falls back to one-sided Jacobi when it fails.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::scalar::{One, Real, RealScalar, Scalar, Zero};

/// Thin SVD `A = U diag(s) V^*`, singular values descending.
#[derive(Debug, Clone)]
pub struct ThinSvd<T: Scalar> {
    pub u: DMatrix<T>,
    pub s: DVector<Real<T>>,
    pub v: DMatrix<T>,
}

impl<T: Scalar> ThinSvd<T> {
    pub fn recompose(&self) -> DMatrix<T> {
        let scaled = DMatrix::from_fn(self.u.nrows(), self.s.len(), |i, j| self.u[(i, j)] * T::from_real(self.s[j]));
        scaled * self.v.adjoint()
    }
}

const MAX_SWEEPS: usize = 80;

pub fn thin_svd<T: Scalar>(a: &DMatrix<T>) -> ThinSvd<T> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return ThinSvd {
            u: DMatrix::zeros(m, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        };
    }
    let norm = a.norm();
    if norm == Real::<T>::zero() {
        let p = m.min(n);
        return ThinSvd {
            u: DMatrix::identity(m, p),
            s: DVector::zeros(p),
            v: DMatrix::identity(n, p),
        };
    }
    let svd = a.clone().svd(true, true);
    let fast = sorted(ThinSvd {
        u: svd.u.expect("left vectors"),
        s: svd.singular_values,
        v: svd.v_t.expect("right vectors").adjoint(),
    });
    let tol = Real::<T>::epsilon() * Real::<T>::lit(1e3) * Real::<T>::count(m.max(n)) * norm;
    if (fast.recompose() - a).norm() <= tol && fast.s.iter().all(|x| x.is_finite()) {
        return fast;
    }
    if m >= n {
        jacobi(a)
    } else {
        let t = jacobi(&a.adjoint());
        ThinSvd { u: t.v, s: t.s, v: t.u }
    }
}

fn sorted<T: Scalar>(svd: ThinSvd<T>) -> ThinSvd<T> {
    let mut order: Vec<usize> = (0..svd.s.len()).collect();
    order.sort_by(|&i, &j| svd.s[j].partial_cmp(&svd.s[i]).unwrap_or(std::cmp::Ordering::Equal));
    if order.iter().enumerate().all(|(k, &i)| k == i) {
        return svd;
    }
    ThinSvd {
        u: svd.u.select_columns(&order),
        s: DVector::from_iterator(order.len(), order.iter().map(|&i| svd.s[i])),
        v: svd.v.select_columns(&order),
    }
}

/// One-sided Jacobi for `m >= n`.
fn jacobi<T: Scalar>(a: &DMatrix<T>) -> ThinSvd<T> {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = Real::<T>::epsilon();
    let one = Real::<T>::one();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dotc(&w.column(j));
                let g = gamma.modulus();
                if g == Real::<T>::zero() || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // remove the phase of gamma from column j, then rotate in the plane
                let phase = gamma.unscale(g).conjugate();
                let zeta = (beta - alpha) / (g + g);
                let sign = if zeta >= Real::<T>::zero() { one } else { -one };
                let t = sign / (zeta.abs() + (one + zeta * zeta).sqrt());
                let c = one / (one + t * t).sqrt();
                let s = c * t;
                let (c, s) = (T::from_real(c), T::from_real(s));
                for k in 0..m {
                    let wi = w[(k, i)];
                    let wj = w[(k, j)] * phase;
                    w[(k, i)] = c * wi - s * wj;
                    w[(k, j)] = s * wi + c * wj;
                }
                for k in 0..n {
                    let vi = v[(k, i)];
                    let vj = v[(k, j)] * phase;
                    v[(k, i)] = c * vi - s * vj;
                    v[(k, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_iterator(n, (0..n).map(|j| w.column(j).norm()));
    let mut u = w;
    for j in 0..n {
        if s[j] > Real::<T>::zero() {
            let mut col = u.column_mut(j);
            col.unscale_mut(s[j]);
        }
    }
    orthonormal_fill(&mut u, &s);
    sorted(ThinSvd { u, s, v })
}

/// Replaces the columns of zero singular values by an orthonormal complement.
fn orthonormal_fill<T: Scalar>(u: &mut DMatrix<T>, s: &DVector<Real<T>>) {
    let (m, n) = u.shape();
    let mut next = 0;
    for j in 0..n {
        if s[j] > Real::<T>::zero() {
            continue;
        }
        while next < m {
            let mut e = DVector::<T>::zeros(m);
            e[next] = T::one();
            next += 1;
            for k in 0..n {
                if k == j || (s[k] == Real::<T>::zero() && k > j) {
                    continue;
                }
                let c = u.column(k).dotc(&e);
                e -= u.column(k) * c;
            }
            let nrm = e.norm();
            if nrm > Real::<T>::lit(0.5) {
                u.set_column(j, &e.unscale(nrm));
                break;
            }
        }
    }
}
