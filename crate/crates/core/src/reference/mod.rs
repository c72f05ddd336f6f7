//! Dense oracles for desk-scale problems: classical CGM on an explicit
//! matrix iterate, a certified optimum via accelerated projected gradient,
//! and evaluation metrics.

mod metrics;

pub use metrics::{eps_rank, phase_aligned_error, psnr, test_error, write_spectra, EvalSpec};

use nalgebra::{ComplexField, DMatrix, DVector, RealField, SymmetricEigen};

use crate::error::{Error, Result};
use crate::ledger::{self, Category, Tracked};
use crate::linalg::thin_svd;
use crate::losses::Loss;
use crate::operators::{lift, real_part_checked, MeasurementOperator};
use crate::scalar::{One, Real, RealScalar, Scalar, Zero};
use crate::solver::{duality_gap, learning_rate, Direction, Template, Variant};
use crate::spectral::{max_sing_vec, min_eig, SpectralConfig};

/// Largest `m * n` the dense oracles accept.
pub const DENSE_LIMIT: usize = 1_000_000;

fn guard(m: usize, n: usize) -> Result<()> {
    let size = m.saturating_mul(n);
    if size > DENSE_LIMIT {
        return Err(Error::TooLargeForDense(size));
    }
    Ok(())
}

/// `Re(A X)` for a dense `X`.
pub fn dense_measure<T: Scalar, O: MeasurementOperator<T> + ?Sized>(op: &O, x: &DMatrix<T>) -> Result<DVector<Real<T>>> {
    real_part_checked(&op.apply_dense(x)?)
}

/// Dense gradient matrix `A^*(g)`.
pub fn dense_gradient<T: Scalar, O: MeasurementOperator<T> + ?Sized>(op: &O, g: &DVector<Real<T>>) -> Result<DMatrix<T>> {
    op.adjoint_dense(&lift::<T>(g))
}

#[derive(Debug, Clone)]
pub struct DenseEvaluation<T: Scalar> {
    pub t: usize,
    pub objective: Real<T>,
    pub gap: Real<T>,
    pub eta: Real<T>,
    pub direction: Direction<T>,
    pub h: DVector<Real<T>>,
    pub z: DVector<Real<T>>,
}

/// Conditional gradient with the iterate `X_t` stored as a dense matrix.
/// Directions come from the same spectral routine and seed as SketchyCGM,
/// applied to the explicitly formed gradient matrix.
pub struct DenseCgm<'a, T: Scalar, O: ?Sized> {
    op: &'a O,
    loss: &'a Loss<Real<T>>,
    alpha: Real<T>,
    template: Template,
    variant: Variant,
    spectral: SpectralConfig,
    x: DMatrix<T>,
    /// Weight of the Poisson-variant starting point `d^{-1/2} 1` in `z_t`.
    offset: Real<T>,
    t: usize,
    _tracked: Tracked,
}

impl<'a, T: Scalar, O: MeasurementOperator<T> + ?Sized> DenseCgm<'a, T, O> {
    pub fn new(
        op: &'a O,
        loss: &'a Loss<Real<T>>,
        alpha: Real<T>,
        template: Template,
        variant: Variant,
        spectral: SpectralConfig,
    ) -> Result<Self> {
        let (m, n) = (op.nrows(), op.ncols());
        guard(m, n)?;
        if loss.len() != op.measurements() {
            return Err(Error::DimensionMismatch {
                what: "loss data",
                expected: op.measurements(),
                found: loss.len(),
            });
        }
        if template == Template::Psd && m != n {
            return Err(Error::InvalidParameter("psd template needs a square domain".into()));
        }
        let offset = match variant {
            Variant::Standard => Real::<T>::zero(),
            Variant::Poisson => Real::<T>::one(),
        };
        Ok(DenseCgm {
            op,
            loss,
            alpha,
            template,
            variant,
            spectral,
            x: DMatrix::zeros(m, n),
            offset,
            t: 0,
            _tracked: ledger::track(Category::Dense, m * n),
        })
    }

    pub fn x(&self) -> &DMatrix<T> {
        &self.x
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    /// `z_t = A X_t` (plus the decayed starting point for the Poisson variant).
    pub fn z(&self) -> Result<DVector<Real<T>>> {
        let mut z = dense_measure(self.op, &self.x)?;
        if self.offset != Real::<T>::zero() {
            let d = z.len();
            let start = Real::<T>::one() / Real::<T>::count(d).sqrt();
            z.add_scalar_mut(self.offset * start);
        }
        Ok(z)
    }

    pub fn evaluate(&self) -> Result<DenseEvaluation<T>> {
        let z = self.z()?;
        let objective = self.loss.value(&z)?;
        let g = self.loss.gradient(&z)?;
        let _dense = ledger::track(Category::Dense, self.x.len());
        let gm = dense_gradient(self.op, &g)?;
        let (direction, h) = match self.template {
            Template::Schatten1 => match max_sing_vec(&gm, &self.spectral) {
                Err(Error::ZeroGradient) => (Direction::Zero, DVector::zeros(z.len())),
                Err(e) => return Err(e),
                Ok(p) => {
                    let h = real_part_checked(&self.op.apply_rank_one(&p.u, &p.v)?)? * -self.alpha;
                    (Direction::Schatten { u: p.u, v: p.v }, h)
                }
            },
            Template::Psd => match min_eig(&gm, &self.spectral) {
                Err(Error::ZeroGradient) => (Direction::Zero, DVector::zeros(z.len())),
                Err(e) => return Err(e),
                Ok(p) if p.lambda > Real::<T>::zero() => (Direction::Zero, DVector::zeros(z.len())),
                Ok(p) => {
                    let h = real_part_checked(&self.op.apply_rank_one(&p.u, &p.u)?)? * self.alpha;
                    (Direction::Psd { u: p.u }, h)
                }
            },
        };
        let gap = duality_gap(&z, &h, &g);
        let eta = learning_rate(self.t, self.variant);
        Ok(DenseEvaluation {
            t: self.t,
            objective,
            gap,
            eta: Real::<T>::lit(*eta.numer() as f64) / Real::<T>::lit(*eta.denom() as f64),
            direction,
            h,
            z,
        })
    }

    /// `X <- (1 - eta) X + eta H`.
    pub fn advance(&mut self, eval: &DenseEvaluation<T>) -> Result<()> {
        let eta = eval.eta;
        let one = Real::<T>::one();
        match eval.direction.factors(self.alpha) {
            Some((a, b)) => self.x.gerc(T::from_real(eta), &a, &b, T::from_real(one - eta)),
            None => self.x *= T::from_real(one - eta),
        }
        self.offset *= one - eta;
        self.t += 1;
        Ok(())
    }

    /// Singular values of the current iterate, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        thin_svd(&self.x)
            .s
            .iter()
            .map(|s| s.as_f64())
            .collect()
    }

    /// Runs until the gap is below `eps` or `max_iters` updates.
    pub fn run(mut self, max_iters: usize, eps: f64, record_spectra: bool) -> Result<DenseRun<T>> {
        let mut objectives = Vec::new();
        let mut gaps = Vec::new();
        let mut spectra = Vec::new();
        loop {
            let eval = self.evaluate()?;
            objectives.push(eval.objective.as_f64());
            gaps.push(eval.gap.as_f64());
            if record_spectra {
                spectra.push((self.t, self.spectrum()));
            }
            if eval.gap.as_f64() <= eps || self.t >= max_iters {
                break;
            }
            self.advance(&eval)?;
        }
        Ok(DenseRun {
            x: self.x.clone(),
            objectives,
            gaps,
            spectra,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DenseRun<T: Scalar> {
    pub x: DMatrix<T>,
    /// `f(z_t)` for `t = 0, 1, ...`.
    pub objectives: Vec<f64>,
    pub gaps: Vec<f64>,
    pub spectra: Vec<(usize, Vec<f64>)>,
}

/// Frank-Wolfe gap of a dense feasible point, using an exact dense
/// decomposition of the gradient matrix.
pub fn dense_gap<T: Scalar, O: MeasurementOperator<T> + ?Sized>(
    op: &O,
    loss: &Loss<Real<T>>,
    alpha: Real<T>,
    template: Template,
    x: &DMatrix<T>,
) -> Result<Real<T>> {
    let z = dense_measure(op, x)?;
    let g = loss.gradient(&z)?;
    let gm = dense_gradient(op, &g)?;
    let zg = z.dot(&g);
    Ok(match template {
        Template::Schatten1 => zg + alpha * thin_svd(&gm).s[0],
        Template::Psd => {
            let lmin = SymmetricEigen::new(hermitian_part(&gm)).eigenvalues.min();
            zg - alpha * lmin.min(Real::<T>::zero())
        }
    })
}

fn hermitian_part<T: Scalar>(x: &DMatrix<T>) -> DMatrix<T> {
    (x + x.adjoint()) * T::from_real(Real::<T>::lit(0.5))
}

/// Euclidean projection onto `{w >= 0, sum w <= alpha}`.
pub fn project_capped_simplex<R: RealScalar>(v: &[R], alpha: R) -> Vec<R> {
    let clipped: Vec<R> = v.iter().map(|x| x.max(R::zero())).collect();
    let total = clipped.iter().fold(R::zero(), |a, b| a + *b);
    if total <= alpha {
        return clipped;
    }
    let mut sorted = clipped.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = R::zero();
    let mut theta = R::zero();
    for (k, &s) in sorted.iter().enumerate() {
        cum += s;
        let candidate = (cum - alpha) / R::count(k + 1);
        if s - candidate > R::zero() {
            theta = candidate;
        }
    }
    clipped.iter().map(|x| (*x - theta).max(R::zero())).collect()
}

/// Projection onto the constraint set of `template`.
pub fn project<T: Scalar>(y: &DMatrix<T>, alpha: Real<T>, template: Template) -> DMatrix<T> {
    match template {
        Template::Schatten1 => {
            let svd = thin_svd(y);
            let s: Vec<Real<T>> = svd.s.iter().copied().collect();
            let p = project_capped_simplex(&s, alpha);
            let scaled = DMatrix::from_fn(svd.u.nrows(), p.len(), |i, j| svd.u[(i, j)] * T::from_real(p[j]));
            scaled * svd.v.adjoint()
        }
        Template::Psd => {
            let eig = SymmetricEigen::new(hermitian_part(y));
            let l: Vec<Real<T>> = eig.eigenvalues.iter().copied().collect();
            let p = project_capped_simplex(&l, alpha);
            let q = &eig.eigenvectors;
            let scaled = DMatrix::from_fn(q.nrows(), p.len(), |i, j| q[(i, j)] * T::from_real(p[j]));
            scaled * q.adjoint()
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseOptimum<T: Scalar> {
    pub x: DMatrix<T>,
    /// `f(A x)`.
    pub value: f64,
    /// Frank-Wolfe gap at `x`; the true optimum lies in `[value - gap, value]`.
    pub gap: f64,
    pub iterations: usize,
}

impl<T: Scalar> DenseOptimum<T> {
    /// Certified lower bound on the optimal value.
    pub fn lower_bound(&self) -> f64 {
        self.value - self.gap.max(0.0)
    }
}

/// Minimizes `f(A X)` over the constraint set by accelerated projected
/// gradient with adaptive restart, stopping once the Frank-Wolfe gap
/// certifies `tol`-optimality.
///
/// Smooth losses use the fixed step `1 / (L ||A||^2)` and a gradient-based
/// restart test, so progress never hinges on comparing nearly equal
/// objective values. The Poisson loss falls back to backtracking.
pub fn dense_optimum<T: Scalar, O: MeasurementOperator<T> + ?Sized>(
    op: &O,
    loss: &Loss<Real<T>>,
    alpha: Real<T>,
    template: Template,
    tol: f64,
    max_iters: usize,
) -> Result<DenseOptimum<T>> {
    let (m, n) = (op.nrows(), op.ncols());
    guard(m, n)?;
    let _dense = ledger::track(Category::Dense, 4 * m * n);
    let fixed_lip = match loss.smoothness() {
        Some(l) => Some(l * operator_norm_squared(op)? * Real::<T>::lit(1.02)),
        None => None,
    };
    let objective = |x: &DMatrix<T>| -> Result<Real<T>> { loss.value(&dense_measure(op, x)?) };
    let gradient_at = |x: &DMatrix<T>| -> Result<(Real<T>, DMatrix<T>)> {
        let z = dense_measure(op, x)?;
        Ok((loss.value(&z)?, dense_gradient(op, &loss.gradient(&z)?)?))
    };
    let one = Real::<T>::one();
    let half = Real::<T>::lit(0.5);
    let mut x = DMatrix::<T>::zeros(m, n);
    let mut fx = objective(&x)?;
    let mut y = x.clone();
    let mut momentum = one;
    let mut lip = fixed_lip.unwrap_or(one);
    let mut gap = dense_gap(op, loss, alpha, template, &x)?;
    let mut iters = 0;
    while iters < max_iters && gap.as_f64() > tol {
        iters += 1;
        let (fy, gy) = gradient_at(&y)?;
        let (p, fp) = match fixed_lip {
            Some(l) => {
                let p = project(&(&y - &gy * T::from_real(one / l)), alpha, template);
                let fp = objective(&p)?;
                (p, fp)
            }
            None => loop {
                let p = project(&(&y - &gy * T::from_real(one / lip)), alpha, template);
                let fp = objective(&p)?;
                let d = &p - &y;
                let model = fy + real_inner(&gy, &d) + half * lip * d.norm_squared();
                let slack = Real::<T>::epsilon() * Real::<T>::lit(64.0) * (fy.abs() + one);
                if fp <= model + slack || lip > Real::<T>::lit(1e30) {
                    break (p, fp);
                }
                lip *= Real::<T>::lit(2.0);
            },
        };
        // restart when the step opposes the momentum direction
        let restart = real_inner(&(&y - &p), &(&p - &x)) > Real::<T>::zero();
        if restart {
            momentum = one;
        }
        let next = (one + (one + Real::<T>::lit(4.0) * momentum * momentum).sqrt()) * half;
        let beta = if restart { Real::<T>::zero() } else { (momentum - one) / next };
        y = &p + (&p - &x) * T::from_real(beta);
        x = p;
        fx = fp;
        momentum = if restart { one } else { next };
        if fixed_lip.is_none() {
            lip *= Real::<T>::lit(0.9);
        }
        if iters % 10 == 0 {
            gap = dense_gap(op, loss, alpha, template, &x)?;
        }
    }
    gap = dense_gap(op, loss, alpha, template, &x)?;
    Ok(DenseOptimum {
        value: fx.as_f64(),
        gap: gap.as_f64(),
        x,
        iterations: iters,
    })
}

fn real_inner<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Real<T> {
    a.iter()
        .zip(b.iter())
        .fold(Real::<T>::zero(), |acc, (x, y)| acc + (x.conjugate() * *y).real())
}

/// `||A||^2` by power iteration on `A^* A`, slightly overestimated.
fn operator_norm_squared<T: Scalar, O: MeasurementOperator<T> + ?Sized>(op: &O) -> Result<Real<T>> {
    let (m, n) = (op.nrows(), op.ncols());
    let mut x = DMatrix::<T>::from_fn(m, n, |i, j| T::from_real(Real::<T>::lit(1.0 + ((7 * i + 13 * j) % 17) as f64 / 17.0)));
    let mut est = Real::<T>::zero();
    for _ in 0..300 {
        let nx = x.norm();
        if nx == Real::<T>::zero() {
            return Ok(Real::<T>::one());
        }
        x.unscale_mut(nx);
        let ax = op.apply_dense(&x)?;
        let next = op.adjoint_dense(&ax)?;
        let prev = est;
        est = ax.norm_squared();
        x = next;
        if (est - prev).abs() <= Real::<T>::lit(1e-12) * est {
            break;
        }
    }
    if est == Real::<T>::zero() {
        return Ok(Real::<T>::one());
    }
    Ok(est)
}
