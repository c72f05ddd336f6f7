//! SketchyCGM: conditional gradient on the measurement vector `z = A X` with
//! the primal iterate kept only as a randomized sketch.
//!
//! Each iteration computes a rank-one extreme point `H` of the constraint set
//! from the gradient `A^*(grad f(z))`, measures it as `h = A H`, and moves
//! `z <- (1 - eta) z + eta h` while averaging `H` into the sketch with the
//! same weight. The duality gap `<z - h, grad f(z)>` bounds suboptimality.

use std::fmt;
use std::time::Instant;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::ledger::{self, Category, Tracked};
use crate::losses::{Loss, LossKind};
use crate::operators::{psd_measure, real_part_checked, MeasurementOperator};
use crate::scalar::{One, Real, RealScalar, Scalar, Zero};
use crate::sketch::{FactoredMatrix, Sketch};
use crate::spectral::{max_sing_vec, min_eig, ImplicitGradientMatrix, SpectralConfig};

/// Constraint set of the model problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    /// `||X||_{S1} <= alpha`.
    Schatten1,
    /// `tr X <= alpha`, `X` psd.
    Psd,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::Schatten1 => "schatten1",
            Template::Psd => "psd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "schatten1" | "nuclear" => Ok(Template::Schatten1),
            "psd" => Ok(Template::Psd),
            other => Err(Error::InvalidParameter(format!("unknown template '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `z_0 = 0`, `eta_t = 2 / (t + 2)`.
    Standard,
    /// `z_0 = d^{-1/2} 1`, `eta_t = 2 / (t + 3)`; keeps Poisson losses finite.
    Poisson,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Poisson => "poisson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "poisson" => Ok(Variant::Poisson),
            other => Err(Error::InvalidParameter(format!("unknown variant '{other}'"))),
        }
    }
}

/// Exact step size at iteration `t`.
pub fn learning_rate(t: usize, variant: Variant) -> Ratio<u64> {
    let offset = match variant {
        Variant::Standard => 2,
        Variant::Poisson => 3,
    };
    Ratio::new(2, t as u64 + offset)
}

fn ratio_value<R: RealScalar>(r: Ratio<u64>) -> R {
    R::lit(*r.numer() as f64) / R::lit(*r.denom() as f64)
}

/// Trace bound for phase retrieval: the mean measurement.
pub fn select_alpha_phase<R: RealScalar>(b: &DVector<R>) -> Result<R> {
    if b.is_empty() {
        return Err(Error::InvalidParameter("no measurements to average".into()));
    }
    Ok(b.sum() / R::count(b.len()))
}

/// `<z - h, g>`; measurement vectors are real so no conjugation is needed.
pub fn duality_gap<R: RealScalar>(z: &DVector<R>, h: &DVector<R>, g: &DVector<R>) -> R {
    (z - h).dot(g)
}

#[derive(Clone)]
pub struct ProblemSpec<T: Scalar, O> {
    pub op: O,
    pub loss: Loss<Real<T>>,
    pub alpha: Real<T>,
    pub template: Template,
    pub rank: usize,
    pub eps: f64,
    pub max_iters: usize,
    pub variant: Variant,
    pub spectral: SpectralConfig,
    pub sketch_seed: u64,
}

impl<T: Scalar, O> fmt::Debug for ProblemSpec<T, O> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("loss", &self.loss.kind())
            .field("alpha", &self.alpha.as_f64())
            .field("template", &self.template)
            .field("rank", &self.rank)
            .field("eps", &self.eps)
            .field("max_iters", &self.max_iters)
            .field("variant", &self.variant)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar, O: MeasurementOperator<T>> ProblemSpec<T, O> {
    /// Rank 1, `eps = 1e-6`, 1000 iterations, standard variant.
    pub fn new(op: O, loss: Loss<Real<T>>, alpha: Real<T>, template: Template) -> Self {
        ProblemSpec {
            op,
            loss,
            alpha,
            template,
            rank: 1,
            eps: 1e-6,
            max_iters: 1000,
            variant: Variant::Standard,
            spectral: SpectralConfig::default(),
            sketch_seed: 0,
        }
    }

    pub fn rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }

    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Seeds both the sketch test matrices and the spectral start vector.
    pub fn seed(mut self, seed: u64) -> Self {
        self.sketch_seed = seed;
        self.spectral.seed = seed ^ 0x9e37_79b9_7f4a_7c15;
        self
    }

    pub fn spectral(mut self, cfg: SpectralConfig) -> Self {
        self.spectral = cfg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > Real::<T>::zero()) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be positive and finite".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        if self.rank == 0 {
            return Err(Error::InvalidParameter("rank must be >= 1".into()));
        }
        if self.loss.len() != self.op.measurements() {
            return Err(Error::DimensionMismatch {
                what: "loss data",
                expected: self.op.measurements(),
                found: self.loss.len(),
            });
        }
        match self.template {
            Template::Psd if self.op.nrows() != self.op.ncols() => {
                return Err(Error::InvalidParameter("psd template needs a square domain".into()))
            }
            Template::Schatten1 if T::IS_COMPLEX => {
                return Err(Error::InvalidParameter(
                    "schatten1 template needs a real field; use psd for complex problems".into(),
                ))
            }
            _ => {}
        }
        if self.variant == Variant::Poisson && self.loss.kind() != LossKind::Poisson {
            return Err(Error::InvalidParameter("poisson variant needs the poisson loss".into()));
        }
        Ok(())
    }
}

/// A rank-one extreme point of the constraint set.
#[derive(Debug, Clone, PartialEq)]
pub enum Direction<T: Scalar> {
    /// The zero matrix (psd template with a positive definite gradient, or a
    /// vanishing gradient).
    Zero,
    /// `-alpha u v^*`.
    Schatten { u: DVector<T>, v: DVector<T> },
    /// `alpha u u^*`.
    Psd { u: DVector<T> },
}

impl<T: Scalar> Direction<T> {
    /// Factors `(a, b)` with `H = a b^*`, or `None` for the zero direction.
    pub fn factors(&self, alpha: Real<T>) -> Option<(DVector<T>, DVector<T>)> {
        match self {
            Direction::Zero => None,
            Direction::Schatten { u, v } => Some((u * T::from_real(-alpha), v.clone())),
            Direction::Psd { u } => Some((u * T::from_real(alpha), u.clone())),
        }
    }

    /// Dense `H`. Test and reference use only.
    pub fn to_dense(&self, alpha: Real<T>, m: usize, n: usize) -> DMatrix<T> {
        match self.factors(alpha) {
            None => DMatrix::zeros(m, n),
            Some((a, b)) => a * b.adjoint(),
        }
    }
}

/// Linear minimization step: the extreme point `H` and its measurements `A H`.
pub fn update_direction<T, O>(
    op: &O,
    template: Template,
    alpha: Real<T>,
    g: &DVector<Real<T>>,
    cfg: &SpectralConfig,
) -> Result<(Direction<T>, DVector<Real<T>>)>
where
    T: Scalar,
    O: MeasurementOperator<T> + ?Sized,
{
    let d = op.measurements();
    let zero = || (Direction::Zero, DVector::zeros(d));
    let gm = ImplicitGradientMatrix::<T, O>::from_real(op, g)?;
    match template {
        Template::Schatten1 => match max_sing_vec(&gm, cfg) {
            Err(Error::ZeroGradient) => Ok(zero()),
            Err(e) => Err(e),
            Ok(pair) => {
                let h = real_part_checked(&op.apply_rank_one(&pair.u, &pair.v)?)? * -alpha;
                Ok((Direction::Schatten { u: pair.u, v: pair.v }, h))
            }
        },
        Template::Psd => match min_eig(&gm, cfg) {
            Err(Error::ZeroGradient) => Ok(zero()),
            Err(e) => Err(e),
            Ok(pair) if pair.lambda > Real::<T>::zero() => Ok(zero()),
            Ok(pair) => {
                let u = DMatrix::from_column_slice(pair.u.len(), 1, pair.u.as_slice());
                let h = psd_measure(op, &u, &[alpha])?;
                Ok((Direction::Psd { u: pair.u }, h))
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    /// `f(z_t)`.
    pub objective: f64,
    /// Duality gap at `z_t`.
    pub gap: f64,
    /// Step size that moves `z_t` to `z_{t+1}`.
    pub eta: f64,
    pub wall_ms: f64,
    pub metrics: Vec<(String, f64)>,
}

impl IterationRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
}

/// One evaluated iterate: objective, gap, and the direction the next update
/// would take.
#[derive(Debug, Clone)]
pub struct Evaluation<T: Scalar> {
    pub t: usize,
    pub objective: Real<T>,
    pub gap: Real<T>,
    pub eta: Real<T>,
    pub direction: Direction<T>,
    pub h: DVector<Real<T>>,
    pub gradient: DVector<Real<T>>,
}

pub struct SketchyCgm<T: Scalar, O> {
    spec: ProblemSpec<T, O>,
    z: DVector<Real<T>>,
    t: usize,
    sketch: Sketch<T>,
    last_gap: Option<Real<T>>,
    _tracked: Tracked,
}

impl<T: Scalar, O: MeasurementOperator<T>> SketchyCgm<T, O> {
    pub fn new(spec: ProblemSpec<T, O>) -> Result<Self> {
        spec.validate()?;
        let d = spec.op.measurements();
        // loss data and the dual iterate
        let tracked = ledger::track(Category::Measurement, 2 * d);
        let z = match spec.variant {
            Variant::Standard => DVector::zeros(d),
            Variant::Poisson => {
                DVector::from_element(d, Real::<T>::one() / Real::<T>::count(d).sqrt())
            }
        };
        let sketch = Sketch::new(spec.op.nrows(), spec.op.ncols(), spec.rank, spec.sketch_seed)?;
        Ok(SketchyCgm {
            spec,
            z,
            t: 0,
            sketch,
            last_gap: None,
            _tracked: tracked,
        })
    }

    pub fn spec(&self) -> &ProblemSpec<T, O> {
        &self.spec
    }

    /// Dual iterate `z_t`.
    pub fn z(&self) -> &DVector<Real<T>> {
        &self.z
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn sketch(&self) -> &Sketch<T> {
        &self.sketch
    }

    pub fn last_gap(&self) -> Option<Real<T>> {
        self.last_gap
    }

    pub fn eta(&self) -> Real<T> {
        ratio_value(learning_rate(self.t, self.spec.variant))
    }

    /// Objective, gradient, direction and gap at the current iterate.
    pub fn evaluate(&mut self) -> Result<Evaluation<T>> {
        let d = self.z.len();
        let _scratch = ledger::track(Category::Workspace, 2 * d);
        let objective = self.spec.loss.value(&self.z)?;
        let gradient = self.spec.loss.gradient(&self.z)?;
        let (direction, h) = update_direction(
            &self.spec.op,
            self.spec.template,
            self.spec.alpha,
            &gradient,
            &self.spec.spectral,
        )?;
        let gap = duality_gap(&self.z, &h, &gradient);
        self.last_gap = Some(gap);
        Ok(Evaluation {
            t: self.t,
            objective,
            gap,
            eta: self.eta(),
            direction,
            h,
            gradient,
        })
    }

    /// Moves to `z_{t+1}` along an evaluation of the current iterate.
    pub fn advance(&mut self, eval: &Evaluation<T>) -> Result<()> {
        if eval.t != self.t {
            return Err(Error::InvalidParameter(format!(
                "evaluation is for iteration {}, solver is at {}",
                eval.t, self.t
            )));
        }
        let eta = eval.eta;
        let one = Real::<T>::one();
        self.z.axpy(eta, &eval.h, one - eta);
        match eval.direction.factors(self.spec.alpha) {
            Some((a, b)) => self.sketch.cgm_update(&a, &b, eta)?,
            None => {
                let a = DVector::zeros(self.spec.op.nrows());
                let b = DVector::zeros(self.spec.op.ncols());
                self.sketch
                    .linear_update(T::from_real(one - eta), T::zero(), &a, &b)?
            }
        }
        self.t += 1;
        Ok(())
    }

    /// Evaluates and, unless the gap is below `eps`, advances.
    pub fn step(&mut self) -> Result<(Evaluation<T>, bool)> {
        let eval = self.evaluate()?;
        let converged = eval.gap.as_f64() <= self.spec.eps;
        if !converged {
            self.advance(&eval)?;
        }
        Ok((eval, converged))
    }

    /// Rank-`r` reconstruction of the current implicit iterate.
    pub fn reconstruct(&self) -> Result<FactoredMatrix<T>> {
        match self.spec.template {
            Template::Schatten1 => self.sketch.reconstruct(self.spec.rank),
            Template::Psd => self.sketch.reconstruct_psd(self.spec.rank),
        }
    }

    /// Runs to convergence or the iteration cap. Every `trace_every`
    /// iterations the current reconstruction is passed to `metrics` and the
    /// returned values are attached to the record.
    pub fn run<F>(mut self, trace_every: Option<usize>, mut metrics: F) -> Result<Solution<T>>
    where
        F: FnMut(&FactoredMatrix<T>) -> Vec<(String, f64)>,
    {
        let start = Instant::now();
        let mut trace = Vec::new();
        let status = loop {
            let eval = self.evaluate()?;
            let mut record = IterationRecord {
                t: eval.t,
                objective: eval.objective.as_f64(),
                gap: eval.gap.as_f64(),
                eta: eval.eta.as_f64(),
                wall_ms: 0.0,
                metrics: Vec::new(),
            };
            let done = if record.gap <= self.spec.eps {
                Some(Status::Converged)
            } else if self.t >= self.spec.max_iters {
                Some(Status::MaxIters)
            } else {
                None
            };
            if let Some(every) = trace_every.filter(|e| *e > 0) {
                if eval.t % every == 0 || done.is_some() {
                    record.metrics = metrics(&self.reconstruct()?);
                }
            }
            record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            trace.push(record);
            if let Some(status) = done {
                break status;
            }
            self.advance(&eval)?;
        };
        let factors = self.reconstruct()?;
        let last = trace.last().expect("at least one evaluation");
        Ok(Solution {
            objective: last.objective,
            gap: last.gap,
            iterations: self.t,
            status,
            factors,
            trace,
            z: self.z,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Solution<T: Scalar> {
    pub factors: FactoredMatrix<T>,
    pub trace: Vec<IterationRecord>,
    pub status: Status,
    /// Updates performed.
    pub iterations: usize,
    pub objective: f64,
    pub gap: f64,
    /// Final dual iterate.
    pub z: DVector<Real<T>>,
}

/// Runs SketchyCGM with reconstruction only at termination.
pub fn solve<T: Scalar, O: MeasurementOperator<T>>(spec: ProblemSpec<T, O>) -> Result<Solution<T>> {
    SketchyCgm::new(spec)?.run(None, |_| Vec::new())
}
