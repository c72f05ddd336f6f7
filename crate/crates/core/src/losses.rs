//! Separable convex losses `f(z) = c * sum_i psi(z_i; b_i)`.

use nalgebra::DVector;

use crate::error::{ensure_dim, Error, Result};
use crate::scalar::RealScalar;

/// Poisson losses are evaluated at `max(z, POISSON_FLOOR)`.
pub const POISSON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `(z - b)^2 / 2`.
    Gauss,
    /// Huber penalty on the residual `z - b` with threshold `delta`.
    Huber { delta: f64 },
    /// `log(1 + exp(-b z))`, labels `b` in `{-1, +1}`.
    Logistic,
    /// `z - b log z`, data `b >= 0`.
    Poisson,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Gauss => "gauss",
            LossKind::Huber { .. } => "huber",
            LossKind::Logistic => "logistic",
            LossKind::Poisson => "poisson",
        }
    }

    /// Parses `gauss`, `huber`, `logistic` or `poisson`; Huber uses `delta = 1`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gauss" | "gaussian" | "quadratic" => Ok(LossKind::Gauss),
            "huber" => Ok(LossKind::Huber { delta: 1.0 }),
            "logistic" => Ok(LossKind::Logistic),
            "poisson" => Ok(LossKind::Poisson),
            other => Err(Error::InvalidParameter(format!("unknown loss '{other}'"))),
        }
    }

    /// Scalar loss `psi(z; b)`.
    pub fn psi<R: RealScalar>(&self, z: R, b: R) -> R {
        let half = R::lit(0.5);
        match *self {
            LossKind::Gauss => {
                let r = z - b;
                half * r * r
            }
            LossKind::Huber { delta } => {
                let delta = R::lit(delta);
                let r = (z - b).abs();
                if r <= delta {
                    half * r * r
                } else {
                    delta * (r - half * delta)
                }
            }
            LossKind::Logistic => softplus(-(b * z)),
            LossKind::Poisson => {
                let z = z.max(R::lit(POISSON_FLOOR));
                if b == R::zero() {
                    z
                } else {
                    z - b * z.ln()
                }
            }
        }
    }

    /// Derivative of `psi` in `z`.
    pub fn dpsi<R: RealScalar>(&self, z: R, b: R) -> R {
        match *self {
            LossKind::Gauss => z - b,
            LossKind::Huber { delta } => {
                let delta = R::lit(delta);
                (z - b).max(-delta).min(delta)
            }
            // -b / (1 + exp(b z)) = -b * sigmoid(-b z)
            LossKind::Logistic => -b * sigmoid(-(b * z)),
            LossKind::Poisson => {
                let z = z.max(R::lit(POISSON_FLOOR));
                R::one() - b / z
            }
        }
    }

    /// Lipschitz constant of `dpsi`, if it exists.
    pub fn smoothness(&self) -> Option<f64> {
        match self {
            LossKind::Gauss | LossKind::Huber { .. } => Some(1.0),
            LossKind::Logistic => Some(0.25),
            LossKind::Poisson => None,
        }
    }
}

fn softplus<R: RealScalar>(x: R) -> R {
    // log(1 + e^x) without overflow
    x.max(R::zero()) + (R::one() + (-x.abs()).exp()).ln()
}

fn sigmoid<R: RealScalar>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

/// How the per-measurement losses are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Plain sum.
    Sum,
    /// Average over measurements.
    Mean,
}

#[derive(Debug, Clone)]
pub struct Loss<R: RealScalar> {
    kind: LossKind,
    data: DVector<R>,
    scale: R,
}

impl<R: RealScalar> Loss<R> {
    pub fn new(kind: LossKind, data: DVector<R>, normalization: Normalization) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("loss data is empty".into()));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteInput("loss data"));
        }
        match kind {
            LossKind::Logistic => {
                if let Some(bad) = data.iter().find(|b| **b != R::one() && **b != -R::one()) {
                    return Err(Error::Domain(format!(
                        "logistic labels must be +1 or -1, found {}",
                        bad.as_f64()
                    )));
                }
            }
            LossKind::Poisson => {
                if let Some(bad) = data.iter().find(|b| **b < R::zero()) {
                    return Err(Error::Domain(format!(
                        "poisson data must be nonnegative, found {}",
                        bad.as_f64()
                    )));
                }
            }
            LossKind::Huber { delta } if delta.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) => {
                return Err(Error::InvalidParameter("huber threshold must be positive".into()));
            }
            _ => {}
        }
        let scale = match normalization {
            Normalization::Sum => R::one(),
            Normalization::Mean => R::one() / R::count(data.len()),
        };
        Ok(Loss { kind, data, scale })
    }

    pub fn gauss(data: DVector<R>, normalization: Normalization) -> Result<Self> {
        Self::new(LossKind::Gauss, data, normalization)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn data(&self) -> &DVector<R> {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Overall weight applied to the sum.
    pub fn scale(&self) -> R {
        self.scale
    }

    fn check(&self, z: &DVector<R>) -> Result<()> {
        ensure_dim("loss argument", self.data.len(), z.len())?;
        if !z.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteInput("loss argument"));
        }
        Ok(())
    }

    pub fn value(&self, z: &DVector<R>) -> Result<R> {
        self.check(z)?;
        let sum = z
            .iter()
            .zip(self.data.iter())
            .fold(R::zero(), |acc, (&zi, &bi)| acc + self.kind.psi(zi, bi));
        Ok(self.scale * sum)
    }

    pub fn gradient(&self, z: &DVector<R>) -> Result<DVector<R>> {
        self.check(z)?;
        Ok(DVector::from_iterator(
            z.len(),
            z.iter()
                .zip(self.data.iter())
                .map(|(&zi, &bi)| self.scale * self.kind.dpsi(zi, bi)),
        ))
    }

    /// Lipschitz constant of the gradient, if the loss is smooth.
    pub fn smoothness(&self) -> Option<R> {
        self.kind.smoothness().map(|l| R::lit(l) * self.scale)
    }
}
