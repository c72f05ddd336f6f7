//! Scalar field abstraction.
//!
//! Everything in the crate is generic over a field `T: Scalar`, which is one
//! of `f32`, `f64`, `Complex<f32>` or `Complex<f64>`. Measurement vectors,
//! losses and singular values live in the associated real type
//! `Real<T> = T::RealField`.

use nalgebra::{ComplexField, RealField};
use num_complex::Complex;
pub use num_traits::{One, Zero};
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Real part type of a scalar field.
pub type Real<T> = <T as ComplexField>::RealField;

/// A real or complex scalar field the solver can work over.
pub trait Scalar: ComplexField<RealField: RealScalar> + Copy + Send + Sync {
    /// `true` for complex fields.
    const IS_COMPLEX: bool;

    /// Draws a standard normal variate. Complex fields draw independent real
    /// and imaginary parts with variance 1/2 each, so `E|x|^2 = 1`.
    fn sample_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Builds a scalar from real and imaginary parts; real fields drop `im`.
    fn from_parts(re: Self::RealField, im: Self::RealField) -> Self;
}

/// A real floating-point field.
pub trait RealScalar: RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync {
    /// Machine epsilon.
    fn epsilon() -> Self;

    /// Converts an `f64` literal into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    /// Converts a count into this type.
    #[inline]
    fn count(x: usize) -> Self {
        <Self as FromPrimitive>::from_usize(x).expect("representable count")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

macro_rules! real_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const IS_COMPLEX: bool = false;

            fn sample_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
                rng.sample(StandardNormal)
            }

            fn from_parts(re: $t, _im: $t) -> Self {
                re
            }
        }

        impl RealScalar for $t {
            fn epsilon() -> Self {
                <$t>::EPSILON
            }
        }
    };
}

real_scalar!(f32);
real_scalar!(f64);

impl<R: RealScalar> Scalar for Complex<R> {
    const IS_COMPLEX: bool = true;

    fn sample_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Complex::new(R::lit(re * s), R::lit(im * s))
    }

    fn from_parts(re: R, im: R) -> Self {
        Complex::new(re, im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn complex_normal_has_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z = Complex::<f64>::sample_normal(&mut rng);
            acc += z.norm_sqr();
        }
        let var = acc / n as f64;
        assert!((var - 1.0).abs() < 0.03, "variance {var}");
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::count(3), 3.0);
        assert_eq!(2.5f64.as_f64(), 2.5);
    }
}
