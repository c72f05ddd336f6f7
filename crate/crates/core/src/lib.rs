//! Storage-optimal conditional gradient for low-rank matrix optimization.
//!
//! [`solver::SketchyCgm`] minimizes `f(A X)` over a Schatten-1 ball or a
//! trace-bounded psd cone while storing only the `d` measurements `z = A X`
//! and a two-sided randomized [`sketch::Sketch`] of `X`. The operator `A` is
//! touched only through the three primitives of
//! [`operators::MeasurementOperator`].
//!
//! ```
//! use sketchy_cgm::prelude::*;
//! use nalgebra::DVector;
//!
//! // 2x2 matrix with three observed entries
//! let op = EntrySampling::new(2, 2, vec![(0, 0), (1, 0), (1, 1)]).unwrap();
//! let loss = Loss::gauss(DVector::from_vec(vec![1.0, 0.5, 1.0]), Normalization::Mean).unwrap();
//! let spec = ProblemSpec::<f64, _>::new(op, loss, 2.0, Template::Schatten1)
//!     .rank(1)
//!     .eps(1e-3)
//!     .max_iters(50_000);
//! let solution = solve(spec).unwrap();
//! assert!(solution.gap <= 1e-3);
//! ```

pub mod error;
pub mod ledger;
pub mod linalg;
pub mod losses;
pub mod operators;
pub mod probgen;
pub mod reference;
pub mod scalar;
pub mod sketch;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

use num_complex::Complex;

pub type Sketch32 = sketch::Sketch<f32>;
pub type Sketch64 = sketch::Sketch<f64>;
pub type ComplexSketch64 = sketch::Sketch<Complex<f64>>;
pub type Factored64 = sketch::FactoredMatrix<f64>;
pub type ComplexFactored64 = sketch::FactoredMatrix<Complex<f64>>;
/// Coded diffraction phase retrieval operator in double precision.
pub type CodedDiffraction64 = operators::Lifted<operators::CodedDiffraction<f64>>;
pub type Ptychography64 = operators::Lifted<operators::PtychographyBandpass<f64>>;
/// Matrix completion solver over `f64`.
pub type CompletionSolver64 = solver::SketchyCgm<f64, operators::EntrySampling>;
pub type PhaseSolver64 = solver::SketchyCgm<Complex<f64>, CodedDiffraction64>;

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::ledger::{AllocationLedger, Category};
    pub use crate::losses::{Loss, LossKind, Normalization};
    pub use crate::operators::{
        build_coded_diffraction, psd_measure, CodedDiffraction, EntrySampling, Lifted, MeasurementOperator,
        PtychographyBandpass,
    };
    pub use crate::scalar::{Real, RealScalar, Scalar};
    pub use crate::sketch::{FactoredMatrix, Sketch};
    pub use crate::solver::{solve, ProblemSpec, SketchyCgm, Solution, Status, Template, Variant};
    pub use crate::spectral::SpectralConfig;
}
