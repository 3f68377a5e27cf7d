//! Structure-preserving time stepping for the Willmore and Helfrich flows of
//! closed planar polygons.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common double-precision instantiations.

// Guards are written as `!(x > 0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod error;
pub mod geometry;
pub mod gradients;
pub mod point;
pub mod scalar;
pub mod schemes;
pub mod shapes;
pub mod solver;

pub use driver::{FlowKind, RunConfig, StepDiagnostics, Termination, TimeSeries};
pub use error::{FlowError, Result};
pub use geometry::{FlowParams, Functionals, PolygonalCurve, SecondDiffScale};
pub use point::Point2;
pub use scalar::Scalar;

pub type Curve = PolygonalCurve<f64>;
pub type CurveF32 = PolygonalCurve<f32>;
pub type Params = FlowParams<f64>;
pub type Config = RunConfig<f64>;
pub type Series = TimeSeries<f64>;
pub type Vec2 = Point2<f64>;
