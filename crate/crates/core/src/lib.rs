//! Predicts how often raycast selections land on a VR target, from the
//! target's apparent angular size.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`] maps angular width to a bivariate Gaussian endpoint distribution.
//! * [`geometry`] turns camera poses and world-space targets into angles.
//! * [`integrator`] integrates the distribution over target regions.
//! * [`fitting`] rebuilds model constants from raw pointing trials and
//!   scores models against observed success rates.
//! * [`scene`] reads scene documents and produces estimation reports.
//! * [`synth`] generates synthetic trial data from known constants.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fitting;
pub mod geometry;
pub mod integrator;
pub mod model;
pub mod scene;
pub mod synth;

pub use geometry::{AngularExtent, CameraPose, GeometryError, Rect, Sphere, TargetShape, Vec3};
pub use integrator::{
    evaluate_disc, evaluate_rect, evaluate_shape, inverse_width, sr_circle, sr_monte_carlo, sr_rect, EvalOptions,
    Evaluation, IntegrationError, InverseError, InverseSolution, Method, Region, ShapeKind, SuccessRate,
};
pub use model::{
    AmplitudeConstants, DistributionParams, ModelConstants, ModelError, ModelSpec, ModelVariant, OffsetMode,
    Prediction, ValidityRange, Warning,
};
