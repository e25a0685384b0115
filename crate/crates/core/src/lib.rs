//! Riemannian geometry of symmetric positive-definite matrices, power means
//! and mean fields, spatial filters, and the covariance-based classifiers
//! built on them.
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases
//! below fix it to `f64` or `f32`.

pub mod error;
pub mod linalg;
pub mod scalar;
pub mod spd;
pub mod means;
pub mod covariance;
pub mod spatial;
pub mod classifiers;

pub use classifiers::{DecisionScore, Method, MethodConfig, Model, Prediction};
pub use error::{Error, Result};
pub use means::{MeanField, RobustConfig, SolverConfig, WarmStart, DEFAULT_H_GRID};
pub use scalar::Real;
pub use spd::SpdMatrix;
pub use spatial::SpatialFilter;

pub type Spd64 = SpdMatrix<f64>;
pub type Spd32 = SpdMatrix<f32>;
pub type MeanField64 = MeanField<f64>;
pub type MeanField32 = MeanField<f32>;
pub type Filter64 = SpatialFilter<f64>;
pub type Filter32 = SpatialFilter<f32>;
pub type Model64 = Model<f64>;
