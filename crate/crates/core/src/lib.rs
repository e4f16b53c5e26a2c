//! Indirect physics-constrained supervised learning.
//!
//! A sequence model predicts UCS from conventional well logs without ever
//! seeing UCS. Supervision comes from sonic logs through the rock-physics
//! chain: predictions are projected onto the affine span of the dynamic
//! Young's modulus, and the loss penalizes the distance to that projection.

pub mod data;
pub mod error;
pub mod loss;
pub mod model;
pub mod physics;
pub mod projection;
pub mod signfix;
pub mod trainer;

pub use data::{Batch, Dataset, WellRecord, WellSample};
pub use error::{Error, Result};
pub use loss::{indirect_loss, LossConfig, LossValue};
pub use model::{ModelParameters, OptimizerState};
pub use physics::{PhysicsConstants, SonicSample};
pub use projection::{build_projection, normalize, LeastSquaresSolution, ProjectionOperator};
pub use signfix::{covariance_sign, resolve_orientation, OrientationReport};
pub use trainer::{RepeatedSummary, RunReport, TrainConfig};
