//! Ensemble Kalman filter with perturbed observations, augmented-state
//! parameter estimation and log-space positivity transforms.

mod covariance;
mod ensemble;
mod filter;
mod model;
mod rng;
mod transform;

pub use covariance::{Covariance, NoiseShape};
pub use ensemble::{ensemble_moments, Ensemble, GaussianInit};
pub use filter::{
    run_filter, EnsembleKalmanFilter, FilterConfig, FilterEstimate, FilterRun, Observation, Stage, UpdateReport,
};
pub use model::{FnModel, StateSpaceModel};
pub use transform::PositivityTransform;
pub(crate) use rng::{member_rng, Purpose};
