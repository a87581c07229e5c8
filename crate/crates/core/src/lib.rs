//! Age-structured mortality models, a generic ensemble Kalman filter and the
//! overdose-mortality specialization built from them.
//!
//! Numerical code is generic over [`Real`]; [`double`] and [`single`] name
//! the common instantiations.

pub mod agestruct;
pub mod dataio;
pub mod enkf;
pub mod error;
pub mod linalg;
pub mod overdose;
pub mod quad;
pub mod scalar;
pub mod special;
pub mod twin;

pub use error::{Error, Result};
pub use scalar::Real;

macro_rules! aliases {
    ($t:ty) => {
        pub type AgeGrid = crate::agestruct::AgeGrid<$t>;
        pub type SimpleModelParams = crate::agestruct::SimpleModelParams<$t>;
        pub type Covariance = crate::enkf::Covariance<$t>;
        pub type Ensemble = crate::enkf::Ensemble<$t>;
        pub type Matrix = crate::linalg::Matrix<$t>;
        pub type OverdoseParams = crate::overdose::OverdoseParams<$t>;
        pub type OverdoseModel = crate::overdose::OverdoseModel<$t>;
        pub type FitSettings = crate::overdose::FitSettings<$t>;
        pub type OverdoseFit = crate::overdose::OverdoseFit<$t>;
        pub type TwinResult = crate::twin::TwinResult<$t>;
    };
}

/// `f64` instantiations.
pub mod double {
    aliases!(f64);
}

/// `f32` instantiations.
pub mod single {
    aliases!(f32);
}
