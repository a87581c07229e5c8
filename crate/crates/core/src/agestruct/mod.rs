//! Age-structured mortality model: transport in age and time with an
//! age/time dependent death rate and an external influx, no births.

mod general;
mod grid;
mod simple;
mod upwind;

pub use general::{solve_general, BoundaryData};
pub use grid::{AgeGrid, CohortDensity, TimeGrid};
pub use simple::{
    influx_simple, peak_age, settled_branch, simple_rate_of_change, solve_simple, steady_state, transient_branch,
    SimpleModelParams,
};
pub use upwind::{upwind_reference, UpwindSolver};

pub use crate::special::{gamma_pdf, upper_incomplete_gamma};
