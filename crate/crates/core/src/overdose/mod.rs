//! Overdose-mortality specialization: addiction influx from a two-component
//! gamma rate, linear population growth, cumulative deaths and the coarse
//! age-bin measurement.

mod bins;
mod fit;
mod model;
mod params;
mod rate;

pub use bins::{coarse_grain, measure, AlignedBins, CoarseAgeBins, EdgePolicy, N_COARSE};
pub use fit::{fit_overdose, FitSettings, OverdoseFit, ParamPoint, YearPrediction};
pub use model::{build_overdose_model, OverdoseModel, OverdoseNoise, N_PARAMS};
pub use params::{
    addiction_rate, death_flux, population, rate_integral, AddictionRate, InitialProfile, OverdoseParams,
    PopulationModel, ProfileDensity, PARAM_NAMES,
};
pub use rate::{rate_of_change, GridRate, RateQuadrature};
