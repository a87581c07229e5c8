use log::{debug, info};

use crate::agestruct::AgeGrid;
use crate::dataio::ObservationBatch;
use crate::enkf::{
    Covariance, Ensemble, EnsembleKalmanFilter, FilterConfig, GaussianInit, Observation, PositivityTransform,
    StateSpaceModel,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

use super::bins::{CoarseAgeBins, EdgePolicy};
use super::model::{build_overdose_model, OverdoseModel, OverdoseNoise, N_PARAMS};
use super::params::{InitialProfile, OverdoseParams, PopulationModel};

/// Settings of an assimilation run over annual death counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings<T> {
    pub n_a: usize,
    pub delta_a: T,
    pub delta_t: T,
    pub ensemble_size: usize,
    pub seed: u64,
    /// Calendar year at `t = 0`.
    pub start_year: i32,
    pub initial_params: OverdoseParams<T>,
    /// Initial covariance shared by all state coordinates.
    pub init_common_var: T,
    /// Initial variance of each (log) parameter.
    pub init_param_var: T,
    pub noise: OverdoseNoise<T>,
    pub population: PopulationModel<T>,
    pub profile: InitialProfile<T>,
    pub edge_policy: EdgePolicy,
    /// Years predicted without updates after the last observation.
    pub forecast_years: usize,
}

impl<T: Real> Default for FitSettings<T> {
    fn default() -> Self {
        Self {
            n_a: 1000,
            delta_a: T::lit(0.12),
            delta_t: T::lit(0.1),
            ensemble_size: 10_000,
            seed: 0,
            start_year: 1998,
            initial_params: OverdoseParams::initial_guess(),
            init_common_var: T::lit(1e-4),
            init_param_var: T::lit(1e-2),
            noise: OverdoseNoise::default(),
            population: PopulationModel::us(),
            profile: InitialProfile::default(),
            edge_policy: EdgePolicy::Snap,
            forecast_years: 3,
        }
    }
}

impl<T: Real> FitSettings<T> {
    /// Filter steps per calendar year.
    pub fn steps_per_year(&self) -> Result<usize> {
        let k = (T::one() / self.delta_t).round();
        if !(self.delta_t > T::zero()) || (k * self.delta_t - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::config(format!("delta_t = {} does not divide one year", self.delta_t)));
        }
        Ok(k.to_f64_lossy() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps_per_year()?;
        self.initial_params.validate()?;
        self.profile.validate()?;
        if !(self.init_common_var >= T::zero()) || !(self.init_param_var >= self.init_common_var) {
            return Err(Error::config(format!(
                "initial variances must satisfy 0 <= common ({}) <= parameter ({})",
                self.init_common_var, self.init_param_var
            )));
        }
        if self.ensemble_size < 2 {
            return Err(Error::config(format!("ensemble needs at least 2 members, got {}", self.ensemble_size)));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<OverdoseModel<T>> {
        build_overdose_model(
            AgeGrid::new(T::zero(), self.delta_a, self.n_a)?,
            self.population,
            self.profile,
            &CoarseAgeBins::default(),
            self.edge_policy,
            self.noise,
        )
    }
}

/// Deaths predicted for one calendar year from information up to its start.
/// Units are persons; `mean` is clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct YearPrediction<T> {
    pub year: i32,
    pub time: T,
    pub mean: Vec<T>,
    /// Ensemble spread of the predicted counts.
    pub spread: Vec<T>,
    /// Predictive standard deviation: spread and observation noise combined.
    pub sd: Vec<T>,
    pub observed: Option<Vec<Option<u64>>>,
}

/// Physical parameter mean and standard deviation after a filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint<T> {
    pub time: T,
    pub mean: [T; N_PARAMS],
    pub sd: [T; N_PARAMS],
}

#[derive(Debug, Clone)]
pub struct OverdoseFit<T> {
    /// One-year-ahead predictions for every assimilated year.
    pub predictions: Vec<YearPrediction<T>>,
    /// Pure forecasts for the years after the last observation.
    pub forecasts: Vec<YearPrediction<T>>,
    /// Parameter estimates at `t = 0` and after every step.
    pub parameters: Vec<ParamPoint<T>>,
    pub ensemble: Ensemble<T>,
    /// Coarse edges moved onto the fine grid, as `(requested, used)`.
    pub moved_edges: Vec<(f64, f64)>,
    /// Predicted bin means that came out negative and were reported as 0.
    pub clamped: usize,
}

/// Assimilates consecutive years of counts. Year `Y` becomes available at
/// `t = Y + 1 - start_year`; cumulative deaths are reset to zero at every
/// year boundary, so the measurement is the count within the past year.
pub fn fit_overdose<T: Real>(settings: &FitSettings<T>, observations: &[ObservationBatch]) -> Result<OverdoseFit<T>> {
    settings.validate()?;
    let mut obs: Vec<&ObservationBatch> = observations.iter().collect();
    obs.sort_by_key(|b| b.year);
    check_years(settings.start_year, &obs)?;

    let model = settings.build_model()?;
    let dim = model.state_dim();
    let per_year = settings.steps_per_year()?;
    let transform = PositivityTransform::trailing(N_PARAMS, dim)?;
    let config = FilterConfig::new(settings.delta_t, per_year, settings.ensemble_size, settings.seed)?;
    let filter = EnsembleKalmanFilter::new(&model, transform, config)?;

    let mean = filter.transform().to_latent(&model.initial_state(&settings.initial_params))?;
    let mut diag = vec![T::zero(); dim];
    for d in &mut diag[model.param_range()] {
        *d = settings.init_param_var - settings.init_common_var;
    }
    let init = GaussianInit::new(mean, Covariance::ones_plus_diagonal(settings.init_common_var, diag)?)?;
    let mut ens = filter.init_ensemble(&init)?;

    let last_year = obs.last().map_or(settings.start_year, |b| b.year);
    let years = (last_year + 1 - settings.start_year) as usize + settings.forecast_years;
    let scale = model.obs_scale();
    let r_var = model.obs_noise(T::zero()).entry(0, 0);

    let mut out = OverdoseFit {
        predictions: Vec::new(),
        forecasts: Vec::new(),
        parameters: vec![param_point(&ens, &model)],
        ensemble: ens.clone(),
        moved_edges: model.bins().moved_edges(),
        clamped: 0,
    };
    let mut next_obs = obs.iter().peekable();
    for k in 1..=years {
        for _ in 0..per_year - 1 {
            filter.forecast(&mut ens)?;
            out.parameters.push(param_point(&ens, &model));
        }
        filter.forecast(&mut ens)?;
        let year = settings.start_year + k as i32 - 1;
        let batch = next_obs.next_if(|b| b.year == year);

        if year > settings.start_year {
            let y = filter.predicted_observations(&ens);
            let mut pred = predict(&y, year, ens.time(), scale, r_var, &mut out.clamped);
            match batch {
                Some(b) => {
                    pred.observed = Some(b.deaths.clone());
                    let values = b
                        .deaths
                        .iter()
                        .map(|d| d.map_or(T::zero(), |v| T::lit(v as f64) / scale))
                        .collect();
                    let report = filter.update(&mut ens, &Observation::masked(values, b.available())?)?;
                    debug!("{year}: assimilated {} bins, jitter {}", report.active.len(), report.jitter);
                    out.predictions.push(pred);
                }
                None => out.forecasts.push(pred),
            }
        }
        reset_deaths(&mut ens, &model);
        out.parameters.push(param_point(&ens, &model));
        info!("t = {}: through {year}", ens.time());
    }
    out.ensemble = ens;
    Ok(out)
}

fn check_years(start_year: i32, obs: &[&ObservationBatch]) -> Result<()> {
    let Some(first) = obs.first() else {
        return Err(Error::config("no observation years supplied"));
    };
    if first.year <= start_year {
        return Err(Error::config(format!(
            "observations must start after {start_year}, found {}",
            first.year
        )));
    }
    let mut gaps = Vec::new();
    let mut expected = start_year + 1;
    for b in obs {
        if b.year < expected {
            return Err(Error::config(format!("year {} appears twice", b.year)));
        }
        gaps.extend(expected..b.year);
        expected = b.year + 1;
    }
    if !gaps.is_empty() {
        let list: Vec<String> = gaps.iter().map(i32::to_string).collect();
        return Err(Error::config(format!("observation years missing: {}", list.join(", "))));
    }
    Ok(())
}

fn predict<T: Real>(y: &Matrix<T>, year: i32, time: T, scale: T, r_var: T, clamped: &mut usize) -> YearPrediction<T> {
    let m = T::from_count(y.rows());
    let k = y.cols();
    let mut mean = vec![T::zero(); k];
    for i in 0..y.rows() {
        for (acc, &v) in mean.iter_mut().zip(y.row(i)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut var = vec![T::zero(); k];
    for i in 0..y.rows() {
        for ((acc, &v), &mu) in var.iter_mut().zip(y.row(i)).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= m - T::one());
    let spread = var.iter().map(|v| v.sqrt() * scale).collect();
    let sd = var.iter().map(|v| (*v + r_var).sqrt() * scale).collect();
    let mean = mean
        .iter()
        .map(|&v| {
            if v < T::zero() {
                *clamped += 1;
                T::zero()
            } else {
                v * scale
            }
        })
        .collect();
    YearPrediction {
        year,
        time,
        mean,
        spread,
        sd,
        observed: None,
    }
}

fn reset_deaths<T: Real>(ens: &mut Ensemble<T>, model: &OverdoseModel<T>) {
    let dim = ens.dim();
    let range = model.deaths_range();
    for row in ens.members_mut().as_mut_slice().chunks_mut(dim) {
        row[range.clone()].iter_mut().for_each(|v| *v = T::zero());
    }
}

fn param_point<T: Real>(ens: &Ensemble<T>, model: &OverdoseModel<T>) -> ParamPoint<T> {
    let range = model.param_range();
    let m = T::from_count(ens.size());
    let mut mean = [T::zero(); N_PARAMS];
    let mut sq = [T::zero(); N_PARAMS];
    for i in 0..ens.size() {
        for (p, &z) in ens.member(i)[range.clone()].iter().enumerate() {
            mean[p] += z.exp();
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    for i in 0..ens.size() {
        for (p, &z) in ens.member(i)[range.clone()].iter().enumerate() {
            let d = z.exp() - mean[p];
            sq[p] += d * d;
        }
    }
    let sd = sq.map(|s| (s / (m - T::one())).sqrt());
    ParamPoint {
        time: ens.time(),
        mean,
        sd,
    }
}
