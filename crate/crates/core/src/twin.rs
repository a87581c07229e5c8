//! Twin experiment: synthetic observations from the constant-rate model with
//! known `(mu, lambda)`, assimilated by a filter that starts ignorant of both.

use std::borrow::Cow;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::agestruct::{solve_simple, AgeGrid, SimpleModelParams};
use crate::enkf::{
    member_rng, Covariance, EnsembleKalmanFilter, FilterConfig, FilterEstimate, GaussianInit, NoiseShape,
    Observation, PositivityTransform, Purpose, Stage, StateSpaceModel,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Augmented state `[n(a_0), ..., n(a_{N-1}), mu, lambda]` driven by the
/// closed-form rate of change and observed directly in the density block.
pub struct SimpleAgeModel<T> {
    grid: AgeGrid<T>,
    process_noise: Covariance<T>,
    obs_noise: Covariance<T>,
}

impl<T: Real> SimpleAgeModel<T> {
    pub fn new(grid: AgeGrid<T>, process_noise: Covariance<T>, obs_noise: Covariance<T>) -> Result<Self> {
        let n = grid.len();
        if process_noise.dim() != n + 2 || obs_noise.dim() != n {
            return Err(Error::config(format!(
                "noise dimensions ({}, {}) do not match a grid of {n} ages",
                process_noise.dim(),
                obs_noise.dim()
            )));
        }
        Ok(Self {
            grid,
            process_noise,
            obs_noise,
        })
    }

    pub fn grid(&self) -> &AgeGrid<T> {
        &self.grid
    }

    pub fn mu_index(&self) -> usize {
        self.grid.len()
    }

    pub fn lambda_index(&self) -> usize {
        self.grid.len() + 1
    }
}

impl<T: Real> StateSpaceModel<T> for SimpleAgeModel<T> {
    fn state_dim(&self) -> usize {
        self.grid.len() + 2
    }

    fn obs_dim(&self) -> usize {
        self.grid.len()
    }

    fn drift(&self, x: &[T], t: T, out: &mut [T]) {
        let n = self.grid.len();
        let (mu, lambda) = (x[n], x[n + 1]);
        let decay = (-mu * t).exp();
        for (j, o) in out[..n].iter_mut().enumerate() {
            let s = self.grid.age(j) - t;
            *o = if s < T::zero() { T::zero() } else { s * (-lambda * s).exp() * decay };
        }
        out[n] = T::zero();
        out[n + 1] = T::zero();
    }

    fn measure(&self, x: &[T], _t: T, out: &mut [T]) {
        out.copy_from_slice(&x[..self.grid.len()]);
    }

    fn process_noise(&self, _t: T) -> Cow<'_, Covariance<T>> {
        Cow::Borrowed(&self.process_noise)
    }

    fn obs_noise(&self, _t: T) -> Cow<'_, Covariance<T>> {
        Cow::Borrowed(&self.obs_noise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinConfig {
    pub n_a: usize,
    pub delta_a: f64,
    pub delta_t: f64,
    pub horizon: f64,
    pub update_interval: usize,
    pub ensemble_size: usize,
    pub seed: u64,
    pub truth_mu: f64,
    pub truth_lambda: f64,
    pub process_noise: f64,
    pub process_noise_shape: NoiseShape,
    pub obs_noise: f64,
    pub init_density: f64,
    pub init_param: f64,
    pub init_density_var: f64,
    pub init_param_var: f64,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            n_a: 1000,
            delta_a: 0.12,
            delta_t: 0.1,
            horizon: 10.0,
            update_interval: 5,
            ensemble_size: 500,
            seed: 0,
            truth_mu: 0.08,
            truth_lambda: 0.2,
            process_noise: 1e-4,
            process_noise_shape: NoiseShape::Ones,
            obs_noise: 1e-4,
            init_density: 1e-5,
            init_param: 0.1,
            init_density_var: 0.5,
            init_param_var: 1.0,
        }
    }
}

impl TwinConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta_a", self.delta_a),
            ("delta_t", self.delta_t),
            ("truth_mu", self.truth_mu),
            ("truth_lambda", self.truth_lambda),
            ("obs_noise", self.obs_noise),
            ("init_param", self.init_param),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("horizon", self.horizon),
            ("process_noise", self.process_noise),
            ("init_density_var", self.init_density_var),
            ("init_param_var", self.init_param_var),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.n_a == 0 {
            return Err(Error::config("n_a must be at least 1"));
        }
        FilterConfig::new(self.delta_t, self.update_interval, self.ensemble_size, self.seed)?;
        Ok(())
    }
}

/// Posterior parameter estimate at one filter step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinPoint<T> {
    pub time: T,
    pub assimilated: bool,
    pub mu: T,
    pub mu_sd: T,
    pub lambda: T,
    pub lambda_sd: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinResult<T> {
    pub ages: Vec<T>,
    pub trajectory: Vec<TwinPoint<T>>,
    pub final_density_mean: Vec<T>,
    pub final_density_sd: Vec<T>,
    pub final_truth: Vec<T>,
}

impl<T: Real> TwinResult<T> {
    /// Whether `|estimate/truth - 1| <= tol` for every posterior at or
    /// after `from`, for the parameter picked by `select`.
    pub fn within_after(&self, from: T, truth: T, tol: T, select: impl Fn(&TwinPoint<T>) -> T) -> bool {
        self.trajectory
            .iter()
            .filter(|p| p.time >= from - T::lit(1e-9))
            .all(|p| ((select(p) - truth) / truth).abs() <= tol)
    }
}

/// Truth field sampled on `grid` at time `t`.
pub fn truth_profile<T: Real>(grid: &AgeGrid<T>, params: &SimpleModelParams<T>, t: T) -> Result<Vec<T>> {
    grid.ages().map(|a| solve_simple(params, a, t)).collect()
}

pub fn run_twin<T: Real>(cfg: &TwinConfig) -> Result<TwinResult<T>> {
    cfg.validate()?;
    let lit = T::lit;
    let n = cfg.n_a;
    let grid = AgeGrid::new(T::zero(), lit(cfg.delta_a), n)?;
    let truth = SimpleModelParams::new(lit(cfg.truth_mu), lit(cfg.truth_lambda))?;
    let model = SimpleAgeModel::new(
        grid.clone(),
        Covariance::shaped(cfg.process_noise_shape, n + 2, lit(cfg.process_noise))?,
        Covariance::scaled_identity(n, lit(cfg.obs_noise))?,
    )?;
    let transform = PositivityTransform::trailing(2, n + 2)?;
    let filter_cfg = FilterConfig::new(lit(cfg.delta_t), cfg.update_interval, cfg.ensemble_size, cfg.seed)?;

    let mut mean = vec![lit(cfg.init_density); n];
    mean.extend([lit(cfg.init_param).ln(); 2]);
    let mut var = vec![lit(cfg.init_density_var); n];
    var.extend([lit(cfg.init_param_var); 2]);
    let init = GaussianInit::new(mean, Covariance::diagonal(var)?)?;

    let n_steps = (cfg.horizon / cfg.delta_t).round() as usize;
    let mut schedule = Vec::new();
    let obs_sd = lit(cfg.obs_noise.sqrt());
    for k in (cfg.update_interval..=n_steps).step_by(cfg.update_interval) {
        let t = T::from_count(k) * lit(cfg.delta_t);
        let mut rng = member_rng(cfg.seed, Purpose::Synthetic, k as u64, 0);
        let z = truth_profile(&grid, &truth, t)?
            .into_iter()
            .map(|v| v + obs_sd * lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        schedule.push((t, Observation::full(z)));
    }

    let filter = EnsembleKalmanFilter::new(&model, transform, filter_cfg)?;
    let horizon = T::from_count(n_steps) * lit(cfg.delta_t);
    log::info!(
        "twin experiment: {} ages, {} members, {} steps, {} updates",
        n,
        cfg.ensemble_size,
        n_steps,
        schedule.len()
    );
    let run = filter.run(&init, &schedule, horizon)?;
    let point = |e: &FilterEstimate<T>, assimilated: bool| TwinPoint {
        time: e.time,
        assimilated,
        mu: e.mean[n],
        mu_sd: e.std_dev(n),
        lambda: e.mean[n + 1],
        lambda_sd: e.std_dev(n + 1),
    };
    let mut trajectory = vec![point(&run.estimates[0], false)];
    for pair in run.estimates[1..].chunks(2) {
        let step = pair[1].step as usize;
        let assimilated = step % cfg.update_interval == 0;
        debug_assert_eq!(pair[1].stage, Stage::Posterior);
        trajectory.push(point(&pair[1], assimilated));
    }
    let last = run.estimates.last().expect("initial estimate always recorded");
    Ok(TwinResult {
        ages: grid.ages().collect(),
        trajectory,
        final_density_mean: last.mean[..n].to_vec(),
        final_density_sd: (0..n).map(|j| last.std_dev(j)).collect(),
        final_truth: truth_profile(&grid, &truth, last.time)?,
    })
}
