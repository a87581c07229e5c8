use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::Covariance;
use super::ensemble::{moments_of, Ensemble, GaussianInit};
use super::model::StateSpaceModel;
use super::rng::{member_rng, Purpose};
use super::transform::PositivityTransform;
use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig<T> {
    pub delta_t: T,
    /// Forecast steps between assimilation times.
    pub update_interval: usize,
    pub ensemble_size: usize,
    pub seed: u64,
    /// Keep the full state covariance in every [`FilterEstimate`]. Costs
    /// `O(M n^2)` per record, so it is off unless asked for.
    pub record_covariance: bool,
}

impl<T: Real> FilterConfig<T> {
    pub fn new(delta_t: T, update_interval: usize, ensemble_size: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            delta_t,
            update_interval,
            ensemble_size,
            seed,
            record_covariance: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_covariance_records(mut self, on: bool) -> Self {
        self.record_covariance = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t > T::zero()) || !self.delta_t.is_finite() {
            return Err(Error::config(format!("delta_t must be positive, got {}", self.delta_t)));
        }
        if self.update_interval < 1 {
            return Err(Error::config("update_interval must be at least 1"));
        }
        if self.ensemble_size < 2 {
            return Err(Error::config(format!("ensemble_size must be at least 2, got {}", self.ensemble_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prior,
    Posterior,
}

/// Ensemble summary in physical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterEstimate<T> {
    pub time: T,
    pub step: u64,
    pub stage: Stage,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
    pub covariance: Option<Matrix<T>>,
}

impl<T: Real> FilterEstimate<T> {
    pub fn std_dev(&self, i: usize) -> T {
        self.variance[i].sqrt()
    }
}

/// Observation vector with an optional availability mask; masked-out
/// coordinates are dropped from the update (rows of `h` and `R` removed).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub values: Vec<T>,
    pub available: Option<Vec<bool>>,
}

impl<T: Real> Observation<T> {
    pub fn full(values: Vec<T>) -> Self {
        Self {
            values,
            available: None,
        }
    }

    pub fn masked(values: Vec<T>, available: Vec<bool>) -> Result<Self> {
        if available.len() != values.len() {
            return Err(Error::config("observation mask length differs from observation length"));
        }
        Ok(Self {
            values,
            available: Some(available),
        })
    }

    pub fn active_indices(&self) -> Vec<usize> {
        match &self.available {
            None => (0..self.values.len()).collect(),
            Some(mask) => mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport<T> {
    /// Observation coordinates that took part in the update.
    pub active: Vec<usize>,
    pub predicted_mean: Vec<T>,
    /// `P_zz`, including `R`, restricted to the active coordinates.
    pub innovation_cov: Matrix<T>,
    pub jitter: T,
    /// Kalman gain (latent state x active observations), when requested.
    pub gain: Option<Matrix<T>>,
}

#[derive(Debug, Clone)]
pub struct FilterRun<T> {
    pub estimates: Vec<FilterEstimate<T>>,
    pub ensemble: Ensemble<T>,
}

/// Perturbed-observation ensemble Kalman filter bound to one model.
pub struct EnsembleKalmanFilter<'m, T, M: ?Sized> {
    model: &'m M,
    transform: PositivityTransform,
    config: FilterConfig<T>,
}

impl<'m, T, M> EnsembleKalmanFilter<'m, T, M>
where
    T: Real,
    M: StateSpaceModel<T> + ?Sized,
{
    pub fn new(model: &'m M, transform: PositivityTransform, config: FilterConfig<T>) -> Result<Self> {
        config.validate()?;
        if let Some(&i) = transform.indices().iter().find(|&&i| i >= model.state_dim()) {
            return Err(Error::config(format!(
                "positivity index {i} outside state of dimension {}",
                model.state_dim()
            )));
        }
        Ok(Self {
            model,
            transform,
            config,
        })
    }

    pub fn config(&self) -> &FilterConfig<T> {
        &self.config
    }

    pub fn transform(&self) -> &PositivityTransform {
        &self.transform
    }

    pub fn model(&self) -> &M {
        self.model
    }

    pub fn init_ensemble(&self, init: &GaussianInit<T>) -> Result<Ensemble<T>> {
        if init.mean.len() != self.model.state_dim() {
            return Err(Error::config(format!(
                "initial mean has dimension {} but the model state has {}",
                init.mean.len(),
                self.model.state_dim()
            )));
        }
        init.sample(self.config.ensemble_size, self.config.seed)
    }

    /// One Euler step `x + dt f(x, t_k) + eps` for every member.
    pub fn forecast(&self, ens: &mut Ensemble<T>) -> Result<()> {
        let n = self.model.state_dim();
        if ens.dim() != n {
            return Err(Error::config(format!("ensemble dimension {} differs from model {}", ens.dim(), n)));
        }
        let t = ens.time();
        let step = ens.step();
        let dt = self.config.delta_t;
        let q = self.model.process_noise(t);
        let noise: Option<&Covariance<T>> = if q.is_zero() { None } else { Some(&q) };
        let seed = self.config.seed;
        let transform = &self.transform;
        let model = self.model;

        let failures: Vec<usize> = ens
            .members_mut()
            .as_mut_slice()
            .par_chunks_mut(n.max(1))
            .enumerate()
            .filter_map(|(i, x)| {
                let mut phys = x.to_vec();
                transform.to_physical_in_place(&mut phys);
                let mut rate = vec![T::zero(); n];
                model.drift(&phys, t, &mut rate);
                for &j in transform.indices() {
                    rate[j] /= phys[j];
                }
                for (xj, r) in x.iter_mut().zip(&rate) {
                    *xj += dt * *r;
                }
                if let Some(q) = noise {
                    let mut rng = member_rng(seed, Purpose::Process, step, i);
                    let mut scratch = Vec::new();
                    q.add_sample(&mut rng, x, &mut scratch);
                }
                (!x.iter().all(|v| v.is_finite())).then_some(i)
            })
            .collect();
        if let Some(i) = failures.into_iter().min() {
            return Err(Error::numerical(format!(
                "forecast produced non-finite state for ensemble member {i} at t = {t}"
            )));
        }
        ens.advance_clock(dt);
        Ok(())
    }

    /// `h` of every member (physical coordinates), one row per member.
    pub fn predicted_observations(&self, ens: &Ensemble<T>) -> Matrix<T> {
        let k = self.model.obs_dim();
        let t = ens.time();
        let mut out = Matrix::zeros(ens.size(), k);
        out.as_mut_slice()
            .par_chunks_mut(k.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                let phys = self.transform.to_physical(ens.member(i));
                self.model.measure(&phys, t, row);
            });
        out
    }

    pub fn update(&self, ens: &mut Ensemble<T>, obs: &Observation<T>) -> Result<UpdateReport<T>> {
        self.update_impl(ens, obs, false)
    }

    /// As [`update`](Self::update), additionally returning the Kalman gain.
    pub fn update_with_gain(&self, ens: &mut Ensemble<T>, obs: &Observation<T>) -> Result<UpdateReport<T>> {
        self.update_impl(ens, obs, true)
    }

    fn update_impl(&self, ens: &mut Ensemble<T>, obs: &Observation<T>, want_gain: bool) -> Result<UpdateReport<T>> {
        let n = self.model.state_dim();
        let k = self.model.obs_dim();
        if obs.values.len() != k {
            return Err(Error::config(format!(
                "observation has dimension {} but the model predicts {k}",
                obs.values.len()
            )));
        }
        let active = obs.active_indices();
        if let Some(&j) = active.iter().find(|&&j| !obs.values[j].is_finite()) {
            return Err(Error::config(format!("observation coordinate {j} is not finite")));
        }
        let q = active.len();
        let m = ens.size();
        let t = ens.time();
        if q == 0 {
            return Ok(UpdateReport {
                active,
                predicted_mean: Vec::new(),
                innovation_cov: Matrix::zeros(0, 0),
                jitter: T::zero(),
                gain: want_gain.then(|| Matrix::zeros(n, 0)),
            });
        }

        let full = self.predicted_observations(ens);
        let y = Matrix::from_fn(m, q, |i, c| full[(i, active[c])]);
        if !y.is_finite() {
            return Err(Error::numerical(format!("measurement produced non-finite values at t = {t}")));
        }
        let y_mean = moments_mean(&y);
        let x_mean = ens.mean();
        let denom = T::from_count(m - 1);

        let mut pxz = Matrix::zeros(n, q);
        let mut pzz = Matrix::zeros(q, q);
        let mut dy = vec![T::zero(); q];
        for i in 0..m {
            for ((d, &yv), &ym) in dy.iter_mut().zip(y.row(i)).zip(&y_mean) {
                *d = yv - ym;
            }
            for (p, (&xp, &xm)) in ens.member(i).iter().zip(&x_mean).enumerate() {
                let dx = xp - xm;
                if dx != T::zero() {
                    for (acc, &d) in pxz.row_mut(p).iter_mut().zip(&dy) {
                        *acc += dx * d;
                    }
                }
            }
            for a in 0..q {
                let da = dy[a];
                for (acc, &db) in pzz.row_mut(a)[a..].iter_mut().zip(&dy[a..]) {
                    *acc += da * db;
                }
            }
        }
        pxz.as_mut_slice().iter_mut().for_each(|v| *v /= denom);
        for a in 0..q {
            for b in a..q {
                let v = pzz[(a, b)] / denom;
                pzz[(a, b)] = v;
                pzz[(b, a)] = v;
            }
        }
        let r = self.model.obs_noise(t);
        if r.dim() != k {
            return Err(Error::config(format!("observation noise has dimension {} but expected {k}", r.dim())));
        }
        r.add_restricted_to(&active, &mut pzz);
        let r_active = r.restrict(&active)?;
        let (chol, jitter) = Cholesky::with_jitter(&pzz)?;
        if jitter > T::zero() {
            log::warn!("innovation covariance at t = {t} needed jitter {jitter}");
        }

        let z: Vec<T> = active.iter().map(|&j| obs.values[j]).collect();
        let seed = self.config.seed;
        let step = ens.step();
        let (chol_ref, pxz_ref, y_ref) = (&chol, &pxz, &y);
        ens.members_mut()
            .as_mut_slice()
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, x)| {
                let mut rng = member_rng(seed, Purpose::Observation, step, i);
                let mut w = vec![T::zero(); q];
                r_active.sample_into(&mut rng, &mut w);
                for ((wc, &zc), &yc) in w.iter_mut().zip(&z).zip(y_ref.row(i)) {
                    *wc += zc - yc;
                }
                chol_ref.solve_in_place(&mut w);
                for (p, xp) in x.iter_mut().enumerate() {
                    *xp += dot(pxz_ref.row(p), &w);
                }
            });
        if !ens.members().is_finite() {
            return Err(Error::numerical(format!("update produced non-finite state at t = {t}")));
        }

        let gain = want_gain.then(|| {
            let mut g = pxz.clone();
            for p in 0..n {
                chol.solve_in_place(g.row_mut(p));
            }
            g
        });
        Ok(UpdateReport {
            active,
            predicted_mean: y_mean,
            innovation_cov: pzz,
            jitter,
            gain,
        })
    }

    pub fn estimate(&self, ens: &Ensemble<T>, stage: Stage) -> FilterEstimate<T> {
        let (mean, variance, covariance) = if self.config.record_covariance {
            let (mean, cov) = moments_of(&ens.physical_members(&self.transform));
            (mean, cov.diagonal(), Some(cov))
        } else {
            let (mean, var) = ens.physical_mean_and_variance(&self.transform);
            (mean, var, None)
        };
        FilterEstimate {
            time: ens.time(),
            step: ens.step(),
            stage,
            mean,
            variance,
            covariance,
        }
    }

    /// Maps observation times to step indices, rejecting times that are not
    /// assimilation instants.
    fn schedule_steps(&self, schedule: &[(T, Observation<T>)]) -> Result<BTreeMap<u64, usize>> {
        let dt = self.config.delta_t;
        let mut steps = BTreeMap::new();
        for (idx, (time, obs)) in schedule.iter().enumerate() {
            let ratio = (*time / dt).to_f64_lossy();
            let step = ratio.round();
            let misaligned = !(step >= 1.0)
                || (step - ratio).abs() > 1e-9 * ratio.abs().max(1.0)
                || (step as u64) % self.config.update_interval as u64 != 0;
            if misaligned {
                return Err(Error::config(format!(
                    "observation time {time} is not a positive multiple of delta_t * update_interval = {}",
                    dt * T::from_count(self.config.update_interval)
                )));
            }
            if obs.values.len() != self.model.obs_dim() {
                return Err(Error::config(format!(
                    "observation at time {time} has dimension {} but the model predicts {}",
                    obs.values.len(),
                    self.model.obs_dim()
                )));
            }
            if steps.insert(step as u64, idx).is_some() {
                return Err(Error::config(format!("two observations scheduled at time {time}")));
            }
        }
        Ok(steps)
    }

    /// Forecasts from `t = 0` to `horizon`, assimilating every scheduled
    /// observation. Records the initial estimate, then a prior and a
    /// posterior per step.
    pub fn run(&self, init: &GaussianInit<T>, schedule: &[(T, Observation<T>)], horizon: T) -> Result<FilterRun<T>> {
        let steps = self.schedule_steps(schedule)?;
        let n_steps = (horizon / self.config.delta_t).to_f64_lossy().round();
        if !(n_steps >= 0.0) {
            return Err(Error::config(format!("horizon must be nonnegative, got {horizon}")));
        }
        let n_steps = n_steps as u64;
        if let Some((&last, _)) = steps.iter().next_back() {
            if last > n_steps {
                return Err(Error::config(format!(
                    "observation at time {} lies beyond the horizon {horizon}",
                    schedule[steps[&last]].0
                )));
            }
        }
        let mut ens = self.init_ensemble(init)?;
        let mut estimates = Vec::with_capacity(2 * n_steps as usize + 1);
        estimates.push(self.estimate(&ens, Stage::Posterior));
        for _ in 0..n_steps {
            self.forecast(&mut ens)?;
            let prior = self.estimate(&ens, Stage::Prior);
            let posterior = match steps.get(&ens.step()) {
                Some(&idx) => {
                    self.update(&mut ens, &schedule[idx].1)?;
                    self.estimate(&ens, Stage::Posterior)
                }
                None => FilterEstimate {
                    stage: Stage::Posterior,
                    ..prior.clone()
                },
            };
            estimates.push(prior);
            estimates.push(posterior);
        }
        Ok(FilterRun {
            estimates,
            ensemble: ens,
        })
    }
}

fn moments_mean<T: Real>(y: &Matrix<T>) -> Vec<T> {
    let mut mean = vec![T::zero(); y.cols()];
    for i in 0..y.rows() {
        for (acc, &v) in mean.iter_mut().zip(y.row(i)) {
            *acc += v;
        }
    }
    let m = T::from_count(y.rows());
    mean.iter_mut().for_each(|v| *v /= m);
    mean
}

/// Runs the filter over `schedule` until `horizon`; see
/// [`EnsembleKalmanFilter::run`].
pub fn run_filter<T, M>(
    model: &M,
    init: &GaussianInit<T>,
    transform: PositivityTransform,
    schedule: &[(T, Observation<T>)],
    config: FilterConfig<T>,
    horizon: T,
) -> Result<FilterRun<T>>
where
    T: Real,
    M: StateSpaceModel<T> + ?Sized,
{
    EnsembleKalmanFilter::new(model, transform, config)?.run(init, schedule, horizon)
}
