use std::borrow::Cow;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::agestruct::AgeGrid;
use crate::enkf::{Covariance, NoiseShape, StateSpaceModel};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::bins::{coarse_grain_into, AlignedBins, CoarseAgeBins, EdgePolicy};
use super::params::{InitialProfile, OverdoseParams, PopulationModel, ProfileDensity};
use super::rate::GridRate;

/// Number of estimated parameters appended to the state.
pub const N_PARAMS: usize = 6;

/// Noise settings of the overdose filter. Variances refer to latent
/// coordinates for the parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverdoseNoise<T> {
    pub process: T,
    pub process_shape: NoiseShape,
    pub observation: T,
}

impl<T: Real> Default for OverdoseNoise<T> {
    fn default() -> Self {
        Self {
            process: T::lit(1e-4),
            process_shape: NoiseShape::Ones,
            observation: T::lit(1e-4),
        }
    }
}

/// State `[n(a_0..), D(a_0..), mu, r0, alpha1, beta1, alpha2, beta2]`;
/// observations are coarse-binned `D` divided by `obs_scale`.
#[derive(Debug, Clone)]
pub struct OverdoseModel<T> {
    grid: AgeGrid<T>,
    pop: PopulationModel<T>,
    init: InitialProfile<T>,
    profile: ProfileDensity<T>,
    bins: AlignedBins,
    obs_scale: T,
    rates: GridRate<T>,
    process_noise: Covariance<T>,
    obs_noise: Covariance<T>,
}

pub fn build_overdose_model<T: Real>(
    grid: AgeGrid<T>,
    pop: PopulationModel<T>,
    init: InitialProfile<T>,
    bins: &CoarseAgeBins,
    policy: EdgePolicy,
    noise: OverdoseNoise<T>,
) -> Result<OverdoseModel<T>> {
    OverdoseModel::new(grid, pop, init, bins.align(&grid, policy)?, noise)
}

impl<T: Real> OverdoseModel<T> {
    pub fn new(
        grid: AgeGrid<T>,
        pop: PopulationModel<T>,
        init: InitialProfile<T>,
        bins: AlignedBins,
        noise: OverdoseNoise<T>,
    ) -> Result<Self> {
        if bins.fine_len() != grid.len() {
            return Err(Error::config(format!(
                "coarse bins cover {} fine bins, grid has {}",
                bins.fine_len(),
                grid.len()
            )));
        }
        if !(noise.process >= T::zero()) || !(noise.observation > T::zero()) {
            return Err(Error::config(format!(
                "noise variances must be nonnegative (process) and positive (observation), got {} and {}",
                noise.process, noise.observation
            )));
        }
        let dim = 2 * grid.len() + N_PARAMS;
        Ok(Self {
            profile: init.density()?,
            rates: GridRate::new(&grid)?,
            process_noise: Covariance::shaped(noise.process_shape, dim, noise.process)?,
            obs_noise: Covariance::scaled_identity(bins.len(), noise.observation)?,
            grid,
            pop,
            init,
            bins,
            obs_scale: T::lit(1e3),
        })
    }

    pub fn grid(&self) -> &AgeGrid<T> {
        &self.grid
    }

    pub fn population(&self) -> &PopulationModel<T> {
        &self.pop
    }

    pub fn initial_profile(&self) -> &InitialProfile<T> {
        &self.init
    }

    pub fn bins(&self) -> &AlignedBins {
        &self.bins
    }

    pub fn obs_scale(&self) -> T {
        self.obs_scale
    }

    pub fn density_range(&self) -> Range<usize> {
        0..self.grid.len()
    }

    pub fn deaths_range(&self) -> Range<usize> {
        self.grid.len()..2 * self.grid.len()
    }

    pub fn param_range(&self) -> Range<usize> {
        2 * self.grid.len()..2 * self.grid.len() + N_PARAMS
    }

    /// Noise-free initial state: `n = rho` on the grid, no deaths.
    pub fn initial_state(&self, params: &OverdoseParams<T>) -> Vec<T> {
        let mut x = vec![T::zero(); self.state_dim()];
        for (j, v) in x[self.density_range()].iter_mut().enumerate() {
            *v = self.profile.rho(self.grid.age(j), self.pop.n0);
        }
        x[self.param_range()].copy_from_slice(&params.to_array());
        x
    }

    /// `dn/dt` on the whole grid.
    pub fn density_rate(&self, params: &OverdoseParams<T>, t: T, out: &mut [T]) -> Result<()> {
        self.rates.evaluate(params, &self.pop, &self.profile, t, out)
    }
}

impl<T: Real> StateSpaceModel<T> for OverdoseModel<T> {
    fn state_dim(&self) -> usize {
        2 * self.grid.len() + N_PARAMS
    }

    fn obs_dim(&self) -> usize {
        self.bins.len()
    }

    fn drift(&self, x: &[T], t: T, out: &mut [T]) {
        let n_a = self.grid.len();
        let (rate_n, rest) = out.split_at_mut(n_a);
        let (rate_d, rate_p) = rest.split_at_mut(n_a);
        rate_p.iter_mut().for_each(|v| *v = T::zero());
        let evaluated = OverdoseParams::from_slice(&x[self.param_range()])
            .and_then(|p| self.density_rate(&p, t, rate_n).map(|_| p));
        match evaluated {
            Ok(p) => {
                let scale = p.mu * self.grid.delta_a();
                for (d, &n) in rate_d.iter_mut().zip(&x[..n_a]) {
                    *d = scale * n;
                }
            }
            // The filter reports non-finite drifts with the member index.
            Err(_) => out.iter_mut().for_each(|v| *v = T::nan()),
        }
    }

    fn measure(&self, x: &[T], _t: T, out: &mut [T]) {
        coarse_grain_into(&x[self.deaths_range()], &self.bins, out);
        out.iter_mut().for_each(|v| *v /= self.obs_scale);
    }

    fn process_noise(&self, _t: T) -> Cow<'_, Covariance<T>> {
        Cow::Borrowed(&self.process_noise)
    }

    fn obs_noise(&self, _t: T) -> Cow<'_, Covariance<T>> {
        Cow::Borrowed(&self.obs_noise)
    }
}
