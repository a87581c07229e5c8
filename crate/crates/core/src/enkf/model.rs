use std::borrow::Cow;

use super::covariance::Covariance;
use crate::scalar::Real;

/// Continuous-time state-space model
///
/// ```text
/// dx/dt = f(x, t) + w,   w ~ N(0, Q(t))
/// z     = h(x, t) + v,   v ~ N(0, R(t))
/// ```
///
/// `drift` and `measure` receive the state in physical coordinates: the
/// filter exponentiates log-stored coordinates before calling them.
pub trait StateSpaceModel<T: Real>: Sync {
    fn state_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    /// Writes `f(x, t)` into `out` (length `state_dim`).
    fn drift(&self, x: &[T], t: T, out: &mut [T]);

    /// Writes `h(x, t)` into `out` (length `obs_dim`).
    fn measure(&self, x: &[T], t: T, out: &mut [T]);

    fn process_noise(&self, t: T) -> Cow<'_, Covariance<T>>;

    fn obs_noise(&self, t: T) -> Cow<'_, Covariance<T>>;
}

/// A [`StateSpaceModel`] assembled from closures and fixed noise levels.
pub struct FnModel<T, F, H> {
    state_dim: usize,
    obs_dim: usize,
    drift: F,
    measure: H,
    process_noise: Covariance<T>,
    obs_noise: Covariance<T>,
}

impl<T, F, H> FnModel<T, F, H>
where
    T: Real,
    F: Fn(&[T], T, &mut [T]) + Sync,
    H: Fn(&[T], T, &mut [T]) + Sync,
{
    pub fn new(drift: F, measure: H, process_noise: Covariance<T>, obs_noise: Covariance<T>) -> Self {
        Self {
            state_dim: process_noise.dim(),
            obs_dim: obs_noise.dim(),
            drift,
            measure,
            process_noise,
            obs_noise,
        }
    }

    pub fn with_obs_noise(mut self, obs_noise: Covariance<T>) -> Self {
        assert_eq!(obs_noise.dim(), self.obs_dim, "observation dimension is fixed");
        self.obs_noise = obs_noise;
        self
    }
}

impl<T, F, H> StateSpaceModel<T> for FnModel<T, F, H>
where
    T: Real,
    F: Fn(&[T], T, &mut [T]) + Sync,
    H: Fn(&[T], T, &mut [T]) + Sync,
{
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn drift(&self, x: &[T], t: T, out: &mut [T]) {
        (self.drift)(x, t, out)
    }

    fn measure(&self, x: &[T], t: T, out: &mut [T]) {
        (self.measure)(x, t, out)
    }

    fn process_noise(&self, _t: T) -> Cow<'_, Covariance<T>> {
        Cow::Borrowed(&self.process_noise)
    }

    fn obs_noise(&self, _t: T) -> Cow<'_, Covariance<T>> {
        Cow::Borrowed(&self.obs_noise)
    }
}
