//! Explicit first-order upwind discretization of the transport equation,
//! kept as an independent check on the closed-form solutions.

use super::general::BoundaryData;
use super::grid::{AgeGrid, CohortDensity, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lazily advances the upwind scheme, yielding the profile at every time
/// level `t_0, ..., t_{n_t}`.
pub struct UpwindSolver<T, M, P> {
    grid: AgeGrid<T>,
    times: TimeGrid<T>,
    mu_fn: M,
    p_fn: P,
    current: Vec<T>,
    scratch: Vec<T>,
    step: usize,
    finished: bool,
}

impl<T, M, P> UpwindSolver<T, M, P>
where
    T: Real,
    M: Fn(T, T) -> T,
    P: Fn(T, T) -> T,
{
    pub fn new(boundary: &BoundaryData<T>, mu_fn: M, p_fn: P, grid: AgeGrid<T>, times: TimeGrid<T>) -> Result<Self> {
        let courant = times.delta_t() / grid.delta_a();
        if courant > T::one() + T::lit(1e-12) {
            return Err(Error::config(format!(
                "upwind scheme violates CFL: delta_t = {} > delta_a = {}",
                times.delta_t(),
                grid.delta_a()
            )));
        }
        if grid.a0() != T::zero() {
            return Err(Error::config("upwind reference needs an age grid starting at 0"));
        }
        let mut current: Vec<T> = grid.ages().map(|a| boundary.rho(a)).collect();
        current[0] = boundary.age_zero_influx(T::zero());
        Ok(Self {
            scratch: vec![T::zero(); current.len()],
            current,
            grid,
            times,
            mu_fn,
            p_fn,
            step: 0,
            finished: false,
        })
    }

    fn advance(&mut self) {
        let dt = self.times.delta_t();
        let courant = dt / self.grid.delta_a();
        let t = self.times.time(self.step);
        let n = &self.current;
        self.scratch[0] = T::zero();
        for j in 1..n.len() {
            let a = self.grid.age(j);
            self.scratch[j] = n[j] - courant * (n[j] - n[j - 1]) - dt * (self.mu_fn)(a, t) * n[j] + dt * (self.p_fn)(a, t);
        }
        std::mem::swap(&mut self.current, &mut self.scratch);
        self.step += 1;
    }
}

impl<T, M, P> Iterator for UpwindSolver<T, M, P>
where
    T: Real,
    M: Fn(T, T) -> T,
    P: Fn(T, T) -> T,
{
    type Item = CohortDensity<T>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        let out = CohortDensity {
            grid: self.grid,
            time: self.times.time(self.step),
            values: self.current.clone(),
        };
        if self.step == self.times.steps() {
            self.finished = true;
        } else {
            self.advance();
        }
        Some(out)
    }
}

/// Runs the upwind scheme and collects all `n_t + 1` profiles.
pub fn upwind_reference<T, M, P>(
    boundary: &BoundaryData<T>,
    mu_fn: M,
    p_fn: P,
    grid: AgeGrid<T>,
    times: TimeGrid<T>,
) -> Result<Vec<CohortDensity<T>>>
where
    T: Real,
    M: Fn(T, T) -> T,
    P: Fn(T, T) -> T,
{
    let out: Vec<_> = UpwindSolver::new(boundary, mu_fn, p_fn, grid, times)?.collect();
    if out.iter().any(|c| c.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::numerical("upwind scheme produced non-finite densities"));
    }
    Ok(out)
}
