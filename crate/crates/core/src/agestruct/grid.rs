use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform age discretization: bin `j` covers `[a0 + j*delta_a, a0 + (j+1)*delta_a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeGrid<T> {
    a0: T,
    delta_a: T,
    n_a: usize,
}

impl<T: Real> AgeGrid<T> {
    pub fn new(a0: T, delta_a: T, n_a: usize) -> Result<Self> {
        if !(delta_a > T::zero()) || !delta_a.is_finite() {
            return Err(Error::config(format!("age step must be positive, got {delta_a}")));
        }
        if n_a == 0 {
            return Err(Error::config("age grid needs at least one bin"));
        }
        if !(a0 >= T::zero()) {
            return Err(Error::config(format!("age grid must start at a nonnegative age, got {a0}")));
        }
        Ok(Self { a0, delta_a, n_a })
    }

    /// Grid over `[0, max_age]` with `n_a` bins.
    pub fn spanning(max_age: T, n_a: usize) -> Result<Self> {
        if n_a == 0 {
            return Err(Error::config("age grid needs at least one bin"));
        }
        Self::new(T::zero(), max_age / T::from_count(n_a), n_a)
    }

    pub fn a0(&self) -> T {
        self.a0
    }

    pub fn delta_a(&self) -> T {
        self.delta_a
    }

    pub fn len(&self) -> usize {
        self.n_a
    }

    pub fn is_empty(&self) -> bool {
        self.n_a == 0
    }

    /// Left edge of bin `j`.
    #[inline]
    pub fn age(&self, j: usize) -> T {
        self.a0 + self.delta_a * T::from_count(j)
    }

    pub fn upper(&self) -> T {
        self.age(self.n_a)
    }

    pub fn ages(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n_a).map(move |j| self.age(j))
    }

    /// Index of the bin boundary nearest to `age` (0..=n_a).
    pub fn nearest_boundary(&self, age: T) -> usize {
        let k = ((age - self.a0) / self.delta_a).round();
        k.max(T::zero()).to_usize().unwrap_or(0).min(self.n_a)
    }
}

/// Uniform time discretization `t_k = k * delta_t`, `0 <= k <= n_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    delta_t: T,
    n_t: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(delta_t: T, n_t: usize) -> Result<Self> {
        if !(delta_t > T::zero()) || !delta_t.is_finite() {
            return Err(Error::config(format!("time step must be positive, got {delta_t}")));
        }
        Ok(Self { delta_t, n_t })
    }

    /// Grid over `[0, horizon]` with step `delta_t`; the horizon must be a
    /// whole number of steps.
    pub fn covering(horizon: T, delta_t: T) -> Result<Self> {
        let steps = (horizon / delta_t).round();
        if ((steps * delta_t) - horizon).abs() > T::lit(1e-9) * horizon.abs().max(T::one()) {
            return Err(Error::config(format!("horizon {horizon} is not a multiple of the time step {delta_t}")));
        }
        Self::new(delta_t, steps.to_usize().unwrap_or(0))
    }

    pub fn t0(&self) -> T {
        T::zero()
    }

    pub fn delta_t(&self) -> T {
        self.delta_t
    }

    pub fn steps(&self) -> usize {
        self.n_t
    }

    #[inline]
    pub fn time(&self, k: usize) -> T {
        self.delta_t * T::from_count(k)
    }

    pub fn end(&self) -> T {
        self.time(self.n_t)
    }
}

/// Density profile `n(a_j, t)` over an age grid at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortDensity<T> {
    pub grid: AgeGrid<T>,
    pub time: T,
    pub values: Vec<T>,
}

impl<T: Real> CohortDensity<T> {
    pub fn new(grid: AgeGrid<T>, time: T, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!(
                "density has {} values for a grid of {} bins",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("non-finite density at t = {time}")));
        }
        Ok(Self { grid, time, values })
    }

    /// Population count: sum of `n_j * delta_a`.
    pub fn total(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.delta_a()
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = AgeGrid::spanning(120.0f64, 1000).unwrap();
        assert!((g.delta_a() - 0.12).abs() < 1e-15);
        assert!((g.upper() - 120.0).abs() < 1e-9);
        assert_eq!(g.nearest_boundary(1.0), 8);
        assert_eq!(g.nearest_boundary(5.0), 42);
        assert_eq!(g.nearest_boundary(500.0), 1000);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(AgeGrid::new(0.0f64, 0.0, 10).is_err());
        assert!(AgeGrid::new(0.0f64, 0.1, 0).is_err());
        assert!(TimeGrid::new(-0.1f64, 3).is_err());
        assert!(TimeGrid::covering(1.05f64, 0.1).is_err());
        assert_eq!(TimeGrid::covering(10.0f64, 0.1).unwrap().steps(), 100);
    }
}
