//! Formal solution of the general model by quadrature along characteristics.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{settled, QuadOptions};
use crate::scalar::Real;

/// Initial age profile `rho(a)`. The age-zero boundary is always empty.
#[derive(Clone)]
pub struct BoundaryData<T> {
    rho: Arc<dyn Fn(T) -> T + Send + Sync>,
}

impl<T: Real> BoundaryData<T> {
    pub fn new(rho: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self { rho: Arc::new(rho) }
    }

    /// `rho = 0`.
    pub fn empty() -> Self {
        Self::new(|_| T::zero())
    }

    #[inline]
    pub fn rho(&self, a: T) -> T {
        (self.rho)(a)
    }

    /// Influx at age zero; fixed to zero.
    pub fn age_zero_influx(&self, _t: T) -> T {
        T::zero()
    }
}

impl<T> fmt::Debug for BoundaryData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData { rho: <fn>, g: 0 }")
    }
}

/// One quadrature pass along a characteristic of length `len` starting at
/// `(age0, time0)`, with `panels` Simpson panels for the outer integral and
/// a cumulative Simpson rule for the exponent.
fn characteristic_pass<T, M, P>(mu_fn: &M, p_fn: &P, age0: T, time0: T, len: T, panels: usize) -> (T, T)
where
    T: Real,
    M: Fn(T, T) -> T,
    P: Fn(T, T) -> T,
{
    let h = len / T::from_count(panels);
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let at = |s: T| (age0 + s, time0 + s);

    // cumulative death exponent at the nodes
    let mut cum = Vec::with_capacity(panels + 1);
    cum.push(T::zero());
    let (a, t) = at(T::zero());
    let mut mu_left = mu_fn(a, t);
    for k in 0..panels {
        let s = h * T::from_count(k);
        let (am, tm) = at(s + half);
        let (ar, tr) = at(s + h);
        let mu_mid = mu_fn(am, tm);
        let mu_right = mu_fn(ar, tr);
        let next = cum[k] + sixth * (mu_left + T::lit(4.0) * mu_mid + mu_right);
        cum.push(next);
        mu_left = mu_right;
    }
    let total = cum[panels];

    let mut odd = T::zero();
    let mut even = T::zero();
    let mut ends = T::zero();
    for (k, &c) in cum.iter().enumerate() {
        let (a, t) = at(h * T::from_count(k));
        let v = p_fn(a, t) * (c - total).exp();
        if k == 0 || k == panels {
            ends += v;
        } else if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    let influx = (ends + T::lit(4.0) * odd + T::lit(2.0) * even) * h / T::lit(3.0);
    (total, influx)
}

/// Density `n(a, t)` of the general model with `t0 = 0`, given the death
/// rate `mu_fn(age, time)` and influx `p_fn(age, time)`.
///
/// Uses the `a >= t` branch (characteristic starting on the initial profile)
/// or the `a < t` branch (characteristic starting on the empty age-zero
/// boundary). Panel counts start at `opts.initial_panels` and double until
/// successive values agree to `opts.rel_tol`.
pub fn solve_general<T, M, P>(
    boundary: &BoundaryData<T>,
    mu_fn: M,
    p_fn: P,
    a: T,
    t: T,
    opts: &QuadOptions,
) -> Result<T>
where
    T: Real,
    M: Fn(T, T) -> T,
    P: Fn(T, T) -> T,
{
    if !(a >= T::zero()) || !(t >= T::zero()) {
        return Err(Error::domain(format!("solve_general needs a, t >= 0, got ({a}, {t})")));
    }
    let from_initial = a >= t;
    let (age0, time0, len) = if from_initial {
        (a - t, T::zero(), t)
    } else {
        (T::zero(), t - a, a)
    };
    let rho = if from_initial { boundary.rho(age0) } else { T::zero() };
    if len == T::zero() {
        return Ok(rho);
    }

    let evaluate = |panels: usize| {
        let (exponent, influx) = characteristic_pass(&mu_fn, &p_fn, age0, time0, len, panels);
        rho * (-exponent).exp() + influx
    };
    let mut panels = opts.first_panels();
    let mut prev = evaluate(panels);
    if !prev.is_finite() {
        return Err(Error::numerical(format!("non-finite value along the characteristic through ({a}, {t})")));
    }
    for _ in 0..opts.max_doublings {
        panels *= 2;
        let next = evaluate(panels);
        if settled(prev, next, opts.rel_tol) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::numerical(format!(
        "characteristic quadrature at (a = {a}, t = {t}) did not converge to {} with {panels} panels",
        opts.rel_tol
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agestruct::simple::{solve_simple, steady_state, SimpleModelParams};
    use approx::assert_relative_eq;

    #[test]
    fn empty_system_stays_empty() {
        let b = BoundaryData::<f64>::empty();
        for &(a, t) in &[(0.0, 0.0), (3.0, 1.0), (1.0, 3.0)] {
            let v = solve_general(&b, |_, _| 0.1, |_, _| 0.0, a, t, &QuadOptions::default()).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn pure_decay_of_initial_profile() {
        let b = BoundaryData::new(|a: f64| (-a).exp());
        let v = solve_general(&b, |_, _| 0.1, |_, _| 0.0, 3.0, 2.0, &QuadOptions::default()).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp() * (-0.2f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn reproduces_simple_closed_form() {
        let p = SimpleModelParams::new(0.08, 0.2).unwrap();
        let b = BoundaryData::empty();
        for &(a, t) in &[(10.0, 3.0), (3.0, 10.0), (40.0, 7.5), (0.5, 0.25), (7.0, 7.0)] {
            let v = solve_general(&b, |_, _| 0.08, |a: f64, _| a * (-0.2 * a).exp(), a, t, &QuadOptions::default())
                .unwrap();
            let exact = solve_simple(&p, a, t).unwrap();
            assert!((v - exact).abs() <= 1e-8 * exact.abs().max(1.0), "({a},{t}): {v} vs {exact}");
        }
    }

    #[test]
    fn equal_rates_match_quadrature() {
        let p = SimpleModelParams::new(0.1, 0.1).unwrap();
        let b = BoundaryData::empty();
        for &(a, t) in &[(5.0, 2.0), (2.0, 5.0)] {
            let v = solve_general(&b, |_, _| 0.1, |a: f64, _| a * (-0.1 * a).exp(), a, t, &QuadOptions::default())
                .unwrap();
            assert_relative_eq!(v, solve_simple(&p, a, t).unwrap(), max_relative = 1e-8);
        }
    }

    #[test]
    fn steady_state_is_large_time_limit() {
        let p = SimpleModelParams::new(0.08, 0.2).unwrap();
        let b = BoundaryData::empty();
        let v = solve_general(&b, |_, _| 0.08, |a: f64, _| a * (-0.2 * a).exp(), 10.0, 1e3, &QuadOptions::default())
            .unwrap();
        assert_relative_eq!(v, steady_state(10.0, &p).unwrap(), max_relative = 1e-8);
    }

    #[test]
    fn rejects_negative_arguments() {
        let b = BoundaryData::<f64>::empty();
        assert!(solve_general(&b, |_, _| 0.0, |_, _| 0.0, -1.0, 1.0, &QuadOptions::default()).is_err());
    }
}
