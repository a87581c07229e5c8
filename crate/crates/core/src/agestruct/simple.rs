//! Constant death rate with influx `p(a) = a e^{-lambda a}` and an empty
//! initial population: the closed-form solution, its peak trajectory and
//! steady state.
//!
//! The textbook expressions divide by `(lambda - mu)^2` and subtract nearly
//! equal exponentials. Everything here is written through
//!
//! ```text
//! xi(x)  = (1 - e^{-x}) / x
//! psi(x) = (1 - e^{-x} - x) / x^2
//! ```
//!
//! with `x = (lambda - mu) * t`, which are smooth through `x = 0`. For
//! `a >= t`
//!
//! ```text
//! n(a, t) = e^{-lambda (a - t) - mu t} * t * (a xi(x) + t psi(x))
//! ```
//!
//! and for `a < t` the same expression with `t` replaced by `a`. The
//! `lambda = mu` limit therefore needs no special branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleModelParams<T> {
    pub mu: T,
    pub lambda: T,
}

impl<T: Real> SimpleModelParams<T> {
    pub fn new(mu: T, lambda: T) -> Result<Self> {
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::domain(format!("death rate must be positive, got {mu}")));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::domain(format!("influx age scale must be positive, got {lambda}")));
        }
        Ok(Self { mu, lambda })
    }

    fn gap(&self) -> T {
        self.lambda - self.mu
    }
}

/// `(1 - e^{-x}) / x`, equal to 1 at `x = 0`.
pub(crate) fn xi<T: Real>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - e^{-x} - x) / x^2`, equal to -1/2 at `x = 0`.
pub(crate) fn psi<T: Real>(x: T) -> T {
    if x.abs() < T::lit(0.5) {
        // sum_{k>=2} (-1)^{k+1} x^{k-2} / k!
        let mut term = -T::lit(0.5);
        let mut sum = term;
        for k in 3..40 {
            term = -term * x / T::from_count(k);
            sum += term;
            if term.abs() <= sum.abs() * T::epsilon() {
                break;
            }
        }
        sum
    } else {
        (-(-x).exp_m1() - x) / (x * x)
    }
}

fn check_age_time<T: Real>(a: T, t: T) -> Result<()> {
    if !(a >= T::zero()) {
        return Err(Error::domain(format!("age must be nonnegative, got {a}")));
    }
    if !(t >= T::zero()) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    Ok(())
}

/// Influx `p(a) = a e^{-lambda a}`, largest at `a = 1/lambda`.
pub fn influx_simple<T: Real>(a: T, lambda: T) -> Result<T> {
    if !(a >= T::zero()) {
        return Err(Error::domain(format!("influx evaluated at negative age {a}")));
    }
    Ok(a * (-lambda * a).exp())
}

/// Branch for ages that were already present at `t = 0` (`a >= t`).
pub fn transient_branch<T: Real>(p: &SimpleModelParams<T>, a: T, t: T) -> T {
    let x = p.gap() * t;
    (-p.lambda * (a - t) - p.mu * t).exp() * t * (a * xi(x) + t * psi(x))
}

/// Branch for cohorts that entered through the age-zero boundary (`a < t`);
/// it does not depend on `t`.
pub fn settled_branch<T: Real>(p: &SimpleModelParams<T>, a: T) -> T {
    let x = p.gap() * a;
    (-p.mu * a).exp() * a * (a * xi(x) + a * psi(x))
}

/// Closed-form density `n(a, t)`.
pub fn solve_simple<T: Real>(params: &SimpleModelParams<T>, a: T, t: T) -> Result<T> {
    check_age_time(a, t)?;
    Ok(if a >= t {
        transient_branch(params, a, t)
    } else {
        settled_branch(params, a)
    })
}

/// Stationary point in `a` of the `a >= t` branch at time `t`.
///
/// It lies inside that branch (`> t`) only while
/// `t e^{-(lambda-mu) t} / (1 - e^{-(lambda-mu) t}) > mu / (lambda (lambda - mu))`;
/// for later times the field maximum sits in the `a < t` region.
pub fn peak_age<T: Real>(t: T, params: &SimpleModelParams<T>) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::domain(format!("peak age needs t > 0, got {t}")));
    }
    if !(params.lambda > params.mu) {
        return Err(Error::domain(format!(
            "peak trajectory requires lambda > mu (lambda = {}, mu = {})",
            params.lambda, params.mu
        )));
    }
    // t / (1 - e^{-x}) - mu / (lambda (lambda - mu)) rewritten without the
    // 1/(lambda - mu) cancellation; note -psi = (1 - xi) / x.
    let x = params.gap() * t;
    Ok((T::one() - params.mu * t * psi(x)) / (params.lambda * xi(x)))
}

/// Large-time limit of `n(a, t)`.
pub fn steady_state<T: Real>(a: T, params: &SimpleModelParams<T>) -> Result<T> {
    if !(a >= T::zero()) {
        return Err(Error::domain(format!("age must be nonnegative, got {a}")));
    }
    Ok(settled_branch(params, a))
}

/// `dn/dt` of the closed-form solution: `(a - t) e^{-lambda (a-t) - mu t}`
/// for `a >= t`, zero otherwise.
pub fn simple_rate_of_change<T: Real>(a: T, t: T, params: &SimpleModelParams<T>) -> Result<T> {
    check_age_time(a, t)?;
    if a < t {
        return Ok(T::zero());
    }
    let s = a - t;
    Ok(s * (-params.lambda * s - params.mu * t).exp())
}
