use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{regularized_lower_gamma, regularized_upper_gamma, GammaDensity};

/// The six estimated quantities, in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverdoseParams<T> {
    /// Overdose mortality rate (1/year).
    pub mu: T,
    /// Base modulating addiction rate (1/year).
    pub r0: T,
    pub alpha1: T,
    pub beta1: T,
    pub alpha2: T,
    pub beta2: T,
}

pub const PARAM_NAMES: [&str; 6] = ["mu", "r0", "alpha1", "beta1", "alpha2", "beta2"];

impl<T: Real> OverdoseParams<T> {
    pub fn new(mu: T, r0: T, alpha1: T, beta1: T, alpha2: T, beta2: T) -> Result<Self> {
        let p = Self {
            mu,
            r0,
            alpha1,
            beta1,
            alpha2,
            beta2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Starting values of the data-assimilation runs: both gamma components
    /// with mean 45 years.
    pub fn initial_guess() -> Self {
        Self {
            mu: T::lit(7e-4),
            r0: T::lit(0.04),
            alpha1: T::lit(15.0),
            beta1: T::lit(1.0 / 3.0),
            alpha2: T::lit(15.0),
            beta2: T::lit(1.0 / 3.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in PARAM_NAMES.iter().zip(self.to_array()) {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::domain(format!("parameter {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.mu, self.r0, self.alpha1, self.beta1, self.alpha2, self.beta2]
    }

    pub fn from_slice(v: &[T]) -> Result<Self> {
        match v {
            [mu, r0, a1, b1, a2, b2] => Self::new(*mu, *r0, *a1, *b1, *a2, *b2),
            _ => Err(Error::config(format!("expected 6 parameters, got {}", v.len()))),
        }
    }
}

/// Linear total-population model `N(t) = n0 + delta_n t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel<T> {
    pub n0: T,
    pub delta_n: T,
}

impl<T: Real> PopulationModel<T> {
    pub fn new(n0: T, delta_n: T) -> Result<Self> {
        if !(n0 > T::zero()) || !delta_n.is_finite() {
            return Err(Error::config(format!("population needs n0 > 0 and finite growth, got ({n0}, {delta_n})")));
        }
        Ok(Self { n0, delta_n })
    }

    /// US population fit for 2000-2020 anchored at 1998.
    pub fn us() -> Self {
        Self {
            n0: T::lit(274.9e6),
            delta_n: T::lit(2.3e6),
        }
    }

    pub fn at(&self, t: T) -> T {
        self.n0 + self.delta_n * t
    }
}

pub fn population<T: Real>(t: T, model: &PopulationModel<T>) -> T {
    model.at(t)
}

/// Initial SUD density `rho(a) = fraction * N0 * f(a; alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialProfile<T> {
    pub fraction: T,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> Default for InitialProfile<T> {
    fn default() -> Self {
        Self {
            fraction: T::lit(0.04),
            alpha: T::lit(15.0),
            beta: T::lit(1.0 / 3.0),
        }
    }
}

impl<T: Real> InitialProfile<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > T::zero() && self.fraction < T::one()) {
            return Err(Error::config(format!("initial fraction must lie in (0, 1), got {}", self.fraction)));
        }
        GammaDensity::new(self.alpha, self.beta).map(|_| ())
    }

    pub fn density(&self) -> Result<ProfileDensity<T>> {
        self.validate()?;
        Ok(ProfileDensity {
            fraction: self.fraction,
            gamma: GammaDensity::new(self.alpha, self.beta)?,
        })
    }
}

/// Evaluator for `rho` and `rho'` once the total population is known.
#[derive(Debug, Clone, Copy)]
pub struct ProfileDensity<T> {
    fraction: T,
    gamma: GammaDensity<T>,
}

impl<T: Real> ProfileDensity<T> {
    pub fn rho(&self, a: T, n0: T) -> T {
        self.fraction * n0 * self.gamma.pdf(a)
    }

    pub fn rho_deriv(&self, a: T, n0: T) -> T {
        self.fraction * n0 * self.gamma.pdf_deriv(a)
    }

    /// `(rho, rho')` sharing one exponential.
    pub fn rho_and_deriv(&self, a: T, n0: T) -> (T, T) {
        let scale = self.fraction * n0;
        if a <= T::zero() {
            return (scale * self.gamma.pdf(a), scale * self.gamma.pdf_deriv(a));
        }
        let f = self.gamma.pdf(a);
        (scale * f, scale * f * ((self.gamma.shape() - T::one()) / a - self.gamma.rate()))
    }
}

/// `r(a) = r0/2 [f1(a) + f2(a)]` with its derivative and antiderivative.
#[derive(Debug, Clone, Copy)]
pub struct AddictionRate<T> {
    half_r0: T,
    f1: GammaDensity<T>,
    f2: GammaDensity<T>,
}

impl<T: Real> AddictionRate<T> {
    pub fn new(p: &OverdoseParams<T>) -> Result<Self> {
        p.validate()?;
        Ok(Self {
            half_r0: p.r0 / T::lit(2.0),
            f1: GammaDensity::new(p.alpha1, p.beta1)?,
            f2: GammaDensity::new(p.alpha2, p.beta2)?,
        })
    }

    pub fn components(&self) -> (&GammaDensity<T>, &GammaDensity<T>) {
        (&self.f1, &self.f2)
    }

    pub fn half_r0(&self) -> T {
        self.half_r0
    }

    pub fn rate(&self, a: T) -> T {
        self.half_r0 * (self.f1.pdf(a) + self.f2.pdf(a))
    }

    pub fn deriv(&self, a: T) -> T {
        self.half_r0 * (self.f1.pdf_deriv(a) + self.f2.pdf_deriv(a))
    }

    /// `int_lo^hi r(u) du` for `0 <= lo <= hi`, from the incomplete gamma
    /// identity `[Gamma(alpha, lo beta) - Gamma(alpha, hi beta)] / Gamma(alpha)`.
    pub fn integral(&self, lo: T, hi: T) -> Result<T> {
        if !(lo >= T::zero()) || !(hi >= lo) {
            return Err(Error::domain(format!("rate integral needs 0 <= lo <= hi, got [{lo}, {hi}]")));
        }
        let piece = |f: &GammaDensity<T>| -> Result<T> {
            let (x_lo, x_hi) = (f.rate() * lo, f.rate() * hi);
            // Difference of whichever tail is small, to avoid cancellation.
            if x_lo >= f.shape() {
                Ok(regularized_upper_gamma(f.shape(), x_lo)? - regularized_upper_gamma(f.shape(), x_hi)?)
            } else {
                Ok(regularized_lower_gamma(f.shape(), x_hi)? - regularized_lower_gamma(f.shape(), x_lo)?)
            }
        };
        Ok(self.half_r0 * (piece(&self.f1)? + piece(&self.f2)?))
    }
}

pub fn addiction_rate<T: Real>(a: T, params: &OverdoseParams<T>) -> Result<T> {
    if !(a >= T::zero()) {
        return Err(Error::domain(format!("age must be nonnegative, got {a}")));
    }
    Ok(AddictionRate::new(params)?.rate(a))
}

/// `int_s^t r(a - t + s') ds'`, the addiction hazard accumulated along the
/// characteristic through `(a, t)` between times `s` and `t`.
pub fn rate_integral<T: Real>(a: T, t: T, s: T, params: &OverdoseParams<T>) -> Result<T> {
    if !(s >= T::zero() && s <= t) {
        return Err(Error::domain(format!("rate integral needs 0 <= s <= t, got s = {s}, t = {t}")));
    }
    let lo = a - t + s;
    if lo < T::zero() {
        return Err(Error::domain(format!("characteristic age a - t + s = {lo} is negative")));
    }
    AddictionRate::new(params)?.integral(lo, a)
}

/// Overdose death density rate `mu * n`.
pub fn death_flux<T: Real>(_a: T, _t: T, n_value: T, mu: T) -> T {
    mu * n_value
}
