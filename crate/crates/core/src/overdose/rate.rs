use crate::agestruct::AgeGrid;
use crate::error::{Error, Result};
use crate::quad::simpson;
use crate::scalar::Real;

use super::params::{AddictionRate, InitialProfile, OverdoseParams, PopulationModel, ProfileDensity};

/// Panel count of the outer Simpson rule: proportional to the integration
/// length over `delta_t`, never below `min_panels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQuadrature<T> {
    pub delta_t: T,
    pub min_panels: usize,
    pub panels_per_step: usize,
}

impl<T: Real> Default for RateQuadrature<T> {
    fn default() -> Self {
        Self {
            delta_t: T::lit(0.1),
            min_panels: 32,
            panels_per_step: 2,
        }
    }
}

impl<T: Real> RateQuadrature<T> {
    fn panels(&self, length: T) -> usize {
        let steps = (length / self.delta_t).ceil().to_f64_lossy().max(0.0) as usize;
        let n = (steps * self.panels_per_step).max(self.min_panels);
        n + n % 2
    }
}

/// `dn/dt` at `(a, t)` of the overdose model started from `rho`, following
/// the closed-form characteristic solution: hazard integrals from the
/// incomplete gamma identity, the outer time integral by Simpson.
pub fn rate_of_change<T: Real>(
    a: T,
    t: T,
    params: &OverdoseParams<T>,
    pop: &PopulationModel<T>,
    init: &InitialProfile<T>,
    quad: &RateQuadrature<T>,
) -> Result<T> {
    if !(a >= T::zero()) || !(t >= T::zero()) {
        return Err(Error::domain(format!("rate of change needs a, t >= 0, got a = {a}, t = {t}")));
    }
    let rate = AddictionRate::new(params)?;
    let profile = init.density()?;
    let mu = params.mu;
    let mut failure = None;
    let mut hazard = |lo: T, hi: T| match rate.integral(lo, hi) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            T::nan()
        }
    };

    let value = if a >= t {
        let x = a - t;
        let (rho, rho_d) = profile.rho_and_deriv(x, pop.n0);
        let transport = -(rho_d + rho * (mu + rate.rate(x))) * (-mu * t - hazard(x, a)).exp();
        let influx = rate.rate(a) * pop.at(t);
        let memory = simpson(
            |s| {
                let u = x + s;
                let r = rate.rate(u);
                let g = r * (mu + r) + rate.deriv(u);
                (-mu * (t - s) - hazard(u, a)).exp() * pop.at(s) * g
            },
            T::zero(),
            t,
            quad.panels(t),
        );
        transport + influx - memory
    } else {
        pop.delta_n
            * simpson(
                |s| rate.rate(s) * (-mu * (a - s) - hazard(s, a)).exp(),
                T::zero(),
                a,
                quad.panels(a),
            )
    };
    if let Some(e) = failure {
        return Err(e);
    }
    if !value.is_finite() {
        return Err(Error::numerical(format!("rate of change is not finite at a = {a}, t = {t}")));
    }
    Ok(value)
}

/// Rate of change on a whole age grid, for one parameter set and time.
///
/// Uses the integrated form
///
/// ```text
/// a >= t:  w [r(x) N0 - rho'(x) - rho(x)(mu + r(x))] + dN K(x, a),   x = a - t
/// a <  t:  dN K(0, a)
/// w = exp(-mu t - int_x^a r),   K(x, a) = int_x^a exp(-mu (a-u) - int_u^a r) r(u) du
/// ```
///
/// which follows from the pointwise formula because
/// `E (r (mu + r) + r') = (E r)'` for `E(u) = exp(mu u + int_0^u r)`.
/// The hazard and `K` are tabulated by cumulative Simpson on the half-step
/// grid and read off at the shifted ages `a_j - t` by cubic Hermite
/// interpolation.
#[derive(Debug, Clone)]
pub struct GridRate<T> {
    delta_a: T,
    n_a: usize,
    /// `ln(j h)` on the half-step grid (entry 0 unused).
    ln_nodes: Vec<T>,
}

impl<T: Real> GridRate<T> {
    pub fn new(grid: &AgeGrid<T>) -> Result<Self> {
        if grid.a0() != T::zero() {
            return Err(Error::config("overdose grid must start at age 0"));
        }
        let h = grid.delta_a() / T::lit(2.0);
        let ln_nodes = (0..=2 * grid.len())
            .map(|i| if i == 0 { T::zero() } else { (T::from_count(i) * h).ln() })
            .collect();
        Ok(Self {
            delta_a: grid.delta_a(),
            n_a: grid.len(),
            ln_nodes,
        })
    }

    pub fn evaluate(
        &self,
        params: &OverdoseParams<T>,
        pop: &PopulationModel<T>,
        profile: &ProfileDensity<T>,
        t: T,
        out: &mut [T],
    ) -> Result<()> {
        let n = self.n_a;
        if out.len() != n {
            return Err(Error::config(format!("output has {} entries, grid has {n}", out.len())));
        }
        let rate = AddictionRate::new(params)?;
        let (f1, f2) = rate.components();
        let half_r0 = rate.half_r0();
        let mu = params.mu;
        let two = T::lit(2.0);
        let h = self.delta_a / two;
        let p = 2 * n + 1;
        let top = T::from_count(2 * n) * h;

        let rate_at = |i: usize| -> T {
            if i == 0 {
                rate.rate(T::zero())
            } else {
                let u = T::from_count(i) * h;
                let ln_u = self.ln_nodes[i];
                half_r0 * (f1.pdf_with_ln(u, ln_u) + f2.pdf_with_ln(u, ln_u))
            }
        };
        let r: Vec<T> = (0..p).map(rate_at).collect();

        // cumulative hazard R(u_i) and K-integrand antiderivative H(u_i)
        let mut big_r = vec![T::zero(); p];
        let simpson_pair = |f0: T, f1: T, f2: T| -> (T, T) {
            (
                h / T::lit(12.0) * (T::lit(5.0) * f0 + T::lit(8.0) * f1 - f2),
                h / T::lit(3.0) * (f0 + T::lit(4.0) * f1 + f2),
            )
        };
        for j in 0..n {
            let i = 2 * j;
            let (half, full) = simpson_pair(r[i], r[i + 1], r[i + 2]);
            big_r[i + 1] = big_r[i] + half;
            big_r[i + 2] = big_r[i] + full;
        }
        let r_top = big_r[p - 1];
        // E(u) r(u), scaled so that E <= 1 on the grid
        let er: Vec<T> = (0..p)
            .map(|i| (mu * (T::from_count(i) * h - top) + big_r[i] - r_top).exp() * r[i])
            .collect();
        let mut big_h = vec![T::zero(); p];
        for j in 0..n {
            let i = 2 * j;
            let (half, full) = simpson_pair(er[i], er[i + 1], er[i + 2]);
            big_h[i + 1] = big_h[i] + half;
            big_h[i + 2] = big_h[i] + full;
        }
        if !big_r[p - 1].is_finite() || !big_h[p - 1].is_finite() {
            return Err(Error::numerical(format!(
                "addiction rate is singular for parameters {:?}",
                params.to_array()
            )));
        }

        let n0 = pop.n0;
        let dn = pop.delta_n;
        for (j, o) in out.iter_mut().enumerate() {
            let i = 2 * j;
            let a = T::from_count(i) * h;
            let scale = (-mu * (a - top) - (big_r[i] - r_top)).exp();
            if a < t {
                *o = dn * scale * big_h[i];
                continue;
            }
            let x = a - t;
            let pos = (x / h).to_f64_lossy();
            let k = (pos.floor() as usize).min(p - 2);
            let s = T::lit(pos - k as f64);
            let hermite = |y: &[T], d: &[T]| -> T {
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = two * s3 - T::lit(3.0) * s2 + T::one();
                let h10 = s3 - two * s2 + s;
                let h01 = T::lit(3.0) * s2 - two * s3;
                let h11 = s3 - s2;
                h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1]
            };
            let r_x = rate.rate(x);
            let hazard_x = hermite(&big_r, &r);
            let h_x = hermite(&big_h, &er);
            let w = (-mu * t - (big_r[i] - hazard_x)).exp();
            let (rho, rho_d) = profile.rho_and_deriv(x, n0);
            *o = w * (r_x * n0 - rho_d - rho * (mu + r_x)) + dn * scale * (big_h[i] - h_x);
        }
        Ok(())
    }
}
