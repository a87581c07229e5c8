//! Gamma-family special functions.
//!
//! The incomplete gamma function uses the classic split: power series for
//! the lower function when `x <= s + 1`, modified-Lentz continued fraction
//! for the upper function otherwise.

use crate::error::{Error, Result};
use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_ITER: usize = 1_000;

/// Relative tolerance of the series and continued fraction.
fn tolerance<T: Real>() -> T {
    T::epsilon().max(T::lit(1e-16)) * T::lit(2.0)
}

/// Natural logarithm of the gamma function for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    if x < T::lit(0.5) {
        // Reflection keeps the Lanczos sum in its accurate range.
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += T::lit(c) / (x + T::from_count(i));
    }
    let t = x + T::lit(LANCZOS_G + 0.5);
    T::lit(0.5) * (T::lit(2.0) * T::PI()).ln() + (x + T::lit(0.5)) * t.ln() - t + acc.ln()
}

/// Complete gamma function for `x > 0`.
pub fn gamma<T: Real>(x: T) -> T {
    ln_gamma(x).exp()
}

fn check_args<T: Real>(s: T, x: T) -> Result<()> {
    if !(s > T::zero()) || !s.is_finite() {
        return Err(Error::domain(format!("incomplete gamma shape must be positive, got {s}")));
    }
    if !(x >= T::zero()) {
        return Err(Error::domain(format!("incomplete gamma argument must be nonnegative, got {x}")));
    }
    Ok(())
}

/// Sum of the lower-gamma series, without the `x^s e^-x / Gamma(s+1)` prefactor.
fn lower_series<T: Real>(s: T, x: T) -> Result<T> {
    let tol = tolerance::<T>();
    let mut term = T::one();
    let mut sum = T::one();
    let mut denom = s;
    for _ in 0..MAX_ITER {
        denom += T::one();
        term *= x / denom;
        sum += term;
        if term.abs() <= sum.abs() * tol {
            return Ok(sum);
        }
    }
    Err(Error::numerical(format!("incomplete gamma series did not converge (s={s}, x={x})")))
}

/// Continued fraction for `Gamma(s, x) e^x x^-s`, modified Lentz.
fn upper_fraction<T: Real>(s: T, x: T) -> Result<T> {
    let tol = tolerance::<T>();
    let tiny = T::min_positive_value() / T::epsilon();
    let mut b = x + T::one() - s;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let i_t = T::from_count(i);
        let an = -i_t * (i_t - s);
        b += T::lit(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = d * c;
        h *= delta;
        if (delta - T::one()).abs() <= tol {
            return Ok(h);
        }
    }
    Err(Error::numerical(format!(
        "incomplete gamma continued fraction did not converge (s={s}, x={x})"
    )))
}

/// Regularized lower and upper incomplete gamma `(P(s,x), Q(s,x))` given the
/// precomputed `ln(x^s e^-x / Gamma(s))`.
fn regularized_pair<T: Real>(s: T, x: T, ln_front: T) -> Result<(T, T)> {
    if x == T::zero() {
        return Ok((T::zero(), T::one()));
    }
    if x <= s + T::one() {
        let p = (ln_front - s.ln()).exp() * lower_series(s, x)?;
        Ok((p, T::one() - p))
    } else {
        let q = ln_front.exp() * upper_fraction(s, x)?;
        Ok((T::one() - q, q))
    }
}

/// Regularized lower incomplete gamma `P(s, x) = gamma(s, x) / Gamma(s)`.
pub fn regularized_lower_gamma<T: Real>(s: T, x: T) -> Result<T> {
    check_args(s, x)?;
    if x == T::zero() {
        return Ok(T::zero());
    }
    let ln_front = s * x.ln() - x - ln_gamma(s);
    Ok(regularized_pair(s, x, ln_front)?.0)
}

/// Regularized upper incomplete gamma `Q(s, x) = Gamma(s, x) / Gamma(s)`.
pub fn regularized_upper_gamma<T: Real>(s: T, x: T) -> Result<T> {
    check_args(s, x)?;
    if x == T::zero() {
        return Ok(T::one());
    }
    let ln_front = s * x.ln() - x - ln_gamma(s);
    Ok(regularized_pair(s, x, ln_front)?.1)
}

/// Upper incomplete gamma function `Gamma(s, x)`, integral of
/// `t^(s-1) e^-t` over `[x, inf)`.
pub fn upper_incomplete_gamma<T: Real>(s: T, x: T) -> Result<T> {
    check_args(s, x)?;
    if x == T::zero() {
        return Ok(gamma(s));
    }
    if x > s + T::one() {
        // Avoid Q * Gamma(s) when Q underflows but Gamma(s, x) does not.
        let h = upper_fraction(s, x)?;
        Ok((s * x.ln() - x).exp() * h)
    } else {
        Ok(regularized_upper_gamma(s, x)? * gamma(s))
    }
}

/// Gamma distribution in the shape/rate parameterization, with cached
/// normalization so repeated evaluations along an age grid stay cheap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDensity<T> {
    shape: T,
    rate: T,
    ln_norm: T,
}

impl<T: Real> GammaDensity<T> {
    pub fn new(shape: T, rate: T) -> Result<Self> {
        if !(shape > T::zero() && rate > T::zero()) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::domain(format!(
                "gamma density needs positive shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(Self {
            shape,
            rate,
            ln_norm: shape * rate.ln() - ln_gamma(shape),
        })
    }

    pub fn shape(&self) -> T {
        self.shape
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    pub fn mean(&self) -> T {
        self.shape / self.rate
    }

    /// Density at age `a`; zero for `a < 0`.
    pub fn pdf(&self, a: T) -> T {
        if a < T::zero() {
            return T::zero();
        }
        if a == T::zero() {
            return self.pdf_at_zero();
        }
        (self.ln_norm + (self.shape - T::one()) * a.ln() - self.rate * a).exp()
    }

    /// Density at `a > 0` given `ln a`, for callers that tabulate logarithms.
    #[inline]
    pub(crate) fn pdf_with_ln(&self, a: T, ln_a: T) -> T {
        (self.ln_norm + (self.shape - T::one()) * ln_a - self.rate * a).exp()
    }

    fn pdf_at_zero(&self) -> T {
        if self.shape < T::one() {
            T::infinity()
        } else if self.shape == T::one() {
            self.rate
        } else {
            T::zero()
        }
    }

    /// Derivative of the density with respect to age.
    pub fn pdf_deriv(&self, a: T) -> T {
        if a <= T::zero() {
            let two = T::lit(2.0);
            return if self.shape > two {
                T::zero()
            } else if self.shape == two {
                self.rate * self.rate
            } else if self.shape == T::one() {
                -self.rate * self.rate
            } else if self.shape > T::one() {
                T::infinity()
            } else {
                T::neg_infinity()
            };
        }
        self.pdf(a) * ((self.shape - T::one()) / a - self.rate)
    }

    /// Cumulative distribution `P(shape, rate * a)`.
    pub fn cdf(&self, a: T) -> Result<T> {
        Ok(self.pdf_and_cdf(a)?.1)
    }

    /// Density and cumulative distribution sharing one exponential.
    pub fn pdf_and_cdf(&self, a: T) -> Result<(T, T)> {
        if a <= T::zero() {
            return Ok((if a == T::zero() { self.pdf_at_zero() } else { T::zero() }, T::zero()));
        }
        let x = self.rate * a;
        // ln(x^s e^-x / Gamma(s)) = ln(pdf(a) * a)
        let ln_pdf = self.ln_norm + (self.shape - T::one()) * a.ln() - x;
        let ln_front = ln_pdf + a.ln();
        let (p, _) = regularized_pair(self.shape, x, ln_front)?;
        Ok((ln_pdf.exp(), p))
    }
}

/// Gamma density with shape `alpha` and rate `beta` at age `a`.
pub fn gamma_pdf<T: Real>(a: T, alpha: T, beta: T) -> Result<T> {
    if a < T::zero() {
        return Err(Error::domain(format!("gamma density evaluated at negative age {a}")));
    }
    Ok(GammaDensity::new(alpha, beta)?.pdf(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Closed form for integer shape: (n-1)! e^-x sum_{k<n} x^k / k!.
    fn integer_upper_gamma(n: u32, x: f64) -> f64 {
        let mut sum = 0.0;
        for k in 0..n {
            sum += x.powi(k as i32) / factorial(k);
        }
        factorial(n - 1) * (-x).exp() * sum
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..20u32 {
            assert_relative_eq!(ln_gamma(n as f64), factorial(n - 1).ln(), max_relative = 1e-13, epsilon = 1e-14);
        }
        assert_relative_eq!(gamma(0.5f64), std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(0.1f64), 9.513_507_698_668_732, max_relative = 1e-13);
    }

    #[test]
    fn shape_one_is_exponential() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 10.0, 40.0] {
            assert_relative_eq!(upper_incomplete_gamma(1.0f64, x).unwrap(), (-x as f64).exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_argument_gives_complete_gamma() {
        assert_eq!(upper_incomplete_gamma(5.0f64, 0.0).unwrap(), gamma(5.0));
        assert_relative_eq!(upper_incomplete_gamma(5.0f64, 0.0).unwrap(), 24.0, max_relative = 1e-13);
    }

    #[test]
    fn integer_shapes_match_closed_form() {
        for &n in &[2u32, 5, 15, 30] {
            for &x in &[0.01, 0.5, 3.0, 5.0, 14.0, 16.5, 40.0, 90.0] {
                let expect = integer_upper_gamma(n, x);
                let got = upper_incomplete_gamma(n as f64, x).unwrap();
                assert_relative_eq!(got, expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn lower_plus_upper_is_one() {
        for &s in &[0.3, 1.0, 2.7, 15.0, 45.0] {
            for &x in &[0.001, 0.7, 3.0, 15.0, 16.5, 60.0] {
                let p = regularized_lower_gamma(s, x).unwrap();
                let q = regularized_upper_gamma(s, x).unwrap();
                assert_relative_eq!(p + q, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(upper_incomplete_gamma(0.0f64, 1.0), Err(Error::Domain(_))));
        assert!(matches!(upper_incomplete_gamma(1.0f64, -1.0), Err(Error::Domain(_))));
        assert!(matches!(gamma_pdf(-1.0f64, 2.0, 1.0), Err(Error::Domain(_))));
        assert!(GammaDensity::new(1.0f64, 0.0).is_err());
    }

    #[test]
    fn shape_one_pdf_is_exponential() {
        for &a in &[0.0, 0.5, 3.0, 20.0] {
            assert_relative_eq!(gamma_pdf(a, 1.0f64, 0.25).unwrap(), 0.25 * (-0.25 * a as f64).exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn fused_pdf_cdf_agrees_with_separate_calls() {
        let d = GammaDensity::new(15.0f64, 1.0 / 3.0).unwrap();
        for &a in &[0.5, 10.0, 44.0, 45.0, 48.0, 51.0, 90.0] {
            let (pdf, cdf) = d.pdf_and_cdf(a).unwrap();
            assert_relative_eq!(pdf, d.pdf(a), max_relative = 1e-14);
            assert_relative_eq!(cdf, regularized_lower_gamma(15.0, a / 3.0).unwrap(), max_relative = 1e-13);
        }
    }

    #[test]
    fn pdf_derivative_matches_finite_difference() {
        let d = GammaDensity::new(15.0f64, 1.0 / 3.0).unwrap();
        for &a in &[5.0, 30.0, 41.0, 70.0] {
            let h = 1e-5;
            let fd = (d.pdf(a + h) - d.pdf(a - h)) / (2.0 * h);
            assert_relative_eq!(d.pdf_deriv(a), fd, max_relative = 1e-6, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_precision_is_usable() {
        let v = upper_incomplete_gamma(15.0f32, 5.0).unwrap();
        let expect = integer_upper_gamma(15, 5.0) as f32;
        assert!((v - expect).abs() / expect < 1e-4);
    }
}
