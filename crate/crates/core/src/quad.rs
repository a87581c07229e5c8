//! Composite Simpson quadrature with deterministic panel doubling.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Settings for [`simpson_converged`] and the nested characteristic
/// quadrature built on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Panel count of the first estimate; rounded up to an even number.
    pub initial_panels: usize,
    /// Successive estimates must differ by less than this, relatively.
    pub rel_tol: f64,
    pub max_doublings: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            initial_panels: 256,
            rel_tol: 1e-9,
            max_doublings: 14,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub(crate) fn first_panels(&self) -> usize {
        let n = self.initial_panels.max(2);
        n + (n % 2)
    }
}

/// Composite Simpson rule on `[a, b]` with `panels` subintervals (made even).
pub fn simpson<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, panels: usize) -> T {
    let n = panels.max(2) + panels % 2;
    if a == b {
        return T::zero();
    }
    let h = (b - a) / T::from_count(n);
    let mut odd = T::zero();
    let mut even = T::zero();
    for i in 1..n {
        let x = a + h * T::from_count(i);
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    (f(a) + f(b) + T::lit(4.0) * odd + T::lit(2.0) * even) * h / T::lit(3.0)
}

/// Returns true once two successive estimates agree to `rel_tol`.
pub(crate) fn settled<T: Real>(prev: T, next: T, rel_tol: f64) -> bool {
    let diff = (next - prev).abs();
    diff == T::zero() || diff <= T::lit(rel_tol) * next.abs()
}

/// Composite Simpson, doubling the panel count until two successive
/// estimates agree to `opts.rel_tol`.
pub fn simpson_converged<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, opts: &QuadOptions) -> Result<T> {
    let mut n = opts.first_panels();
    let mut prev = simpson(&mut f, a, b, n);
    if !prev.is_finite() {
        return Err(Error::numerical(format!("non-finite integrand on [{a}, {b}]")));
    }
    for _ in 0..opts.max_doublings {
        n *= 2;
        let next = simpson(&mut f, a, b, n);
        if settled(prev, next, opts.rel_tol) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::numerical(format!(
        "Simpson quadrature on [{a}, {b}] did not reach relative tolerance {} with {n} panels",
        opts.rel_tol
    )))
}
