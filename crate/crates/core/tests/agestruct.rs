use approx::assert_relative_eq;
use mortcast::agestruct::{
    gamma_pdf, influx_simple, peak_age, settled_branch, solve_general, solve_simple, steady_state, transient_branch,
    upper_incomplete_gamma, BoundaryData, SimpleModelParams,
};
use mortcast::quad::{simpson, QuadOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> impl Strategy<Value = SimpleModelParams<f64>> {
    (0.01f64..0.5, 0.01f64..0.5)
        .prop_filter("distinct rates", |(m, l)| (m - l).abs() > 1e-3)
        .prop_map(|(m, l)| SimpleModelParams::new(m, l).unwrap())
}

proptest! {
    #[test]
    fn branches_meet_on_the_diagonal(p in params(), t in 1e-3f64..50.0) {
        let (above, below) = (transient_branch(&p, t, t), settled_branch(&p, t));
        prop_assert!((above - below).abs() <= 1e-12 * above.abs().max(below.abs()));
    }

    #[test]
    fn density_is_nonnegative(p in params(), a in 0.0f64..150.0, t in 0.0f64..60.0) {
        let n = solve_simple(&p, a, t).unwrap();
        let scale = steady_state(a.max(1.0 / p.lambda), &p).unwrap().abs().max(1e-300);
        prop_assert!(n >= -1e-12 * scale, "n = {n}");
    }

    #[test]
    fn peak_trajectory_rises_and_leads_while_transient(mu in 0.01f64..0.2, gap in 0.01f64..0.3, t in 1e-3f64..50.0, dt in 1e-3f64..5.0) {
        let p = SimpleModelParams::new(mu, mu + gap).unwrap();
        let now = peak_age(t, &p).unwrap();
        let x = gap * t;
        let (lhs, rhs) = (t * (-x).exp() / (1.0 - (-x).exp()), mu / (p.lambda * gap));
        prop_assume!((lhs - rhs).abs() > 1e-9 * rhs);
        let ahead = lhs > rhs;
        prop_assert_eq!(now > t, ahead);
        prop_assert!(peak_age(t + dt, &p).unwrap() > now);
    }
}

#[test]
fn influx_peaks_at_inverse_lambda() {
    let best = (0..200_000)
        .map(|k| k as f64 * 1e-4)
        .max_by(|x, y| influx_simple(*x, 0.2).unwrap().total_cmp(&influx_simple(*y, 0.2).unwrap()))
        .unwrap();
    assert_relative_eq!(best, 5.0, epsilon = 1e-4);
    assert_relative_eq!(influx_simple(5.0, 0.2).unwrap(), 1.839_397_205_857_211_6, max_relative = 1e-14);
}

#[test]
fn steady_state_is_long_run_quadrature() {
    let p = SimpleModelParams::new(0.08, 0.2).unwrap();
    let opts = QuadOptions::default();
    let n = solve_general(&BoundaryData::empty(), |_, _| 0.08, |a: f64, _| a * (-0.2 * a).exp(), 10.0, 1e3, &opts)
        .unwrap();
    assert_relative_eq!(n, steady_state(10.0, &p).unwrap(), max_relative = 1e-8);
}

#[test]
fn gamma_density_normalises_to_mean_45() {
    let mass = simpson(|a| gamma_pdf(a, 15.0, 1.0 / 3.0).unwrap(), 0.0, 600.0, 60_000);
    let mean = simpson(|a| a * gamma_pdf(a, 15.0, 1.0 / 3.0).unwrap(), 0.0, 600.0, 60_000);
    assert_relative_eq!(mass, 1.0, epsilon = 1e-10);
    assert_relative_eq!(mean, 45.0, max_relative = 1e-10);
}

#[test]
fn upper_gamma_matches_defining_integral() {
    for (s, x) in [(15.0, 5.0), (2.5, 0.7), (7.3, 12.0)] {
        let tail = simpson(|u: f64| u.powf(s - 1.0) * (-u).exp(), x, x + 400.0, 400_000);
        assert_relative_eq!(upper_incomplete_gamma(s, x).unwrap(), tail, max_relative = 1e-10);
    }
}

#[test]
fn upper_gamma_derivative_is_negative_integrand() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let (s, x): (f64, f64) = (rng.random_range(0.5..30.0), rng.random_range(0.1..40.0));
        let h = 1e-5 * x.max(1.0);
        let fd = (upper_incomplete_gamma(s, x + h).unwrap() - upper_incomplete_gamma(s, x - h).unwrap()) / (2.0 * h);
        let exact = -x.powf(s - 1.0) * (-x).exp();
        assert_relative_eq!(fd, exact, max_relative = 1e-6);
    }
}

#[test]
fn single_precision_closed_form_tracks_double() {
    let p32 = SimpleModelParams::<f32>::new(0.08, 0.2).unwrap();
    let p64 = SimpleModelParams::<f64>::new(0.08, 0.2).unwrap();
    for (a, t) in [(3.0, 1.0), (20.0, 5.0), (40.0, 60.0)] {
        let lo = solve_simple(&p32, a as f32, t as f32).unwrap() as f64;
        let hi = solve_simple(&p64, a, t).unwrap();
        assert_relative_eq!(lo, hi, max_relative = 1e-5);
    }
}
