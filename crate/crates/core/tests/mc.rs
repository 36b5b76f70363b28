use omega_pricer::mc::{
    bermudan_dp, simulate_path, stopped_value, symmetry_check, Claim, DpGrid, Dynamics, JumpDirection,
    McConfig, StopInterval, StopReason,
};
use omega_pricer::{martingale_drift, DiscountFn, LevyModel, PricingProblem};
use proptest::prelude::*;

const K: f64 = 20.0;

fn bs() -> LevyModel {
    LevyModel::black_scholes(0.05, 0.2).unwrap()
}

fn crash(sigma: f64) -> LevyModel {
    LevyModel::new(martingale_drift(0.05, 6.0, 2.0), sigma, 6.0, 2.0).unwrap()
}

/// Perpetual put with constant rate in Black–Scholes: boundary and value.
fn classical(s: f64) -> (f64, f64) {
    let gamma = 2.0 * 0.05 / 0.04;
    let u = K * gamma / (1.0 + gamma);
    (u, if s <= u { K - s } else { (K - u) * (s / u).powf(-gamma) })
}

fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn estimates_do_not_depend_on_the_thread_count() {
    let d = Dynamics::from(&crash(0.2));
    let omega = DiscountFn::constant(0.05).unwrap();
    let cfg = McConfig::new(2000, 11);
    let interval = StopInterval::new(0.0, 12.0).unwrap();
    let est = |threads| {
        run_in_pool(threads, || stopped_value(&d, &omega, &Claim::put(K), interval, 15.0, &cfg).unwrap())
    };
    let (a, b) = (est(1), est(4));
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

#[test]
fn discounted_price_is_a_martingale() {
    for m in [bs(), crash(0.0), crash(0.2)] {
        let d = Dynamics::from(&m);
        let omega = DiscountFn::constant(0.05).unwrap();
        let t = 1.0;
        let finals: Vec<f64> = (0..4000u64)
            .map(|seed| {
                let p = simulate_path(&d, &omega, 10.0, 1e-2, t, seed).unwrap();
                (*p.logprices.last().unwrap()).exp()
            })
            .collect();
        let n = finals.len() as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let exact = 10.0 * (d.psi(1.0) * t).exp();
        assert!((mean - exact).abs() < 4.0 * (var / n).sqrt(), "{mean} vs {exact}");
        assert!((d.psi(1.0) - 0.05).abs() < 1e-12);
    }
}

#[test]
fn path_records_jumps_and_the_discount_integral() {
    let d = Dynamics::from(&crash(0.0));
    let omega = DiscountFn::constant(0.05).unwrap();
    let p = simulate_path(&d, &omega, 10.0, 1e-2, 5.0, 3).unwrap();
    assert!((p.discount_integral - 0.25).abs() < 1e-12);
    assert_eq!(p.times.len(), p.logprices.len());
    assert_eq!(p.times.len(), p.jump_flags.len());
    assert!(p.times.windows(2).all(|w| w[1] >= w[0]));
    assert!(p.jump_flags.iter().any(|&j| j), "rate 6 over 5 years without a jump");
    // Without diffusion the path only rises between jumps.
    for i in 1..p.times.len() {
        if !p.jump_flags[i] {
            assert!(p.logprices[i] >= p.logprices[i - 1]);
        }
    }
    let stop = p.stopped_at.unwrap();
    assert_eq!(stop.reason, StopReason::Horizon);
    assert!((stop.time - 5.0).abs() < 1e-12);
}

#[test]
fn classical_put_matches_closed_form() {
    let d = Dynamics::from(&bs());
    let omega = DiscountFn::constant(0.05).unwrap();
    let (u, _) = classical(K);
    let interval = StopInterval::new(0.0, u).unwrap();
    for s in [18.0, 24.0] {
        let est = stopped_value(&d, &omega, &Claim::put(K), interval, s, &McConfig::new(20_000, 5)).unwrap();
        let exact = classical(s).1;
        assert!(est.z_score(exact, 0.0).abs() < 4.0, "s {s}: {} ± {} vs {exact}", est.mean, est.stderr);
        assert!(!est.unreliable);
    }
}

#[test]
fn crash_put_with_constant_rate_matches_closed_form() {
    let m = crash(0.0);
    let (r, lambda, phi, mu) = (0.05, m.lambda(), m.phi(), m.mu());
    // Negative root of μθ² + (μφ − λ − r)θ − rφ.
    let b = mu * phi - lambda - r;
    let gamma = (-b - (b * b + 4.0 * mu * r * phi).sqrt()) / (2.0 * mu);
    let u = 12.0;
    let value = |s: f64| (K - u * phi / (phi + 1.0)) * (1.0 + gamma / phi) * (s / u).powf(gamma);
    let d = Dynamics::from(&m);
    let omega = DiscountFn::constant(r).unwrap();
    let interval = StopInterval::new(0.0, u).unwrap();
    let s = 1.3 * u;
    let est = stopped_value(&d, &omega, &Claim::put(K), interval, s, &McConfig::new(20_000, 9)).unwrap();
    let exact = value(s);
    assert!(est.z_score(exact, 0.0).abs() < 4.0, "{} ± {} vs {exact}", est.mean, est.stderr);
}

#[test]
fn antithetic_pairs_agree_with_plain_sampling() {
    let d = Dynamics::from(&bs());
    let omega = DiscountFn::constant(0.05).unwrap();
    let interval = StopInterval::new(0.0, classical(K).0).unwrap();
    let plain = stopped_value(&d, &omega, &Claim::put(K), interval, 20.0, &McConfig::new(20_000, 1)).unwrap();
    let cfg = McConfig {
        antithetic: true,
        ..McConfig::new(20_000, 2)
    };
    let anti = stopped_value(&d, &omega, &Claim::put(K), interval, 20.0, &cfg).unwrap();
    assert_eq!(anti.n_paths, 20_000);
    assert!(anti.z_score(plain.mean, plain.stderr).abs() < 4.0);
}

#[test]
fn start_inside_the_stopping_set_is_exact() {
    let d = Dynamics::from(&bs());
    let omega = DiscountFn::constant(0.05).unwrap();
    let interval = StopInterval::new(5.0, 15.0).unwrap();
    let est = stopped_value(&d, &omega, &Claim::put(K), interval, 12.0, &McConfig::new(10, 0)).unwrap();
    assert_eq!(est.mean, 8.0);
    assert_eq!(est.stderr, 0.0);
}

#[test]
fn call_and_dual_put_agree_with_closed_form() {
    let (mu, r, sigma) = (0.02, 0.05, 0.2);
    let m = LevyModel::black_scholes(mu, sigma).unwrap();
    let p = PricingProblem::call(m, DiscountFn::constant(r).unwrap(), K).unwrap();
    let (s, l_c) = (15.0, 30.0);
    let (call, put) = symmetry_check(&p, s, l_c, f64::INFINITY, &McConfig::new(20_000, 4)).unwrap();
    let a = 0.5 * sigma * sigma;
    let b = mu - a;
    let beta = (-b + (b * b + 4.0 * a * r).sqrt()) / (2.0 * a);
    let exact = (l_c - K) * (s / l_c).powf(beta);
    assert!(call.z_score(exact, 0.0).abs() < 4.0, "call {} ± {} vs {exact}", call.mean, call.stderr);
    assert!(put.z_score(exact, 0.0).abs() < 4.0, "put {} ± {} vs {exact}", put.mean, put.stderr);
}

#[test]
fn bermudan_values_rise_with_exercise_dates() {
    let d = Dynamics::from(&bs());
    let omega = DiscountFn::constant(0.05).unwrap();
    let grid = DpGrid::new(K * (-3.0f64).exp(), K * 4.0f64.exp(), 0.01).unwrap();
    let values: Vec<Vec<f64>> = [4usize, 16, 64]
        .iter()
        .map(|&n| {
            let res = bermudan_dp(&d, &omega, &Claim::put(K), 10.0, n, grid).unwrap();
            [17.0, 20.0, 25.0].iter().map(|&s| res.value_at(s).unwrap()).collect()
        })
        .collect();
    for (i, s) in [17.0, 20.0, 25.0].iter().enumerate() {
        assert!(values[0][i] <= values[1][i] + 1e-6 && values[1][i] <= values[2][i] + 1e-6);
        assert!(values[2][i] <= classical(*s).1 + 1e-3, "s {s}: {} vs {}", values[2][i], classical(*s).1);
        assert!(values[2][i] >= (K - s).max(0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_exponent_is_the_tilted_reflection(
        zeta in -0.2f64..0.2,
        sigma in 0.0f64..0.5,
        lambda in 0.0f64..8.0,
        phi in 0.5f64..5.0,
        theta in -2.0f64..0.45,
    ) {
        let m = LevyModel::new(zeta, sigma, lambda, phi).unwrap();
        let d = Dynamics::dual_of(&m);
        prop_assert_eq!(d.direction, JumpDirection::Up);
        let expected = m.psi(1.0 - theta) - m.psi(1.0);
        prop_assert!((d.psi(theta) - expected).abs() < 1e-10 * (1.0 + expected.abs()));
    }

    #[test]
    fn payoffs_are_nonnegative_and_kinked_at_the_strike(k in 0.1f64..100.0, s in 0.0f64..200.0) {
        let (p, c) = (Claim::put(k), Claim::call(k));
        prop_assert!(p.value(s) >= 0.0 && c.value(s) >= 0.0);
        prop_assert!((c.value(s) - p.value(s) - (s - k)).abs() < 1e-12 * (1.0 + s + k));
    }

    #[test]
    fn constant_discount_integrates_exactly(r in 0.0f64..0.2, t in 0.1f64..10.0, seed in 0u64..1000) {
        let d = Dynamics::from(&crash(0.2));
        let p = simulate_path(&d, &DiscountFn::constant(r).unwrap(), 10.0, 0.05, t, seed).unwrap();
        prop_assert!((p.discount_integral - r * t).abs() < 1e-10 * (1.0 + r * t));
    }
}
