//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1 and 2 are expected to fail (see the decision ledger); the
//! exit status is zero when exactly the expected failures occur and flags
//! an expected failure that starts passing.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use omega_pricer::mc::{bermudan_dp, stopped_value, symmetry_check, Claim, DpGrid, Dynamics, McConfig, StopInterval};
use omega_pricer::pricer::{optimize_boundaries_with, putcall_transform, PricerOptions, UpperBranch};
use omega_pricer::scale::{ode_solve_crash, ode_solve_crash_sigma, renewal_solve_w, renewal_solve_z, LogGrid, Which};
use omega_pricer::{martingale_drift, optimize_boundaries, DiscountFn, LevyModel, PricingProblem, PricingResult};

const K: f64 = 20.0;
const EXPECTED_FAILURES: [usize; 2] = [1, 2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn rational_problem() -> PricingProblem {
    let m = LevyModel::black_scholes(0.05, 0.2).unwrap();
    PricingProblem::put(m, DiscountFn::rational(0.001, 0.01).unwrap(), K).unwrap()
}

fn crash_model(sigma: f64) -> LevyModel {
    LevyModel::new(martingale_drift(0.05, 6.0, 2.0), sigma, 6.0, 2.0).unwrap()
}

fn crash_problem(sigma: f64) -> PricingProblem {
    PricingProblem::put(crash_model(sigma), DiscountFn::linear(0.1).unwrap(), K).unwrap()
}

fn classical_problem() -> PricingProblem {
    let m = LevyModel::black_scholes(0.05, 0.2).unwrap();
    PricingProblem::put(m, DiscountFn::constant(0.05).unwrap(), K).unwrap()
}

/// `(u*, V)` of the perpetual put with constant rate in Black–Scholes.
fn classical_exact() -> (f64, impl Fn(f64) -> f64) {
    let gamma = 2.0 * 0.05 / (0.2 * 0.2);
    let u = K * gamma / (1.0 + gamma);
    (u, move |s: f64| if s <= u { K - s } else { (K - u) * (s / u).powf(-gamma) })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Cases {
    rational: (PricingResult, Duration),
    crash: (PricingResult, Duration),
    crash_sigma: PricingResult,
    classical: PricingResult,
}

fn criterion_1(c: &Cases) -> Outcome {
    let (r, t) = &c.rational;
    let b = r.boundaries;
    let pass = (7.18..=7.28).contains(&b.l) && (8.29..=8.39).contains(&b.u) && t.as_secs_f64() < 30.0;
    let frob = optimize_boundaries_with(
        &rational_problem(),
        &PricerOptions {
            upper_branch: UpperBranch::FrobeniusAtZero,
            ..PricerOptions::default()
        },
    )
    .map(|f| format!("{:.4}", f.boundaries.u))
    .unwrap_or_else(|e| e.to_string());
    outcome(
        pass,
        format!(
            "l*={:.4} u*={:.4} in {:.2?}; target l* in [7.18, 7.28], u* in [8.29, 8.39]; \
             u* with the small-s Frobenius branch instead of the solution decaying at infinity: {frob}",
            b.l, b.u, t
        ),
    )
}

fn criterion_2(c: &Cases) -> Outcome {
    let (r, t) = &c.crash;
    let b = r.boundaries;
    let pass = (4.51..=4.61).contains(&b.u) && b.l == 0.0 && t.as_secs_f64() < 30.0;
    outcome(
        pass,
        format!(
            "u*={:.4} l*={} in {:.2?}; target u* in [4.51, 4.61]; continuity residual {:.1e}",
            b.u, b.l, t, r.fit.continuity_u
        ),
    )
}

fn criterion_3(c: &Cases) -> Outcome {
    let (u, v) = classical_exact();
    let r = &c.classical;
    let du = rel(r.boundaries.u, u);
    let dv = r
        .curve
        .iter()
        .filter(|p| p.0 > r.boundaries.u.max(u))
        .map(|&(s, val)| rel(val, v(s)))
        .fold(0.0, f64::max);
    outcome(
        du < 1e-3 && dv < 1e-4,
        format!("u*={:.6} vs {u:.6} (rel {du:.1e}); curve sup-rel {dv:.1e}", r.boundaries.u),
    )
}

fn criterion_4(c: &Cases) -> Outcome {
    let u = c.crash.0.boundaries.u;
    let omega = DiscountFn::linear(0.1).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for sigma in [0.0, 0.2] {
        let m = crash_model(sigma);
        let run = || -> omega_pricer::Result<f64> {
            let xi = omega.shift_tilt(u, &m, 0.0)?;
            let grid = LogGrid::with_step(3.0, 2e-3)?;
            let d = m.psi_roots()?;
            let ode = if sigma == 0.0 { ode_solve_crash } else { ode_solve_crash_sigma };
            let pairs = [
                (renewal_solve_w(&d, &xi, &grid)?, ode(&m, &xi, &grid, Which::W)?),
                (renewal_solve_z(&d, &xi, &grid)?, ode(&m, &xi, &grid, Which::Z)?),
            ];
            Ok(pairs
                .iter()
                .flat_map(|(a, b)| a.iter().zip(b).filter(|p| *p.1 != 0.0).map(|(a, b)| rel(*a, *b)))
                .fold(0.0, f64::max))
        };
        match run() {
            Ok(e) => {
                worst = worst.max(e);
                parts.push(format!("σ={sigma}: {e:.1e}"));
            }
            Err(e) => {
                worst = f64::INFINITY;
                parts.push(format!("σ={sigma}: {e}"));
            }
        }
    }
    outcome(
        worst < 1e-6,
        format!("sup-rel of W and Z on [0, 3] at u={u:.4}: {}", parts.join(", ")),
    )
}

fn criterion_5(c: &Cases) -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, problem, result) in [
        ("crash", crash_problem(0.0), &c.crash.0),
        ("classical", classical_problem(), &c.classical),
    ] {
        let u = result.boundaries.u;
        let d = Dynamics::from(&problem.model);
        let interval = StopInterval::new(result.boundaries.l, u).unwrap();
        for (i, f) in [1.1, 1.5, 2.0].into_iter().enumerate() {
            let s = f * u;
            let cfg = McConfig::new(200_000, 17 + i as u64);
            match stopped_value(&d, &problem.omega, &Claim::put(K), interval, s, &cfg) {
                Ok(est) => {
                    let v = result.value(s);
                    let z = est.z_score(v, 0.0);
                    let r = rel(est.mean, v);
                    pass &= z.abs() < 3.0 && r < 0.01 && !est.unreliable;
                    parts.push(format!("{name} s={s:.3}: z={z:+.2} rel={r:.1e}"));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{name} s={s:.3}: {e}"));
                }
            }
        }
    }
    let elapsed = t.elapsed();
    pass &= elapsed.as_secs_f64() < 120.0;
    outcome(pass, format!("{} in {elapsed:.1?}", parts.join("; ")))
}

fn criterion_6(c: &Cases) -> Outcome {
    let (a, b) = (
        c.crash.0.diagnostics.convexity_margin,
        c.classical.diagnostics.convexity_margin,
    );
    outcome(
        a >= -1e-8 && b >= -1e-8,
        format!("convexity margin crash {a:.2e}, classical {b:.2e}"),
    )
}

fn criterion_7(c: &Cases) -> Outcome {
    let cases = [
        ("rational", &c.rational.0, true),
        ("crash", &c.crash.0, false),
        ("crash σ=0.2", &c.crash_sigma, true),
        ("classical", &c.classical, true),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r, diffusive) in cases {
        let f = r.fit;
        let cont = f.continuity_l.abs().max(f.continuity_u.abs());
        pass &= cont < 1e-6;
        let smooth = f.derivative_l.abs().max(f.derivative_u.abs());
        if diffusive {
            pass &= smooth < 1e-4;
            parts.push(format!("{name}: continuity {cont:.1e}, smooth {smooth:.1e}"));
        } else {
            parts.push(format!("{name}: continuity {cont:.1e}, derivative gap at u* {:.4} (reported)", f.derivative_u));
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8(c: &Cases) -> Outcome {
    let (a, b) = (
        c.rational.0.diagnostics.hjb_residual,
        c.classical.diagnostics.hjb_residual,
    );
    outcome(a < 1e-3 && b < 1e-3, format!("HJB residual rational {a:.1e}, classical {b:.1e}"))
}

fn criterion_9() -> Outcome {
    let (mu, r, sigma) = (0.02, 0.05, 0.2);
    let model = LevyModel::black_scholes(mu, sigma).unwrap();
    // Perpetual call boundary K β/(β − 1), β the positive root of
    // σ²β²/2 + (μ − σ²/2)β − r = 0.
    let (a, b) = (0.5 * sigma * sigma, mu - 0.5 * sigma * sigma);
    let beta = (-b + (b * b + 4.0 * a * r).sqrt()) / (2.0 * a);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (s, k)) in [(15.0, 20.0), (20.0, 20.0), (30.0, 20.0), (10.0, 15.0), (40.0, 25.0)]
        .into_iter()
        .enumerate()
    {
        let call = PricingProblem::call(model, DiscountFn::constant(r).unwrap(), k).unwrap();
        let l_c = k * beta / (beta - 1.0);
        let run = || -> omega_pricer::Result<(f64, f64)> {
            let (c_est, p_est) = symmetry_check(&call, s, l_c, f64::INFINITY, &McConfig::new(50_000, 100 + i as u64))?;
            let z = c_est.z_score(p_est.mean, p_est.stderr);
            let dual = putcall_transform(&call, s, l_c, f64::INFINITY)?.as_put_problem()?;
            let u = optimize_boundaries(&dual)?.boundaries.u;
            Ok((z, (l_c * u - s * k).abs() / (s * k)))
        };
        match run() {
            Ok((z, gap)) => {
                pass &= z.abs() < 3.0 && gap < 0.01;
                parts.push(format!("(s={s}, K={k}): z={z:+.2} boundary gap {gap:.1e}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("(s={s}, K={k}): {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let p = classical_problem();
    let d = Dynamics::from(&p.model);
    let (_, exact) = classical_exact();
    let spots = [15.0, 18.0, 20.0, 25.0, 32.0];
    let grid = DpGrid::new(K * (-4.0f64).exp(), K * 6.0f64.exp(), 0.005).unwrap();
    let horizons = [5.0, 10.0, 20.0];
    let xis = [4u32, 6, 8];
    let mut table = vec![vec![vec![0.0; spots.len()]; xis.len()]; horizons.len()];
    for (ti, &t) in horizons.iter().enumerate() {
        for (xi, &e) in xis.iter().enumerate() {
            match bermudan_dp(&d, &p.omega, &Claim::put(K), t, 1 << e, grid) {
                Ok(res) => {
                    for (si, &s) in spots.iter().enumerate() {
                        table[ti][xi][si] = res.value_at(s).unwrap_or(f64::NAN);
                    }
                }
                Err(e) => return outcome(false, format!("T={t}, Ξ={e}: failed")),
            }
        }
    }
    let tol = 1e-3;
    let mut pass = true;
    for si in 0..spots.len() {
        let cap = exact(spots[si]) + tol;
        for ti in 0..horizons.len() {
            for xi in 0..xis.len() {
                let v = table[ti][xi][si];
                pass &= v.is_finite() && v <= cap;
                if xi > 0 {
                    pass &= v >= table[ti][xi - 1][si] - tol;
                }
            }
        }
        // Along (Ξ, T) = (4, 5), (6, 10), (8, 20) the exercise dates are nested.
        for k in 1..3 {
            pass &= table[k][k][si] >= table[k - 1][k - 1][si] - tol;
        }
    }
    let gaps: Vec<String> = spots
        .iter()
        .enumerate()
        .map(|(si, &s)| format!("{:.1e}", exact(s) - table[2][2][si]))
        .collect();
    outcome(
        pass,
        format!("gap to the perpetual value at Ξ=8, T=20 for s in {spots:?}: [{}]", gaps.join(", ")),
    )
}

fn main() -> ExitCode {
    let rational = single_threaded(|| timed(|| optimize_boundaries(&rational_problem())));
    let crash = single_threaded(|| timed(|| optimize_boundaries(&crash_problem(0.0))));
    let cases = match (rational, crash, optimize_boundaries(&crash_problem(0.2)), optimize_boundaries(&classical_problem())) {
        ((Ok(a), ta), (Ok(b), tb), Ok(c), Ok(d)) => Cases {
            rational: (a, ta),
            crash: (b, tb),
            crash_sigma: c,
            classical: d,
        },
        _ => {
            println!("FAIL: a reference case could not be priced");
            return ExitCode::FAILURE;
        }
    };
    let checks: Vec<(usize, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "rational discount in Black-Scholes", Box::new(|| criterion_1(&cases))),
        (2, "linear discount with exponential crashes", Box::new(|| criterion_2(&cases))),
        (3, "classical collapse", Box::new(|| criterion_3(&cases))),
        (4, "renewal vs ODE scale functions", Box::new(|| criterion_4(&cases))),
        (5, "Monte Carlo at the optimum", Box::new(|| criterion_5(&cases))),
        (6, "convexity", Box::new(|| criterion_6(&cases))),
        (7, "continuous and smooth fit", Box::new(|| criterion_7(&cases))),
        (8, "HJB residual", Box::new(|| criterion_8(&cases))),
        (9, "put-call symmetry", Box::new(criterion_9)),
        (10, "Bermudan convergence", Box::new(criterion_10)),
    ];
    let mut ok = true;
    for (n, name, check) in checks {
        let o = check();
        let expected = EXPECTED_FAILURES.contains(&n);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = match (o.pass, expected) {
            (false, true) => " (expected)",
            (true, true) => " (UNEXPECTED PASS: update the expected failures)",
            _ => "",
        };
        println!("criterion {n:>2} {verdict}{note}: {name}: {}", o.detail);
        ok &= o.pass != expected;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
