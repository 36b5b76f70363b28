//! Monte Carlo and dynamic-programming oracles for the analytic prices.
//!
//! Paths of `X_t = log S_t = log s + ζt + σB_t ∓ Σ Y_i` are advanced exactly
//! over each sub-step; only the discount integral `∫ω(S_w)dw` is
//! discretised, by the trapezoid rule. Each path draws from its own ChaCha
//! stream, so results do not depend on the thread count.

mod dp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::discount::DiscountFn;
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::numerics::pairwise_sum;
use crate::pricer::{putcall_transform, Payoff, PricingProblem};

pub use dp::{bermudan_dp, DpGrid, DpResult};

/// Sign of the exponential jumps of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpDirection {
    Down,
    Up,
}

/// Drift, volatility and exponential jump stream of `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    pub zeta: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub phi: f64,
    pub direction: JumpDirection,
}

impl From<&LevyModel> for Dynamics {
    fn from(m: &LevyModel) -> Self {
        Dynamics {
            zeta: m.zeta(),
            sigma: m.sigma(),
            lambda: m.lambda(),
            phi: m.phi(),
            direction: JumpDirection::Down,
        }
    }
}

impl Dynamics {
    /// `−X` under the measure tilted by `e^{X_t − ψ(1)t}`: drift
    /// `−(ζ + σ²)`, upward jumps at rate `λφ/(φ+1)` with `Exp(φ+1)` sizes.
    pub fn dual_of(m: &LevyModel) -> Self {
        let s2 = m.sigma() * m.sigma();
        Dynamics {
            zeta: -(m.zeta() + s2),
            sigma: m.sigma(),
            lambda: m.lambda() * m.phi() / (m.phi() + 1.0),
            phi: m.phi() + 1.0,
            direction: JumpDirection::Up,
        }
    }

    /// `log E e^{θ X_1}`; infinite past the jump-size moment bound.
    pub fn psi(&self, theta: f64) -> f64 {
        let jump = match self.direction {
            JumpDirection::Down => self.phi / (self.phi + theta) - 1.0,
            JumpDirection::Up if theta >= self.phi => return f64::INFINITY,
            JumpDirection::Up => self.phi / (self.phi - theta) - 1.0,
        };
        let jump = if self.lambda > 0.0 { self.lambda * jump } else { 0.0 };
        self.zeta * theta + 0.5 * self.sigma * self.sigma * theta * theta + jump
    }

    fn validate(&self, op: &'static str) -> Result<()> {
        if !(self.sigma >= 0.0 && self.lambda >= 0.0 && self.zeta.is_finite()) {
            return Err(Error::invalid(op, "invalid dynamics"));
        }
        if self.lambda > 0.0 && !(self.phi > 0.0) {
            return Err(Error::invalid(op, "jump rate needs phi > 0"));
        }
        Ok(())
    }
}

/// Payoff and strike of the simulated claim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Claim {
    pub payoff: Payoff,
    pub strike: f64,
}

impl Claim {
    pub fn put(strike: f64) -> Self {
        Claim {
            payoff: Payoff::Put,
            strike,
        }
    }
    pub fn call(strike: f64) -> Self {
        Claim {
            payoff: Payoff::Call,
            strike,
        }
    }
    pub fn value(&self, s: f64) -> f64 {
        match self.payoff {
            Payoff::Put => (self.strike - s).max(0.0),
            Payoff::Call => (s - self.strike).max(0.0),
        }
    }
    /// An upper bound of the payoff reachable from `s`.
    fn bound(&self, s: f64) -> f64 {
        match self.payoff {
            Payoff::Put => self.strike,
            Payoff::Call => s.max(self.strike),
        }
    }
}

/// Stopping set `[lo, hi]`; `hi` may be infinite and `lo` zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopInterval {
    pub lo: f64,
    pub hi: f64,
}

impl StopInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::invalid("StopInterval", "need 0 <= lo <= hi"));
        }
        Ok(StopInterval { lo, hi })
    }

    fn log_bounds(&self) -> (f64, f64) {
        let lo = if self.lo > 0.0 { self.lo.ln() } else { f64::NEG_INFINITY };
        (lo, self.hi.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Continuous entry into the interval.
    HitInterval,
    /// Continuous entry from above through `u` under downward jumps.
    Creeped,
    /// A jump landed inside the interval.
    JumpedIn,
    /// `t_max` reached.
    Horizon,
    /// The discount factor made any further payoff negligible.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub time: f64,
    pub price: f64,
    pub reason: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub logprices: Vec<f64>,
    pub jump_flags: Vec<bool>,
    pub discount_integral: f64,
    pub stopped_at: Option<Stop>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Fraction of paths censored at `t_max`.
    pub horizon_truncation_mass: f64,
    /// Truncation mass above 1%.
    pub unreliable: bool,
}

impl McEstimate {
    /// `|a − b|` in units of the combined standard error.
    pub fn z_score(&self, other: f64, other_stderr: f64) -> f64 {
        let se = (self.stderr * self.stderr + other_stderr * other_stderr).sqrt();
        if se == 0.0 {
            if self.mean == other {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other).abs() / se
        }
    }
}

/// Simulation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    /// Smallest sub-step, used next to the stopping set.
    pub dt: f64,
    /// Largest sub-step, used far from the stopping set.
    pub dt_far: f64,
    pub t_max: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// Paths stop once `bound · e^{−∫ω} < exhaustion · strike`.
    pub exhaustion: f64,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        McConfig {
            n_paths,
            dt: 1e-3,
            dt_far: 0.5,
            t_max: 1000.0,
            seed,
            antithetic: false,
            exhaustion: 1e-8,
        }
    }

    /// Horizon with `e^{−ω̲ t} K < 10⁻⁴` when `ω̲ > 0`.
    pub fn default_t_max(omega: &DiscountFn, strike: f64) -> Option<f64> {
        let lb = omega.lower_bound();
        (lb > 0.0).then(|| (strike / 1e-4).ln().max(1.0) / lb)
    }

    fn validate(&self, op: &'static str) -> Result<()> {
        if self.n_paths == 0 || !(self.dt > 0.0) || !(self.dt_far >= self.dt) || !(self.t_max > 0.0) {
            return Err(Error::invalid(op, "need n_paths > 0 and 0 < dt <= dt_far, t_max > 0"));
        }
        Ok(())
    }
}

struct Walker<'a> {
    dynamics: &'a Dynamics,
    omega: &'a DiscountFn,
    interval: Option<(f64, f64)>,
    claim: Option<&'a Claim>,
    dt: f64,
    dt_far: f64,
    t_max: f64,
    adaptive: bool,
    exhaustion: f64,
}

struct Outcome {
    stop: Stop,
    integral: f64,
}

impl Walker<'_> {
    fn inside(&self, x: f64) -> bool {
        matches!(self.interval, Some((lo, hi)) if x >= lo && x <= hi)
    }

    fn distance(&self, x: f64) -> f64 {
        match self.interval {
            Some((_, hi)) if x > hi => x - hi,
            Some((lo, _)) if x < lo => lo - x,
            Some(_) => 0.0,
            None => f64::INFINITY,
        }
    }

    fn rate(&self, x: f64) -> f64 {
        self.omega.rate(x.exp())
    }

    fn walk<F: FnMut(f64, f64, bool)>(&self, x0: f64, rng: &mut ChaCha8Rng, sign: f64, mut record: F) -> Outcome {
        let d = self.dynamics;
        let mut t = 0.0;
        let mut x = x0;
        let mut integral = 0.0;
        record(t, x, false);
        let stop = |time, x: f64, reason| Stop {
            time,
            price: x.exp(),
            reason,
        };
        if self.inside(x) {
            return Outcome {
                stop: stop(0.0, x, StopReason::HitInterval),
                integral,
            };
        }
        let draw_wait = |rng: &mut ChaCha8Rng| -> f64 {
            if d.lambda > 0.0 {
                rng.sample::<f64, _>(Exp1) / d.lambda
            } else {
                f64::INFINITY
            }
        };
        let mut next_jump = draw_wait(rng);
        let mut w0 = self.rate(x);
        loop {
            if t >= self.t_max {
                return Outcome {
                    stop: stop(t, x, StopReason::Horizon),
                    integral,
                };
            }
            if let Some(claim) = self.claim {
                if claim.bound(x.exp()) * (-integral).exp() < self.exhaustion * claim.strike {
                    return Outcome {
                        stop: stop(t, x, StopReason::Exhausted),
                        integral,
                    };
                }
            }
            let mut h = if self.adaptive {
                let dist = self.distance(x);
                let by_noise = if d.sigma > 0.0 {
                    (dist / (6.0 * d.sigma)).powi(2)
                } else {
                    f64::INFINITY
                };
                let by_drift = if d.zeta != 0.0 { 0.5 * dist / d.zeta.abs() } else { f64::INFINITY };
                by_noise.min(by_drift).clamp(self.dt, self.dt_far)
            } else {
                self.dt
            };
            h = h.min(next_jump - t).min(self.t_max - t).max(0.0);
            let z: f64 = if d.sigma > 0.0 {
                sign * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let x1 = x + d.zeta * h + d.sigma * h.sqrt() * z;
            if let Some((lo, hi)) = self.interval {
                let mut crossing = None;
                if x > hi && x1 <= hi {
                    crossing = Some((hi, (x - hi) / (x - x1)));
                } else if x < lo && x1 >= lo {
                    crossing = Some((lo, (lo - x) / (x1 - x)));
                } else if d.sigma > 0.0 && h > 0.0 {
                    let level = if x > hi { hi } else { lo };
                    if level.is_finite() {
                        let p = (-2.0 * (x - level) * (x1 - level) / (d.sigma * d.sigma * h)).exp();
                        if rng.random::<f64>() < p {
                            crossing = Some((level, 0.5));
                        }
                    }
                }
                if let Some((level, frac)) = crossing {
                    let hh = frac * h;
                    integral += 0.5 * hh * (w0 + self.rate(level));
                    t += hh;
                    record(t, level, false);
                    let reason = if level == hi && d.direction == JumpDirection::Down {
                        StopReason::Creeped
                    } else {
                        StopReason::HitInterval
                    };
                    return Outcome {
                        stop: stop(t, level, reason),
                        integral,
                    };
                }
            }
            let w1 = self.rate(x1);
            integral += 0.5 * h * (w0 + w1);
            t += h;
            x = x1;
            w0 = w1;
            record(t, x, false);
            if t >= next_jump {
                let y: f64 = rng.sample::<f64, _>(Exp1) / d.phi;
                x += match d.direction {
                    JumpDirection::Down => -y,
                    JumpDirection::Up => y,
                };
                w0 = self.rate(x);
                record(t, x, true);
                next_jump = t + draw_wait(rng);
                if self.inside(x) {
                    return Outcome {
                        stop: stop(t, x, StopReason::JumpedIn),
                        integral,
                    };
                }
            }
        }
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One path on a fixed `dt` grid (plus jump instants) up to `t_max`.
pub fn simulate_path(
    dynamics: &Dynamics,
    omega: &DiscountFn,
    s0: f64,
    dt: f64,
    t_max: f64,
    seed: u64,
) -> Result<PathSample> {
    dynamics.validate("simulate_path")?;
    if !(s0 > 0.0 && dt > 0.0 && t_max > 0.0) {
        return Err(Error::invalid("simulate_path", "need s0 > 0, dt > 0, t_max > 0"));
    }
    let walker = Walker {
        dynamics,
        omega,
        interval: None,
        claim: None,
        dt,
        dt_far: dt,
        t_max,
        adaptive: false,
        exhaustion: 0.0,
    };
    let mut rng = path_rng(seed, 0);
    let (mut times, mut logprices, mut jump_flags) = (Vec::new(), Vec::new(), Vec::new());
    let out = walker.walk(s0.ln(), &mut rng, 1.0, |t, x, j| {
        times.push(t);
        logprices.push(x);
        jump_flags.push(j);
    });
    Ok(PathSample {
        times,
        logprices,
        jump_flags,
        discount_integral: out.integral,
        stopped_at: Some(out.stop),
    })
}

/// `E_s[e^{−∫_0^τ ω} g(S_τ)]` for `τ` the entry time into `interval`.
pub fn stopped_value(
    dynamics: &Dynamics,
    omega: &DiscountFn,
    claim: &Claim,
    interval: StopInterval,
    s0: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    const OP: &str = "stopped_value";
    dynamics.validate(OP)?;
    cfg.validate(OP)?;
    if !(s0 > 0.0) {
        return Err(Error::invalid(OP, "s0 must be positive"));
    }
    if s0 >= interval.lo && s0 <= interval.hi {
        return Ok(McEstimate {
            mean: claim.value(s0),
            stderr: 0.0,
            n_paths: cfg.n_paths,
            horizon_truncation_mass: 0.0,
            unreliable: false,
        });
    }
    let walker = Walker {
        dynamics,
        omega,
        interval: Some(interval.log_bounds()),
        claim: Some(claim),
        dt: cfg.dt,
        dt_far: cfg.dt_far,
        t_max: cfg.t_max,
        adaptive: true,
        exhaustion: cfg.exhaustion,
    };
    let x0 = s0.ln();
    let one = |rng: &mut ChaCha8Rng, sign: f64| -> (f64, bool) {
        let out = walker.walk(x0, rng, sign, |_, _, _| {});
        match out.stop.reason {
            StopReason::Horizon => (0.0, true),
            StopReason::Exhausted => (0.0, false),
            _ => ((-out.integral.min(700.0)).exp() * claim.value(out.stop.price), false),
        }
    };
    let samples: Vec<(f64, usize)> = if cfg.antithetic {
        (0..cfg.n_paths.div_ceil(2))
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(cfg.seed, i as u64);
                let mut twin = rng.clone();
                let (a, ta) = one(&mut rng, 1.0);
                let (b, tb) = one(&mut twin, -1.0);
                (0.5 * (a + b), ta as usize + tb as usize)
            })
            .collect()
    } else {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let (v, t) = one(&mut path_rng(cfg.seed, i as u64), 1.0);
                (v, t as usize)
            })
            .collect()
    };
    let values: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let censored: usize = samples.iter().map(|s| s.1).sum();
    let n = values.len() as f64;
    let mean = pairwise_sum(&values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if values.len() > 1 {
        pairwise_sum(&dev) / (n - 1.0)
    } else {
        0.0
    };
    let paths = if cfg.antithetic { 2 * values.len() } else { values.len() };
    let mass = censored as f64 / paths as f64;
    Ok(McEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_paths: paths,
        horizon_truncation_mass: mass,
        unreliable: mass > 0.01,
    })
}

/// Both sides of the put-call identity for the call stopped on `[l_c, u_c]`
/// from spot `s`: the call under the original dynamics and the dual put.
pub fn symmetry_check(
    problem: &PricingProblem,
    s: f64,
    l_c: f64,
    u_c: f64,
    cfg: &McConfig,
) -> Result<(McEstimate, McEstimate)> {
    let dual = putcall_transform(problem, s, l_c, u_c)?;
    let call = stopped_value(
        &Dynamics::from(&problem.model),
        &problem.omega,
        &Claim::call(problem.strike),
        StopInterval::new(l_c, u_c)?,
        s,
        cfg,
    )?;
    let dual_cfg = McConfig {
        seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        ..*cfg
    };
    let put = stopped_value(
        &dual.dynamics,
        &dual.omega,
        &Claim::put(dual.strike),
        dual.interval,
        dual.spot,
        &dual_cfg,
    )?;
    Ok((call, put))
}
