//! Bermudan approximation on a uniform `log s` grid.
//!
//! One exercise period moves `x` by a Gaussian increment plus a compound
//! Poisson sum of exponential jumps. The transition is projected on hat
//! functions of the grid: the Gaussian part in closed form, each jump layer
//! by Gauss–Legendre quadrature of the Gamma density. Killing over a period
//! uses `ω` at the midpoint of the start and end nodes.

use rayon::prelude::*;

use crate::discount::DiscountFn;
use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, norm_cdf, norm_pdf};

use super::{Claim, Dynamics, JumpDirection};

/// Poisson layers are added until the remaining mass is below this.
const POISSON_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpGrid {
    pub x_lo: f64,
    pub h: f64,
    pub n: usize,
}

impl DpGrid {
    /// Nodes from `ln s_lo` to at least `ln s_hi` with step `h`.
    pub fn new(s_lo: f64, s_hi: f64, h: f64) -> Result<Self> {
        if !(s_lo > 0.0 && s_hi > s_lo && h > 0.0) {
            return Err(Error::invalid("DpGrid", "need 0 < s_lo < s_hi and h > 0"));
        }
        let x_lo = s_lo.ln();
        let n = ((s_hi.ln() - x_lo) / h).ceil() as usize + 1;
        Ok(DpGrid { x_lo, h, n })
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h
    }

    pub fn x_hi(&self) -> f64 {
        self.node(self.n - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpResult {
    pub grid: DpGrid,
    /// Values at the grid nodes at time zero.
    pub values: Vec<f64>,
    /// `1 − Σ` of the one-period transition weights.
    pub truncated_mass: f64,
    /// Jump layers kept in the transition.
    pub jump_layers: usize,
}

impl DpResult {
    /// Linear interpolation in `log s`.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        let g = &self.grid;
        let t = (s.ln() - g.x_lo) / g.h;
        if !(t >= 0.0 && t <= (g.n - 1) as f64) {
            return Err(Error::OutsideDomain {
                op: "DpResult::value_at",
                value: s,
                lo: g.x_lo.exp(),
                hi: g.x_hi().exp(),
            });
        }
        let i = (t.floor() as usize).min(g.n - 2);
        let f = t - i as f64;
        Ok((1.0 - f) * self.values[i] + f * self.values[i + 1])
    }
}

/// `E[(Y − a)^+]` for `Y ~ N(m, s²)`.
fn call_moment(m: f64, s: f64, a: f64) -> f64 {
    if s == 0.0 {
        return (m - a).max(0.0);
    }
    let z = (m - a) / s;
    (m - a) * norm_cdf(z) + s * norm_pdf(z)
}

/// `E[hat(Y/h − k)]` for `k ∈ [k_lo, k_lo + len)`.
fn gaussian_weights(m: f64, s: f64, h: f64) -> (i64, Vec<f64>) {
    let k_lo = ((m - 10.0 * s) / h).floor() as i64 - 1;
    let k_hi = ((m + 10.0 * s) / h).ceil() as i64 + 1;
    let w = (k_lo..=k_hi)
        .map(|k| {
            let a = k as f64 * h;
            let w = (call_moment(m, s, a - h) - 2.0 * call_moment(m, s, a) + call_moment(m, s, a + h)) / h;
            // Far tails cancel to rounding noise of either sign.
            w.max(0.0)
        })
        .collect();
    (k_lo, w)
}

/// Hat projection of the `Gamma(k, φ)` law on `{0, h, 2h, …}` up to `y_max`.
fn gamma_weights(k: usize, phi: f64, h: f64, y_max: f64, rule: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
    let cells = (y_max / h).ceil() as usize;
    let mut w = vec![0.0; cells + 1];
    let kf = k as f64;
    let log_norm = kf * phi.ln() - libm::lgamma(kf);
    for j in 0..cells {
        let a = j as f64 * h;
        for (node, weight) in rule.0.iter().zip(&rule.1) {
            let f = 0.5 * (node + 1.0);
            let y = a + f * h;
            let dens = (log_norm + (kf - 1.0) * y.ln() - phi * y).exp();
            let mass = 0.5 * h * weight * dens;
            w[j] += (1.0 - f) * mass;
            w[j + 1] += f * mass;
        }
    }
    w
}

/// One-period transition weights on offsets `o_lo ..`.
fn transition(d: &Dynamics, period: f64, h: f64, span: f64) -> (i64, Vec<f64>, usize) {
    let (g_lo, gw) = gaussian_weights(d.zeta * period, d.sigma * period.sqrt(), h);
    let rate = d.lambda * period;
    let mut poisson = (-rate).exp();
    let mut layers: Vec<(f64, Vec<f64>)> = vec![(poisson, vec![1.0])];
    let mut cum = poisson;
    let rule = gauss_legendre(8);
    let mut k = 0;
    while rate > 0.0 && 1.0 - cum > POISSON_TAIL && k < 500 {
        k += 1;
        poisson *= rate / k as f64;
        cum += poisson;
        let kf = k as f64;
        let y_max = ((kf + 12.0 * kf.sqrt() + 30.0) / d.phi).min(span + 1.0);
        layers.push((poisson, gamma_weights(k, d.phi, h, y_max, &rule)));
    }
    let j_max = layers.iter().map(|l| l.1.len() - 1).max().unwrap_or(0) as i64;
    let (o_lo, o_hi) = match d.direction {
        JumpDirection::Down => (g_lo - j_max, g_lo + gw.len() as i64 - 1),
        JumpDirection::Up => (g_lo, g_lo + gw.len() as i64 - 1 + j_max),
    };
    let mut q = vec![0.0; (o_hi - o_lo + 1) as usize];
    for (p, r) in &layers {
        for (gi, g) in gw.iter().enumerate() {
            for (j, rj) in r.iter().enumerate() {
                let o = g_lo + gi as i64
                    + match d.direction {
                        JumpDirection::Down => -(j as i64),
                        JumpDirection::Up => j as i64,
                    };
                q[(o - o_lo) as usize] += p * g * rj;
            }
        }
    }
    (o_lo, q, k)
}

/// Bermudan option with `n_dates` equally spaced exercise dates in
/// `(0, horizon]` plus exercise at time zero.
///
/// Below the grid the value is extended by the payoff, above it by the last
/// node value.
pub fn bermudan_dp(
    dynamics: &Dynamics,
    omega: &DiscountFn,
    claim: &Claim,
    horizon: f64,
    n_dates: usize,
    grid: DpGrid,
) -> Result<DpResult> {
    const OP: &str = "bermudan_dp";
    dynamics.validate(OP)?;
    if !(horizon > 0.0) || !n_dates.is_power_of_two() || grid.n < 2 {
        return Err(Error::invalid(OP, "need horizon > 0, n_dates = 2^Ξ and two nodes"));
    }
    let period = horizon / n_dates as f64;
    let h = grid.h;
    let span = grid.x_hi() - grid.x_lo;
    let (o_lo, q, layers) = transition(dynamics, period, h, span);
    let mass: f64 = q.iter().sum();
    // kill[2i + o − o_lo] is the factor at the midpoint `x_lo + (2i + o)h/2`.
    let k_lo = o_lo;
    let k_len = 2 * grid.n as i64 + q.len() as i64;
    let kill: Vec<f64> = (0..k_len)
        .map(|k| {
            let x = grid.x_lo + (k + k_lo) as f64 * 0.5 * h;
            (-period * omega.rate(x.exp())).exp()
        })
        .collect();
    let payoff: Vec<f64> = (0..grid.n).map(|i| claim.value(grid.node(i).exp())).collect();
    let mut v = payoff.clone();
    for _ in 0..n_dates {
        let prev = v;
        let last = prev[grid.n - 1];
        v = (0..grid.n)
            .into_par_iter()
            .map(|i| {
                let mut pv = 0.0;
                for (oi, w) in q.iter().enumerate() {
                    let o = o_lo + oi as i64;
                    let j = i as i64 + o;
                    let target = if j < 0 {
                        claim.value((grid.x_lo + j as f64 * h).exp())
                    } else if j >= grid.n as i64 {
                        last
                    } else {
                        prev[j as usize]
                    };
                    pv += w * kill[(2 * i as i64 + o - k_lo) as usize] * target;
                }
                pv.max(payoff[i])
            })
            .collect();
    }
    Ok(DpResult {
        grid,
        values: v,
        truncated_mass: 1.0 - mass,
        jump_layers: layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dynamics(sigma: f64, lambda: f64, phi: f64) -> Dynamics {
        Dynamics {
            zeta: 0.01,
            sigma,
            lambda,
            phi,
            direction: JumpDirection::Down,
        }
    }

    #[test]
    fn transition_conserves_mass() {
        for (sigma, lambda) in [(0.2, 0.0), (0.2, 0.5), (0.0, 0.5), (0.05, 3.0)] {
            let (_, q, _) = transition(&dynamics(sigma, lambda, 2.0), 0.1, 0.005, 30.0);
            let m: f64 = q.iter().sum();
            assert!((m - 1.0).abs() < 1e-8, "sigma {sigma} lambda {lambda}: {m}");
            assert!(q.iter().all(|&w| w >= -1e-15));
        }
    }

    #[test]
    fn transition_mean_matches_levy_exponent() {
        let d = dynamics(0.2, 0.5, 2.0);
        let (o_lo, q, _) = transition(&d, 0.25, 0.005, 30.0);
        let mean: f64 = q.iter().enumerate().map(|(i, w)| w * (o_lo + i as i64) as f64 * 0.005).sum();
        let exact = 0.25 * (d.zeta - d.lambda / d.phi);
        assert!((mean - exact).abs() < 1e-7, "{mean} vs {exact}");
    }

    #[test]
    fn european_put_matches_black_scholes() {
        let (r, sigma, strike, t) = (0.05, 0.2, 20.0, 1.0);
        let d = Dynamics {
            zeta: r - 0.5 * sigma * sigma,
            sigma,
            lambda: 0.0,
            phi: 1.0,
            direction: JumpDirection::Down,
        };
        let omega = DiscountFn::constant(r).unwrap();
        let grid = DpGrid::new(strike * (-4.0f64).exp(), strike * 6.0f64.exp(), 0.005).unwrap();
        let res = bermudan_dp(&d, &omega, &Claim::put(strike), t, 1, grid).unwrap();
        for s in [21.0, 23.0, 26.0] {
            let d1 = ((s / strike).ln() + (r + 0.5 * sigma * sigma) * t) / (sigma * t.sqrt());
            let d2 = d1 - sigma * t.sqrt();
            let bs = strike * (-r * t).exp() * norm_cdf(-d2) - s * norm_cdf(-d1);
            let v = res.value_at(s).unwrap();
            assert!((v - bs).abs() < 1e-3, "s {s}: {v} vs {bs}");
        }
    }
}
