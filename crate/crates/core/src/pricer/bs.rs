//! Black–Scholes branch: `σ²s²/2 h'' + μ s h' − ω(s) h = 0` solved in
//! `x = log s` through the Riccati equation for `y = h'/h`, so the tables
//! hold `log h` and never overflow.

use crate::discount::DiscountFn;
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::numerics::hermite;
use crate::ode::Dopri5;

/// Table spacing in `log s`.
const DX: f64 = 1e-3;
/// Start of the integration when `ω` has a limit at the end.
const FAR: f64 = 40.0;

/// Roots `d₋ ≤ d₊` of `σ²/2 d² + ζ d − c = 0`, the exponents of `h` where
/// `ω ≡ c`.
pub fn euler_roots(sigma: f64, zeta: f64, c: f64) -> Option<(f64, f64)> {
    let a = 0.5 * sigma * sigma;
    let disc = zeta * zeta + 4.0 * a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Cancellation-free pair.
    let q = -0.5 * (zeta + zeta.signum() * sq);
    let (r1, r2) = if q == 0.0 {
        let r = (c / a).sqrt();
        (-r, r)
    } else {
        (q / a, -c / q)
    };
    Some((r1.min(r2), r1.max(r2)))
}

/// Which solution is used above the upper boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpperBranch {
    /// The solution decaying fastest as `s → ∞`, which is the discounted
    /// first-passage transform of the diffusion.
    #[default]
    Recessive,
    /// The solution that behaves like `s^{d₋}` as `s → 0`, continued
    /// upwards. It coincides with the recessive one only when `ω` is
    /// constant.
    FrobeniusAtZero,
}

/// `log h` and `y = (log h)'` on a uniform grid in `x = log s`.
#[derive(Debug, Clone, PartialEq)]
pub struct HBranch {
    x0: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
    logh: Vec<f64>,
}

impl HBranch {
    fn node(&self, k: usize) -> f64 {
        self.x0 + k as f64 * DX
    }

    /// `(x_lo, x_hi)` covered by the table.
    pub fn x_range(&self) -> (f64, f64) {
        (self.x0, self.node(self.y.len() - 1))
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let t = (x - self.x0) / DX;
        if t < 0.0 || t > (self.y.len() - 1) as f64 {
            return None;
        }
        Some((t.floor() as usize).min(self.y.len() - 2))
    }

    /// `log h(e^x)`; extended linearly with the end slope off the table.
    pub fn log_h(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(k) => {
                hermite(
                    self.node(k),
                    self.node(k + 1),
                    self.logh[k],
                    self.logh[k + 1],
                    self.y[k],
                    self.y[k + 1],
                    x,
                )
                .0
            }
            None => {
                let (lo, hi) = self.x_range();
                let n = self.y.len() - 1;
                if x < lo {
                    self.logh[0] + self.y[0] * (x - lo)
                } else {
                    self.logh[n] + self.y[n] * (x - hi)
                }
            }
        }
    }

    /// `s h'(s)/h(s)` at `s = e^x`; constant off the table.
    pub fn log_slope(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(k) => {
                hermite(
                    self.node(k),
                    self.node(k + 1),
                    self.y[k],
                    self.y[k + 1],
                    self.dy[k],
                    self.dy[k + 1],
                    x,
                )
                .0
            }
            None if x < self.x0 => self.y[0],
            None => self.y[self.y.len() - 1],
        }
    }

    /// Largest mismatch between a five-point derivative of the `y` table and
    /// the Riccati right-hand side, relative to `1 + |y'|`.
    pub fn collocation_residual(&self) -> f64 {
        let n = self.y.len();
        (2..n - 2)
            .map(|k| {
                let fd = (self.y[k - 2] - 8.0 * self.y[k - 1] + 8.0 * self.y[k + 1] - self.y[k + 2])
                    / (12.0 * DX);
                (fd - self.dy[k]).abs() / (1.0 + self.dy[k].abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Solutions for the regions below `l` and above `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct HTables {
    /// Increasing solution used on `(0, l)`.
    pub lower: HBranch,
    /// Decreasing solution used on `(u, ∞)`.
    pub upper: HBranch,
}

struct Riccati<'a> {
    omega: &'a DiscountFn,
    sigma2: f64,
    zeta: f64,
}

impl Riccati<'_> {
    fn rhs(&self, x: f64, y: f64) -> f64 {
        2.0 / self.sigma2 * (self.omega.rate(x.exp()) - self.zeta * y) - y * y
    }

    fn roots(&self, c: f64, op: &'static str) -> Result<(f64, f64)> {
        euler_roots(self.sigma2.sqrt(), self.zeta, c).ok_or_else(|| {
            Error::invalid(
                op,
                format!("ω = {c} is below −ζ²/(2σ²); the value is infinite"),
            )
        })
    }

    /// Integrates from `start` with `y(start) = y0` and tabulates on the grid
    /// `x0 + k DX`, `k < n`.
    fn branch(&self, start: f64, y0: f64, x0: f64, n: usize) -> Result<HBranch> {
        let solver = Dopri5::new(1e-12, 1e-14);
        let mut f = |x: f64, s: &[f64; 2]| [self.rhs(x, s[0]), s[0]];
        let x_end = x0 + (n - 1) as f64 * DX;
        let forward = start <= x0;
        let first = if forward { x0 } else { x_end };
        let mut h = 0.0;
        let at_first = solver.integrate(&mut f, start, [y0, 0.0], first, &mut h)?;
        let nodes: Vec<f64> = if forward {
            (0..n).map(|k| x0 + k as f64 * DX).collect()
        } else {
            (0..n).rev().map(|k| x0 + k as f64 * DX).collect()
        };
        let mut sol = solver.solve_on_nodes(f, at_first, &nodes)?;
        if !forward {
            sol.reverse();
        }
        let y: Vec<f64> = sol.iter().map(|s| s[0]).collect();
        let logh = sol.iter().map(|s| s[1]).collect();
        let dy = y
            .iter()
            .enumerate()
            .map(|(k, &v)| self.rhs(x0 + k as f64 * DX, v))
            .collect();
        Ok(HBranch { x0, y, dy, logh })
    }
}

/// Both solutions on `s ∈ [s_lo, s_hi]`, with the default upper branch.
pub fn solve_h_ode(model: &LevyModel, omega: &DiscountFn, s_range: (f64, f64)) -> Result<HTables> {
    solve_h_ode_with(model, omega, s_range, UpperBranch::Recessive)
}

pub fn solve_h_ode_with(
    model: &LevyModel,
    omega: &DiscountFn,
    s_range: (f64, f64),
    upper: UpperBranch,
) -> Result<HTables> {
    const OP: &str = "solve_h_ode";
    if model.sigma() <= 0.0 {
        return Err(Error::invalid(OP, "the h-equation needs σ > 0"));
    }
    if model.has_jumps() {
        return Err(Error::invalid(OP, "the h-equation describes the jump-free model"));
    }
    let (s_lo, s_hi) = s_range;
    if !(s_lo > 0.0 && s_hi > s_lo && s_hi.is_finite()) {
        return Err(Error::invalid(OP, "need 0 < s_lo < s_hi < ∞"));
    }
    if omega.hull().is_some() {
        // Tables are extended flat; the equation itself only needs ω on the range.
        omega.eval(s_lo)?;
        omega.eval(s_hi)?;
    }
    let ric = Riccati {
        omega,
        sigma2: model.sigma() * model.sigma(),
        zeta: model.zeta(),
    };
    let x0 = s_lo.ln();
    let x1 = s_hi.ln();
    let n = ((x1 - x0) / DX).ceil() as usize + 1;

    let (lo_start, lo_rate) = match omega.limit_at_zero() {
        Some(c) => ((-FAR).min(x0 - 1.0), c),
        None => (x0 - 5.0, omega.rate((x0 - 5.0).exp())),
    };
    let (_, d_plus) = ric.roots(lo_rate, OP)?;
    let lower = ric.branch(lo_start, d_plus, x0, n)?;

    let upper = match upper {
        UpperBranch::Recessive => {
            let x_top = x0 + (n - 1) as f64 * DX;
            let (start, rate) = match omega.limit_at_infinity() {
                Some(c) => (FAR.max(x_top + 1.0), c),
                None => (x_top + 3.0, omega.rate((x_top + 3.0).exp())),
            };
            let (d_minus, _) = ric.roots(rate, OP)?;
            ric.branch(start, d_minus, x0, n)?
        }
        UpperBranch::FrobeniusAtZero => {
            // Unstable forward, so start only as deep as the flat region needs.
            let c = omega.limit_at_zero().ok_or_else(|| {
                Error::invalid(OP, "the Frobenius branch needs a limit of ω at 0")
            })?;
            let (d_minus, _) = ric.roots(c, OP)?;
            let start = (-15.0f64).min(x0 - 1.0);
            // y = d + a₁s + O(s²) with a₁(1 + 2ζ/σ² + 2d) = 2ω'(0)/σ².
            let slope = omega.derivative(start.exp()).unwrap_or(0.0);
            let den = 1.0 + 2.0 * ric.zeta / ric.sigma2 + 2.0 * d_minus;
            let a1 = if den.abs() > 1e-8 { 2.0 * slope / (ric.sigma2 * den) } else { 0.0 };
            ric.branch(start, d_minus + a1 * start.exp(), x0, n)?
        }
    };
    Ok(HTables { lower, upper })
}
