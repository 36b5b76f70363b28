//! Checks on a priced curve: fit at the boundaries, the generator equation
//! `𝒜V = ωV` off the stopping set and convexity.

use crate::numerics::{gauss_legendre, integrate_gl};

use super::{PricingProblem, PricingResult};

/// Step in `log s` of the generator stencils.
const GEN_STEP: f64 = 2e-3;

/// `(V'(l−) − g'(l), V'(u+) − g'(u))`; the first entry is zero when `l = 0`.
pub fn smooth_fit_residual(result: &PricingResult, _problem: &PricingProblem) -> (f64, f64) {
    (result.fit.derivative_l, result.fit.derivative_u)
}

/// Minimum second difference of the curve over `h²`, relative to `max |V|`.
pub fn convexity_margin(result: &PricingResult) -> f64 {
    let c = &result.curve;
    if c.len() < 3 {
        return 0.0;
    }
    let h = c[1].0 - c[0].0;
    let scale = c.iter().map(|p| p.1.abs()).fold(0.0, f64::max).max(1e-300);
    c.windows(3)
        .map(|w| (w[0].1 - 2.0 * w[1].1 + w[2].1) / (h * h))
        .fold(f64::INFINITY, f64::min)
        / scale
}

/// `𝒜V(s) − ω(s)V(s)` with
/// `𝒜f(s) = σ²s²/2 f'' + (ζ + σ²/2) s f' + λ ∫ (f(s e^{−y}) − f(s)) φ e^{−φy} dy`.
fn generator_gap(result: &PricingResult, problem: &PricingProblem, s: f64) -> f64 {
    let m = &problem.model;
    let v = |x: f64| result.value(x.exp());
    let x = s.ln();
    let d = GEN_STEP;
    let (f_2m, f_m, f_0, f_p, f_2p) = (v(x - 2.0 * d), v(x - d), v(x), v(x + d), v(x + 2.0 * d));
    let fx = (f_2m - 8.0 * f_m + 8.0 * f_p - f_2p) / (12.0 * d);
    let fxx = (-f_2m + 16.0 * f_m - 30.0 * f_0 + 16.0 * f_p - f_2p) / (12.0 * d * d);
    let mut a = 0.5 * m.sigma() * m.sigma() * fxx + m.zeta() * fx;
    if m.has_jumps() {
        let phi = m.phi();
        let rule = gauss_legendre(8);
        let b = result.boundaries;
        let mut cuts = vec![0.0];
        for edge in [b.u, b.l] {
            if edge > 0.0 && s > edge {
                cuts.push((s / edge).ln());
            }
        }
        let y_max = 40.0 / phi;
        cuts.push(y_max);
        cuts.retain(|&c| c <= y_max);
        cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mut jump = 0.0;
        for w in cuts.windows(2) {
            let panels = ((w[1] - w[0]) / 0.1).ceil().max(1.0) as usize;
            jump += integrate_gl(
                |y| (result.value(s * (-y).exp()) - f_0) * phi * (-phi * y).exp(),
                w[0],
                w[1],
                panels,
                &rule,
            );
        }
        a += m.lambda() * jump;
    }
    a - problem.omega.rate(s) * f_0
}

fn in_stopping_set(result: &PricingResult, s: f64) -> bool {
    let b = result.boundaries;
    s >= b.l && s <= b.u
}

/// Largest `|𝒜V − ωV|/(1 + |V|)` over samples in the continuation region
/// whose stencil stays clear of the boundaries.
pub fn hjb_residual(result: &PricingResult, problem: &PricingProblem, samples: &[f64]) -> f64 {
    let b = result.boundaries;
    let clear = |s: f64| {
        let x = s.ln();
        [b.l, b.u]
            .iter()
            .filter(|&&e| e > 0.0)
            .all(|&e| (x - e.ln()).abs() > 3.0 * GEN_STEP)
    };
    samples
        .iter()
        .filter(|&&s| s > 0.0 && !in_stopping_set(result, s) && clear(s))
        .map(|&s| generator_gap(result, problem, s).abs() / (1.0 + result.value(s).abs()))
        .fold(0.0, f64::max)
}

/// Largest `max(𝒜V − ωV, 0)/(1 + |V|)` over samples inside `[l, u]`,
/// the variational-inequality side.
pub fn hjb_stopping_violation(result: &PricingResult, problem: &PricingProblem, samples: &[f64]) -> f64 {
    let b = result.boundaries;
    samples
        .iter()
        .filter(|&&s| {
            let x = s.ln();
            in_stopping_set(result, s)
                && (b.l == 0.0 || x - b.l.ln() > 3.0 * GEN_STEP)
                && b.u.ln() - x > 3.0 * GEN_STEP
        })
        .map(|&s| generator_gap(result, problem, s).max(0.0) / (1.0 + result.value(s).abs()))
        .fold(0.0, f64::max)
}
