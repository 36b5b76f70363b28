//! Closed-form companions of two worked cases, used to cross-check the
//! numerical routes: the rational discount `ω(s) = −C/(s+1) − D` in
//! Black–Scholes, and the linear discount `ω(s) = Cs` with exponential
//! jumps and no diffusion.

use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::specfun::{
    gauss_2f1, kummer_ratio_limit, HypergeometricParams, KummerCombination, KummerParams,
};

/// Solutions `h_i(s) = s^{d_i} ₂F₁(a_i, b_i; c_i; −s)` of
/// `σ²s²/2 h'' + μ s h' − ω h = 0` for `ω(s) = −C/(s+1) − D`, and the
/// solution recessive at infinity,
/// `s^{e} ₂F₁(a_1, a_1 − c_1 + 1; a_1 − b_1 + 1; −1/s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalBsSolution {
    /// `d_1 < d_2`: the exponents at `s → 0`.
    pub d: [f64; 2],
    pub params: [HypergeometricParams; 2],
    /// Exponent of the recessive solution at infinity.
    pub e: f64,
    pub recessive_params: HypergeometricParams,
}

pub fn rational_bs_solution(model: &LevyModel, c: f64, d: f64) -> Result<RationalBsSolution> {
    const OP: &str = "rational_bs_solution";
    if model.has_jumps() || model.sigma() <= 0.0 {
        return Err(Error::invalid(OP, "needs the Black–Scholes model"));
    }
    let s2 = model.sigma() * model.sigma();
    let mu = model.mu();
    let l = 0.5 - mu / s2;
    let m2 = l * l - 2.0 * d / s2;
    let g2 = l * l - 2.0 * (c + d) / s2;
    if m2 < 0.0 || g2 < 0.0 {
        return Err(Error::invalid(OP, "complex exponents: the value is infinite"));
    }
    let (m, g) = (m2.sqrt(), g2.sqrt());
    let p1 = HypergeometricParams::new(m - g, -(m + g), 1.0 - 2.0 * g);
    let p2 = HypergeometricParams::new(g - m, m + g, 1.0 + 2.0 * g);
    let rec = HypergeometricParams::new(p1.a, p1.a - p1.c + 1.0, p1.a - p1.b + 1.0);
    Ok(RationalBsSolution {
        d: [l - g, l + g],
        params: [p1, p2],
        e: l - m,
        recessive_params: rec,
    })
}

impl RationalBsSolution {
    /// `h_i(s)` for `i ∈ {0, 1}`.
    pub fn frobenius(&self, i: usize, s: f64) -> Result<f64> {
        Ok(s.powf(self.d[i]) * gauss_2f1(self.params[i], -s)?)
    }

    pub fn recessive(&self, s: f64) -> Result<f64> {
        Ok(s.powf(self.e) * gauss_2f1(self.recessive_params, -1.0 / s)?)
    }

    /// Value-matching constants `K_i = (K − b)/h(b)` for the branch `h` at
    /// boundary `b`.
    pub fn matching_constant(h_at_boundary: f64, strike: f64, boundary: f64) -> f64 {
        (strike - boundary) / h_at_boundary
    }
}

/// `lim 𝒵/𝒲` for `ω(s) = C s` shifted to the boundary `u`, `σ = 0`.
///
/// In `t = (Cu/μ) e^x` the second-order equation for `𝒲` and `𝒵` becomes
/// Kummer's equation with `a = 1 + φ`, `b = 1 − γ_2`, so both are
/// combinations of `₁F₁(a; b; t)` and `t^{1−b} ₁F₁(a−b+1; 2−b; t)` and the
/// limit is the ratio of their leading coefficients.
pub fn kummer_crash_limit(model: &LevyModel, c: f64, u: f64) -> Result<f64> {
    const OP: &str = "kummer_crash_limit";
    if model.sigma() != 0.0 || !model.has_jumps() {
        return Err(Error::invalid(OP, "needs σ = 0 and exponential jumps"));
    }
    if !(c > 0.0 && u > 0.0) {
        return Err(Error::invalid(OP, "needs C > 0 and u > 0"));
    }
    let d = model.psi_roots()?;
    let mu = model.mu();
    let g2 = d.gammas()[1];
    let u2 = d.upsilons()[1];
    let a_scale = c * u / mu;
    let first = KummerParams::new(1.0 + model.phi(), 1.0 - g2);
    let second = KummerParams::new(first.a - first.b + 1.0, 2.0 - first.b);
    let xi0 = c * u;
    let w = KummerCombination::from_initial_conditions(
        first,
        second,
        a_scale,
        g2,
        1.0 / mu,
        xi0 / (mu * mu) + u2 * g2,
    )?;
    let z = KummerCombination::from_initial_conditions(first, second, a_scale, g2, 1.0, xi0 / mu)?;
    kummer_ratio_limit(&z, &w)
}
