//! Put-call symmetry for the perpetual call stopped on `[l_c, u_c]`.
//!
//! Under the measure with density `e^{X_t − ψ(1)t}` the process
//! `Ŝ = sK/S` is again exponential Lévy with upward exponential jumps, and
//! `e^{−∫ω}(S_τ − K)^+ = (S_τ/s) e^{−∫ω}(s − Ŝ_τ)^+`. The call from spot `s`
//! is therefore the put with strike `s` from spot `K` under `Ŝ` with
//! discount `ω(sK/y) − ψ(1)`, stopped on `[sK/u_c, sK/l_c]`.

use crate::discount::DiscountFn;
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::mc::{Dynamics, StopInterval};

use super::{Payoff, PricingProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct DualProblem {
    pub dynamics: Dynamics,
    pub omega: DiscountFn,
    pub spot: f64,
    pub strike: f64,
    pub interval: StopInterval,
    pub warnings: Vec<String>,
}

impl DualProblem {
    /// The dual as a put problem; only without jumps, where `Ŝ` is again
    /// Black–Scholes with drift `−μ`.
    pub fn as_put_problem(&self) -> Result<PricingProblem> {
        if self.dynamics.lambda > 0.0 {
            return Err(Error::invalid(
                "DualProblem::as_put_problem",
                "upward jumps are outside the put pricer",
            ));
        }
        let d = &self.dynamics;
        let model = LevyModel::black_scholes(d.zeta + 0.5 * d.sigma * d.sigma, d.sigma)?;
        PricingProblem::put(model, self.omega.clone(), self.strike)
    }
}

pub fn putcall_transform(problem: &PricingProblem, s: f64, l_c: f64, u_c: f64) -> Result<DualProblem> {
    const OP: &str = "putcall_transform";
    if problem.payoff != Payoff::Call {
        return Err(Error::invalid(OP, "needs a call problem"));
    }
    if !(s > 0.0 && l_c >= 0.0 && u_c > l_c) {
        return Err(Error::invalid(OP, "need s > 0 and 0 <= l_c < u_c"));
    }
    let m = &problem.model;
    let psi1 = m.psi(1.0);
    let k = problem.strike;
    let omega = DiscountFn::reflected(problem.omega.clone(), s * k, psi1)?;
    let hi = if l_c > 0.0 { s * k / l_c } else { f64::INFINITY };
    let mut warnings = Vec::new();
    if omega.lower_bound() < 0.0 {
        warnings.push(format!(
            "dual discount is negative somewhere (lower bound {:.4})",
            omega.lower_bound()
        ));
    }
    Ok(DualProblem {
        dynamics: Dynamics::dual_of(m),
        omega,
        spot: k,
        strike: s,
        interval: StopInterval::new(s * k / u_c, hi)?,
        warnings,
    })
}
