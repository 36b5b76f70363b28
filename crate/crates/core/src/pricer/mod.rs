//! Value functions `v(s, l, u)` of the perpetual put stopped on entry into
//! `[l, u]`, the search for the optimal interval, and the checks that come
//! with it: continuous and smooth fit, the generator equation, convexity.

mod bs;
mod closed_form;
mod crash;
mod diagnostics;
mod symmetry;

use std::sync::Arc;

use crate::discount::DiscountFn;
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::numerics::{brent, golden_max};

pub use bs::{euler_roots, solve_h_ode, solve_h_ode_with, HBranch, HTables, UpperBranch};
pub use closed_form::{kummer_crash_limit, rational_bs_solution, RationalBsSolution};
pub use crash::{HTable, OneSided, TwoSided};
pub use diagnostics::{convexity_margin, hjb_residual, hjb_stopping_violation, smooth_fit_residual};
pub use symmetry::{putcall_transform, DualProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payoff {
    Put,
    Call,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingProblem {
    pub model: LevyModel,
    pub omega: DiscountFn,
    pub strike: f64,
    pub payoff: Payoff,
}

impl PricingProblem {
    pub fn new(model: LevyModel, omega: DiscountFn, strike: f64, payoff: Payoff) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(Error::invalid("PricingProblem", "strike must be positive"));
        }
        Ok(PricingProblem {
            model,
            omega,
            strike,
            payoff,
        })
    }

    pub fn put(model: LevyModel, omega: DiscountFn, strike: f64) -> Result<Self> {
        Self::new(model, omega, strike, Payoff::Put)
    }

    pub fn call(model: LevyModel, omega: DiscountFn, strike: f64) -> Result<Self> {
        Self::new(model, omega, strike, Payoff::Call)
    }

    fn require_put(&self, op: &'static str) -> Result<()> {
        match self.payoff {
            Payoff::Put => Ok(()),
            Payoff::Call => Err(Error::invalid(op, "calls are priced through putcall_transform")),
        }
    }

    pub fn payoff_at(&self, s: f64) -> f64 {
        match self.payoff {
            Payoff::Put => (self.strike - s).max(0.0),
            Payoff::Call => (s - self.strike).max(0.0),
        }
    }
}

/// Stopping interval `[l, u]` with `0 ≤ l ≤ u ≤ K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundaries {
    pub l: f64,
    pub u: f64,
}

impl Boundaries {
    pub fn new(l: f64, u: f64, strike: f64) -> Result<Self> {
        if !(l >= 0.0 && l <= u && u <= strike * (1.0 + 1e-12)) {
            return Err(Error::invalid(
                "Boundaries",
                format!("need 0 <= l <= u <= K, got l = {l}, u = {u}, K = {strike}"),
            ));
        }
        Ok(Boundaries { l, u })
    }
}

/// Options of the boundary search and of the reported curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricerOptions {
    pub upper_branch: UpperBranch,
    /// Samples of the reported curve on `(0, 2K]`.
    pub curve_points: usize,
    /// Coarse candidates per boundary before refinement.
    pub coarse_points: usize,
}

impl Default for PricerOptions {
    fn default() -> Self {
        PricerOptions {
            upper_branch: UpperBranch::Recessive,
            curve_points: 512,
            coarse_points: 64,
        }
    }
}

/// `v(·, l, u)` for one model family.
#[derive(Debug, Clone)]
pub enum ValueFunction {
    BlackScholes {
        b: Boundaries,
        strike: f64,
        tables: Arc<HTables>,
    },
    OneSided(OneSided),
    TwoSided(TwoSided),
}

impl ValueFunction {
    pub fn boundaries(&self) -> Boundaries {
        match self {
            ValueFunction::BlackScholes { b, .. } => *b,
            ValueFunction::OneSided(v) => Boundaries { l: 0.0, u: v.u },
            ValueFunction::TwoSided(v) => Boundaries { l: v.l, u: v.u },
        }
    }

    fn strike(&self) -> f64 {
        match self {
            ValueFunction::BlackScholes { strike, .. } => *strike,
            ValueFunction::OneSided(v) => v.strike,
            ValueFunction::TwoSided(v) => v.strike,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            ValueFunction::BlackScholes { b, strike, tables } => {
                if s > b.u {
                    let up = &tables.upper;
                    (strike - b.u) * (up.log_h(s.ln()) - up.log_h(b.u.ln())).exp()
                } else if s >= b.l {
                    strike - s
                } else {
                    let lo = &tables.lower;
                    (strike - b.l) * (lo.log_h(s.ln()) - lo.log_h(b.l.ln())).exp()
                }
            }
            ValueFunction::OneSided(v) => v.value(s),
            ValueFunction::TwoSided(v) => v.value(s),
        }
    }

    /// Continuation formula evaluated at the boundary itself, minus the
    /// payoff there: `(at l, at u)`.
    pub fn continuity_gaps(&self) -> (f64, f64) {
        let k = self.strike();
        match self {
            ValueFunction::BlackScholes { .. } => (0.0, 0.0),
            ValueFunction::OneSided(v) => (0.0, v.upper(0.0) - (k - v.u)),
            ValueFunction::TwoSided(v) => (0.0, v.upper(0.0) - (k - v.u)),
        }
    }

    /// `V'(l−) + 1` and `V'(u+) + 1`; zero at `l = 0`.
    pub fn slope_gaps(&self) -> (f64, f64) {
        let k = self.strike();
        match self {
            ValueFunction::BlackScholes { b, tables, .. } => {
                let gl = if b.l > 0.0 {
                    (k - b.l) * tables.lower.log_slope(b.l.ln()) / b.l + 1.0
                } else {
                    0.0
                };
                let gu = (k - b.u) * tables.upper.log_slope(b.u.ln()) / b.u + 1.0;
                (gl, gu)
            }
            ValueFunction::OneSided(v) => (0.0, v.slope_at_u() + 1.0),
            ValueFunction::TwoSided(v) => (v.slope_at_l() + 1.0, v.slope_at_u() + 1.0),
        }
    }
}

/// Residuals of the fit conditions at the boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitResiduals {
    pub continuity_l: f64,
    pub continuity_u: f64,
    /// `V'(l−) − g'(l)`.
    pub derivative_l: f64,
    /// `V'(u+) − g'(u)`.
    pub derivative_u: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Minimum scaled second difference of the curve.
    pub convexity_margin: f64,
    /// Scaled sup-norm of `𝒜V − ωV` over continuation samples.
    pub hjb_residual: f64,
    /// `max(𝒜V − ωV, 0)` over stopping samples.
    pub hjb_stopping_violation: f64,
    /// `min (V − g)` over the curve.
    pub dominance_gap: f64,
    /// One-sided finite-difference slopes `V'(l−)`, `V'(u+)` from the probes.
    pub fd_slope_l: f64,
    pub fd_slope_u: f64,
    /// `u* = K`: immediate exercise everywhere below the strike.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PricingResult {
    pub boundaries: Boundaries,
    pub strike: f64,
    /// `(s, V(s))` on a uniform grid of `(0, 2K]`.
    pub curve: Vec<(f64, f64)>,
    /// `(s, V(s))` at `b e^{±kδ}`, `k = 1, 2`, next to each positive boundary.
    pub probes: Vec<(f64, f64)>,
    pub fit: FitResiduals,
    pub diagnostics: Diagnostics,
    value_fn: ValueFunction,
}

/// Offset of the probes in `log s`.
pub const PROBE_STEP: f64 = 1e-4;

impl PricingResult {
    pub fn value(&self, s: f64) -> f64 {
        self.value_fn.value(s)
    }

    pub fn value_function(&self) -> &ValueFunction {
        &self.value_fn
    }

    pub fn payoff(&self, s: f64) -> f64 {
        (self.strike - s).max(0.0)
    }

    /// Curve as CSV with header `s,value,payoff`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,value,payoff\n");
        for &(s, v) in &self.curve {
            out.push_str(&format!("{s:.10e},{v:.12e},{:.12e}\n", self.payoff(s)));
        }
        out
    }
}

fn s_hi(strike: f64) -> f64 {
    2.5 * strike
}

/// Builds the value function for given boundaries.
pub fn value_function(problem: &PricingProblem, b: Boundaries) -> Result<ValueFunction> {
    value_function_with(problem, b, &PricerOptions::default())
}

pub fn value_function_with(
    problem: &PricingProblem,
    b: Boundaries,
    opts: &PricerOptions,
) -> Result<ValueFunction> {
    problem.require_put("value_function")?;
    let b = Boundaries::new(b.l, b.u, problem.strike)?;
    let k = problem.strike;
    if !problem.model.has_jumps() {
        let tables = bs_tables(problem, opts.upper_branch)?;
        return Ok(ValueFunction::BlackScholes {
            b,
            strike: k,
            tables,
        });
    }
    if b.l == 0.0 {
        let one = OneSided::build(&problem.model, &problem.omega, k, b.u, s_hi(k))?;
        Ok(ValueFunction::OneSided(one))
    } else {
        let hh = Arc::new(HTable::build(&problem.model, &problem.omega, s_hi(k))?);
        let two = TwoSided::build(&problem.model, &problem.omega, k, b.l, b.u, s_hi(k), hh)?;
        Ok(ValueFunction::TwoSided(two))
    }
}

fn bs_tables(problem: &PricingProblem, branch: UpperBranch) -> Result<Arc<HTables>> {
    let k = problem.strike;
    Ok(Arc::new(solve_h_ode_with(
        &problem.model,
        &problem.omega,
        (k * 1e-6, 4.0 * k),
        branch,
    )?))
}

/// `v(s, l, u)` in the Black–Scholes model.
pub fn value_bs(problem: &PricingProblem, b: Boundaries, s: f64) -> Result<f64> {
    problem.require_put("value_bs")?;
    if problem.model.has_jumps() || problem.model.sigma() <= 0.0 {
        return Err(Error::invalid("value_bs", "needs λ = 0 and σ > 0"));
    }
    Ok(value_function(problem, b)?.value(s))
}

/// `v(s, 0, u)` with exponential jumps.
pub fn value_crash_one_sided(problem: &PricingProblem, u: f64, s: f64) -> Result<f64> {
    problem.require_put("value_crash_one_sided")?;
    if !problem.omega.is_nonnegative() {
        return Err(Error::invalid("value_crash_one_sided", "needs ω >= 0"));
    }
    let k = problem.strike;
    let one = OneSided::build(&problem.model, &problem.omega, k, u, s_hi(k).max(s))?;
    Ok(one.value(s))
}

/// `v(s, l, u)` with exponential jumps and `l > 0`.
pub fn value_two_sided(problem: &PricingProblem, b: Boundaries, s: f64) -> Result<f64> {
    problem.require_put("value_two_sided")?;
    if !problem.model.has_jumps() {
        return Err(Error::invalid("value_two_sided", "model has no exponential jumps"));
    }
    let b = Boundaries::new(b.l, b.u, problem.strike)?;
    let k = problem.strike;
    let hh = Arc::new(HTable::build(&problem.model, &problem.omega, s_hi(k).max(s))?);
    let two = TwoSided::build(&problem.model, &problem.omega, k, b.l, b.u, s_hi(k).max(s), hh)?;
    Ok(two.value(s))
}

/// Coarse scan, golden-section refinement around the best candidate, then
/// a Brent polish of `fit` when it changes sign on the refined bracket.
fn maximise<F, G>(
    mut objective: F,
    mut fit: Option<G>,
    candidates: &[f64],
    xtol: f64,
) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
    G: FnMut(f64) -> Result<f64>,
{
    let values: Vec<f64> = candidates
        .iter()
        .map(|&c| objective(c))
        .collect::<Result<Vec<f64>>>()?;
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(k, _)| k)
        .ok_or_else(|| Error::no_convergence("optimize_boundaries", "objective is not finite"))?;
    let lo = candidates[best.saturating_sub(1)];
    let hi = candidates[(best + 1).min(candidates.len() - 1)];
    let mut failure = None;
    let (x, _) = golden_max(
        |c| match objective(c) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        xtol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut x = x;
    if let Some(fit) = fit.as_mut() {
        let (flo, fhi) = (fit(lo)?, fit(hi)?);
        if flo.signum() != fhi.signum() && flo.is_finite() && fhi.is_finite() {
            let mut failure = None;
            let polished = brent(
                "optimize_boundaries",
                |c| match fit(c) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                lo,
                hi,
                1e-12 * hi,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            x = polished?;
        }
    }
    Ok((x, best))
}

/// Optimal interval and the value curve with its diagnostics.
pub fn optimize_boundaries(problem: &PricingProblem) -> Result<PricingResult> {
    optimize_boundaries_with(problem, &PricerOptions::default())
}

pub fn optimize_boundaries_with(problem: &PricingProblem, opts: &PricerOptions) -> Result<PricingResult> {
    problem.require_put("optimize_boundaries")?;
    let k = problem.strike;
    let m = opts.coarse_points.max(8);
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        (1..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect()
    };
    let xtol = 1e-7 * k;
    let mut warnings = Vec::new();
    let nonneg = problem.omega.is_nonnegative();

    let value_fn = if !problem.model.has_jumps() {
        let tables = bs_tables(problem, opts.upper_branch)?;
        let up = &tables.upper;
        let (u, idx) = maximise(
            |u| Ok((k - u).ln() - up.log_h(u.ln())),
            Some(|u: f64| Ok(1.0 + (k - u) * up.log_slope(u.ln()) / u)),
            &grid(0.0, k)[..m - 1],
            xtol,
        )?;
        if idx == 0 {
            warnings.push(edge_warning());
        }
        let l = if nonneg {
            0.0
        } else {
            let lo = &tables.lower;
            lower_boundary(
                |l| Ok((k - l).ln() - lo.log_h(l.ln())),
                |l| Ok(1.0 + (k - l) * lo.log_slope(l.ln()) / l),
                u,
                m,
                xtol,
            )?
        };
        ValueFunction::BlackScholes {
            b: Boundaries::new(l, u, k)?,
            strike: k,
            tables,
        }
    } else {
        let model = &problem.model;
        let omega = &problem.omega;
        let hh = if nonneg {
            None
        } else {
            match HTable::build(model, omega, s_hi(k)) {
                Ok(h) => Some(Arc::new(h)),
                Err(e) => {
                    warnings.push(format!("lower boundary not searched: {e}"));
                    None
                }
            }
        };
        let l = match &hh {
            None => 0.0,
            Some(hh) => lower_boundary(
                |l| Ok((k - l).ln() - hh.eval(l).ln()),
                |l| Ok(1.0 + (k - l) * hh.log_slope(l) / l),
                k,
                m,
                xtol,
            )?,
        };
        let s0 = 2.0 * k;
        let build = |u: f64| -> Result<ValueFunction> {
            match &hh {
                Some(hh) if l > 0.0 => Ok(ValueFunction::TwoSided(TwoSided::build(
                    model,
                    omega,
                    k,
                    l.min(u),
                    u,
                    s_hi(k),
                    hh.clone(),
                )?)),
                _ => Ok(ValueFunction::OneSided(OneSided::build(model, omega, k, u, s_hi(k))?)),
            }
        };
        let creeps = model.sigma() > 0.0;
        let lo_u = if l > 0.0 { l } else { 0.0 };
        let (u, idx) = maximise(
            |u| Ok(build(u)?.value(s0)),
            Some(|u: f64| {
                let v = build(u)?;
                Ok(if creeps { v.slope_gaps().1 } else { v.continuity_gaps().1 })
            }),
            &grid(lo_u, k),
            xtol,
        )?;
        if idx == 0 {
            warnings.push(edge_warning());
        }
        build(u)?
    };
    let b = value_fn.boundaries();
    let mut diagnostics = Diagnostics {
        warnings,
        ..Diagnostics::default()
    };
    if b.u >= k * (1.0 - 1e-9) {
        diagnostics.degenerate = true;
        diagnostics
            .warnings
            .push("u* = K: immediate exercise everywhere below the strike".into());
    }
    if !problem.omega.is_concave_nondecreasing() {
        diagnostics
            .warnings
            .push("ω is not concave non-decreasing; convexity is not guaranteed".into());
    }
    Ok(finish(problem, value_fn, opts, diagnostics))
}

fn edge_warning() -> String {
    "u* sits at the lowest search candidate; the stopping set may not be an interval".into()
}

/// Lower boundary from `max_l log(K−l) − log h(l)` on `(0, cap]`; zero when
/// the objective keeps rising towards the origin.
fn lower_boundary<F, G>(objective: F, fit: G, cap: f64, m: usize, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64> + Copy,
    G: FnMut(f64) -> Result<f64>,
{
    let mut obj = objective;
    let candidates: Vec<f64> = (1..=m).map(|i| cap * i as f64 / m as f64).collect();
    let first = obj(candidates[0])?;
    let second = obj(candidates[1])?;
    let deep = obj(candidates[0] * 1e-3)?;
    if deep >= first && first >= second {
        return Ok(0.0);
    }
    let (l, best) = maximise(objective, Some(fit), &candidates, xtol)?;
    if best == 0 && obj(candidates[0] * 0.5)? >= first {
        return Ok(0.0);
    }
    Ok(l)
}

/// Samples the curve and fills in fit residuals and diagnostics.
pub(crate) fn finish(
    problem: &PricingProblem,
    value_fn: ValueFunction,
    opts: &PricerOptions,
    mut diagnostics: Diagnostics,
) -> PricingResult {
    let k = problem.strike;
    let b = value_fn.boundaries();
    let n = opts.curve_points.max(8);
    let curve: Vec<(f64, f64)> = (1..=n)
        .map(|i| {
            let s = 2.0 * k * i as f64 / n as f64;
            (s, value_fn.value(s))
        })
        .collect();
    let mut probes = Vec::new();
    for edge in [b.l, b.u] {
        if edge > 0.0 {
            for j in [-2.0, -1.0, 1.0, 2.0] {
                let s = edge * (j * PROBE_STEP).exp();
                probes.push((s, value_fn.value(s)));
            }
        }
    }
    let (cl, cu) = value_fn.continuity_gaps();
    let (dl, du) = value_fn.slope_gaps();
    let fit = FitResiduals {
        continuity_l: cl,
        continuity_u: cu,
        derivative_l: dl,
        derivative_u: du,
    };
    let fd = |edge: f64, side: f64| -> f64 {
        let d = PROBE_STEP;
        let v0 = k - edge;
        let v1 = value_fn.value(edge * (side * d).exp());
        let v2 = value_fn.value(edge * (2.0 * side * d).exp());
        // Second-order one-sided derivative in log s, then chain rule.
        side * (-3.0 * v0 + 4.0 * v1 - v2) / (2.0 * d) / edge
    };
    diagnostics.fd_slope_u = fd(b.u, 1.0);
    diagnostics.fd_slope_l = if b.l > 0.0 { fd(b.l, -1.0) } else { -1.0 };
    let mut result = PricingResult {
        boundaries: b,
        strike: k,
        curve,
        probes,
        fit,
        diagnostics,
        value_fn,
    };
    result.diagnostics.dominance_gap = result
        .curve
        .iter()
        .map(|&(s, v)| v - (k - s).max(0.0))
        .fold(f64::INFINITY, f64::min);
    result.diagnostics.convexity_margin = convexity_margin(&result);
    let samples: Vec<f64> = result.curve.iter().map(|&(s, _)| s).collect();
    result.diagnostics.hjb_residual = hjb_residual(&result, problem, &samples);
    result.diagnostics.hjb_stopping_violation = hjb_stopping_violation(&result, problem, &samples);
    result
}

/// Result for fixed boundaries, with the same diagnostics as the optimiser.
pub fn evaluate(problem: &PricingProblem, b: Boundaries) -> Result<PricingResult> {
    let opts = PricerOptions::default();
    let vf = value_function_with(problem, b, &opts)?;
    Ok(finish(problem, vf, &opts, Diagnostics::default()))
}
