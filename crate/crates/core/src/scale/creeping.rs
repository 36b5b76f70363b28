//! Tables for the one-sided problem with downward exponential jumps:
//! `𝒲`, `𝒵`, their tail ratio and the creeping part of the discounted exit.
//!
//! With `E_i` the solution driven by `e^{γ_i x}` and
//! `D_i = E_i − (lim E_i/𝒲) 𝒲`, the Laplace-type functional
//! `f_α(x) = ψ(α)/α · Σ_{i≥2} Υ_i γ_i D_i(x)/(α − γ_i)` tends to the
//! expected discount on creeping exits as `α → ∞`; its limit is
//! `σ²/2 · Σ_{i≥2} Υ_i γ_i D_i(x)`.

use crate::discount::{DiscountFn, LogDiscount};
use crate::error::{Error, Result};
use crate::levy::{LevyModel, RootDecomposition};

use crate::numerics::{gauss_legendre, integrate_gl};

use super::{ratio_limit, LogGrid, RenewalSolver, DEFAULT_STEP, DEFAULT_X_MAX, MAX_X_MAX};

/// `(α, f_α, extrapolated)` per rung of the creeping ladder.
pub type LadderTrace = Vec<(f64, f64, f64)>;

const LADDER_RTOL: f64 = 1e-5;
/// Restart once `c𝒲` exceeds the jump discount `𝒵 − c𝒲` by this factor.
const CANCELLATION: f64 = 100.0;
const MAX_RESTARTS: usize = 64;
const LADDER_RUNGS: usize = 8;

/// `D_i = E_i − c_i 𝒲` for one root `γ_i` with weight `Υ_i`.
#[derive(Debug, Clone)]
pub struct ModeTable {
    pub upsilon: f64,
    pub gamma: f64,
    /// `c_i = lim E_i/𝒲`.
    pub limit: f64,
    pub d: Vec<f64>,
}

/// One-sided tables on a log-grid above the boundary.
#[derive(Debug, Clone)]
pub struct CrashTables {
    pub grid: LogGrid,
    pub decomp: RootDecomposition,
    sigma: f64,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    /// `lim 𝒵/𝒲`.
    pub c: f64,
    /// One entry per non-zero root; empty when `σ = 0`.
    pub modes: Vec<ModeTable>,
    /// `ξ(0)`.
    pub xi0: f64,
    /// Expected discount on creeping exits; zero when `σ = 0`.
    pub creep: Vec<f64>,
    /// Tables seen from a later origin, used where `𝒵 − c𝒲` has cancelled.
    pub restart: Option<Restart>,
}

/// Continuation of the tables beyond `at`.
///
/// A path started above `at` first goes below it either by creeping, then
/// sits at `at`, or by a jump whose overshoot is again `Exp(φ)`. With `J̃`,
/// `C̃` the jump and creep discounts of the tables built at `at`,
/// `J(x) = J̃ M_J + C̃ J(at)` and `creep(x) = J̃ M_C + C̃ creep(at)`, where
/// `M_F = ∫_0^{at} φ e^{−φy} F(at − y) dy` plus `e^{−φ·at}` for `F = J`.
#[derive(Debug, Clone)]
pub struct Restart {
    pub at: f64,
    pub child: Box<CrashTables>,
    m_jump: f64,
    m_creep: f64,
    jump_at: f64,
    creep_at: f64,
}

impl Restart {
    /// `M_F` for a parent function `f` on `[0, at]`, one Gauss–Legendre
    /// panel per grid cell.
    fn landing_integral(phi: f64, at: f64, cells: usize, f: impl Fn(f64) -> f64, jump: bool) -> f64 {
        let rule = gauss_legendre(6);
        integrate_gl(|z| phi * (-phi * (at - z)).exp() * f(z), 0.0, at, cells, &rule)
            + if jump { (-phi * at).exp() } else { 0.0 }
    }

    /// `J̃(x − at)·m + C̃(x − at)·f_at` for a parent function with landing
    /// integral `m` and value `f_at` at the restart point.
    pub fn combine(&self, x: f64, m: f64, f_at: f64) -> f64 {
        let y = x - self.at;
        self.child.jump_at(y) * m + self.child.creep_at(y) * f_at
    }
}

/// `ratio_limit` on the full table, then on the earlier, shorter grids.
fn prefix_limit(num: &[f64], den: &[f64], grid: &LogGrid, tried: &[usize]) -> Result<f64> {
    let first = ratio_limit(num, den, grid);
    if first.is_ok() {
        return first;
    }
    for &n in tried.iter().rev().skip(1) {
        let prefix = LogGrid::new(grid.h() * (n - 1) as f64, n)?;
        if let Ok(c) = ratio_limit(&num[..n], &den[..n], &prefix) {
            return Ok(c);
        }
    }
    first
}

impl CrashTables {
    /// Builds the tables for the log-discount `ξ`, extending the range until
    /// all tail ratios settle.
    pub fn build(model: &LevyModel, xi: &LogDiscount, grid: LogGrid) -> Result<Self> {
        Self::build_from(model, xi, grid, grid.x_max(), false, 0)
    }

    /// Tables accurate on `[0, cover]`. With `padded`, only the first half
    /// of `grid` is trusted and the rest only steadies the tail ratios.
    fn build_from(
        model: &LevyModel,
        xi: &LogDiscount,
        grid: LogGrid,
        cover: f64,
        padded: bool,
        depth: usize,
    ) -> Result<Self> {
        // A fast-growing ξ can overflow the tables before the cancellation
        // point; build on a shorter range and let the restart cover the rest.
        let mut span = grid;
        let mut tables = loop {
            match Self::build_plain(model, xi, span) {
                Ok(t) if t.w.iter().all(|w| w.is_finite()) => break t,
                Ok(_) | Err(_) if span.n() > 64 && depth < MAX_RESTARTS => {
                    span = LogGrid::with_step(0.5 * span.x_max(), grid.h())?;
                }
                Ok(_) => return Err(Error::RatioLimit { estimates: [f64::NAN; 3] }),
                Err(e) => return Err(e),
            }
        };
        let h = grid.h();
        let need = (cover / h).round() as usize + 1;
        let trusted = if padded { span.n() / 2 } else { span.n() };
        let usable = need.min(trusted).min(tables.grid.n());
        let cut = (0..usable)
            .find(|&k| {
                let j = tables.z[k] - tables.c * tables.w[k] - tables.creep[k];
                !(j > 0.0) || (tables.c * tables.w[k]).abs() > CANCELLATION * j
            })
            .or((usable < need).then(|| usable - 1));
        let Some(k) = cut else {
            return Ok(tables);
        };
        if k < 16 || depth >= MAX_RESTARTS {
            return Ok(tables);
        }
        tables.attach_restart(model, xi, k, cover, depth)?;
        Ok(tables)
    }

    /// Continues the tables from node `k` up to `cover`.
    fn attach_restart(
        &mut self,
        model: &LevyModel,
        xi: &LogDiscount,
        k: usize,
        cover: f64,
        depth: usize,
    ) -> Result<()> {
        let h = self.grid.h();
        let at = k as f64 * h;
        let rest = (cover - at).max(h);
        // The next cut is rarely further than the last one.
        let local = rest.min((8.0 * at).max(0.5));
        let child = Self::build_from(
            model,
            &xi.moved(at),
            LogGrid::with_step(2.0 * local, h)?,
            rest,
            true,
            depth + 1,
        )?;
        let phi = model.phi();
        let (m_jump, m_creep) = (
            Restart::landing_integral(phi, at, k, |z| self.jump_at(z), true),
            Restart::landing_integral(phi, at, k, |z| self.creep_at(z), false),
        );
        let jump_k = self.z[k] - self.c * self.w[k] - self.creep[k];
        self.restart = Some(Restart {
            at,
            child: Box::new(child),
            m_jump,
            m_creep,
            jump_at: jump_k,
            creep_at: self.creep[k],
        });
        Ok(())
    }

    fn build_plain(model: &LevyModel, xi: &LogDiscount, grid: LogGrid) -> Result<Self> {
        let decomp = model.psi_roots()?;
        let creeps = model.sigma() > 0.0;
        let solver = RenewalSolver::default();
        let mode_roots: Vec<(f64, f64)> = if creeps {
            decomp.modes().filter(|&(_, g)| g != 0.0).collect()
        } else {
            Vec::new()
        };
        let mut grid = grid;
        // Lengths of the grids tried so far; each limit is read off the
        // longest prefix whose tail has settled.
        let mut tried: Vec<usize> = Vec::new();
        loop {
            tried.push(grid.n());
            xi.check_covers(0.0, grid.x_max())?;
            let w_f = |x: f64| decomp.w(x);
            let one = |_: f64| 1.0;
            let exps: Vec<Box<dyn Fn(f64) -> f64>> = mode_roots
                .iter()
                .map(|&(_, g)| Box::new(move |x: f64| (g * x).exp()) as Box<dyn Fn(f64) -> f64>)
                .collect();
            let mut forcings: Vec<&dyn Fn(f64) -> f64> = vec![&w_f, &one];
            forcings.extend(exps.iter().map(|b| b.as_ref()));
            let mut sol = solver.solve_many(&decomp, &|x| xi.eval(x), &forcings, &grid)?;
            let e_tabs = sol.split_off(2);
            let z = sol.pop().expect("Z table");
            let w = sol.pop().expect("W table");
            let limits = std::iter::once(prefix_limit(&z, &w, &grid, &tried))
                .chain(e_tabs.iter().map(|e| prefix_limit(e, &w, &grid, &tried)))
                .collect::<Result<Vec<f64>>>();
            let limits = match limits {
                Ok(l) => l,
                Err(e) => {
                    let w_end = w.last().copied().unwrap_or(f64::INFINITY).abs();
                    if grid.x_max() * 1.5 > MAX_X_MAX || !(w_end < 1e150) {
                        return Err(e);
                    }
                    grid = LogGrid::with_step(1.5 * grid.x_max(), grid.h())?;
                    continue;
                }
            };
            let c = limits[0];
            let s2h = 0.5 * model.sigma() * model.sigma();
            let modes: Vec<ModeTable> = mode_roots
                .iter()
                .zip(e_tabs)
                .zip(&limits[1..])
                .map(|((&(upsilon, gamma), e), &limit)| ModeTable {
                    upsilon,
                    gamma,
                    limit,
                    d: e.iter().zip(&w).map(|(e, w)| e - limit * w).collect(),
                })
                .collect();
            let creep = (0..grid.n())
                .map(|k| s2h * modes.iter().map(|m| m.upsilon * m.gamma * m.d[k]).sum::<f64>())
                .collect();
            return Ok(CrashTables {
                grid,
                decomp,
                sigma: model.sigma(),
                w,
                z,
                c,
                modes,
                xi0: xi.eval(0.0),
                creep,
                restart: None,
            });
        }
    }

    pub fn w_at(&self, x: f64) -> f64 {
        self.grid.interp(&self.w, x)
    }
    pub fn z_at(&self, x: f64) -> f64 {
        self.grid.interp(&self.z, x)
    }
    pub fn creep_at(&self, x: f64) -> f64 {
        match &self.restart {
            Some(r) if x > r.at => r.combine(x, r.m_creep, r.creep_at),
            _ => self.grid.interp(&self.creep, x),
        }
    }

    /// `𝒵 − c𝒲 − creep`: the expected discount on exits by a jump.
    pub fn jump_at(&self, x: f64) -> f64 {
        match &self.restart {
            Some(r) if x > r.at => r.combine(x, r.m_jump, r.jump_at),
            _ => self.z_at(x) - self.c * self.w_at(x) - self.grid.interp(&self.creep, x),
        }
    }

    /// `f_α(x)` from the mode tables.
    pub fn laplace_functional(&self, model: &LevyModel, alpha: f64, x: f64) -> f64 {
        let pre = model.psi(alpha) / alpha;
        pre * self
            .modes
            .iter()
            .map(|m| m.upsilon * m.gamma * self.grid.interp(&m.d, x) / (alpha - m.gamma))
            .sum::<f64>()
    }

    /// Right derivatives at `x = 0` of `(𝒲, 𝒵, creep)`, read off the
    /// renewal equations: `F'(0) = f'(0) + W(0) ξ(0) F(0)`.
    pub fn slopes_at_zero(&self) -> (f64, f64, f64) {
        let w0 = self.decomp.w0();
        let w_p = self.decomp.w0_prime() + self.xi0 * w0 * w0;
        let z_p = self.xi0 * w0;
        let s2h = 0.5 * self.sigma * self.sigma;
        let creep_p = s2h
            * self
                .modes
                .iter()
                .map(|m| m.upsilon * m.gamma * (m.gamma + self.xi0 * w0 - m.limit * w_p))
                .sum::<f64>();
        (w_p, z_p, creep_p)
    }
}

/// Creeping discount at `x` by a doubling ladder `α_k = 2^k · 8/x` with
/// two-point extrapolation in `t = φ/(φ+α)`.
pub fn creeping_ladder(tables: &CrashTables, model: &LevyModel, x: f64) -> Result<(f64, LadderTrace)> {
    if tables.sigma == 0.0 {
        return Ok((0.0, Vec::new()));
    }
    if !(x >= 0.0) || x > tables.grid.x_max() {
        return Err(Error::OutsideDomain {
            op: "creeping_ladder",
            value: x,
            lo: 0.0,
            hi: tables.grid.x_max(),
        });
    }
    let phi = model.phi();
    let mut alpha = 8.0 / x.max(tables.grid.h());
    let mut trace: LadderTrace = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut prev_est: Option<f64> = None;
    for _ in 0..=LADDER_RUNGS {
        let f = tables.laplace_functional(model, alpha, x);
        let t = phi / (phi + alpha);
        let est = match prev {
            Some((t0, f0)) => f - t * (f - f0) / (t - t0),
            None => f,
        };
        trace.push((alpha, f, est));
        if let Some(pe) = prev_est {
            if (est - pe).abs() <= LADDER_RTOL * est.abs() + 1e-12 {
                return Ok((est, trace));
            }
        }
        if prev.is_some() {
            prev_est = Some(est);
        }
        prev = Some((t, f));
        alpha *= 2.0;
    }
    Err(Error::CreepingLadder {
        trace: trace.into_iter().map(|(a, _, e)| (a, e)).collect(),
    })
}

/// Expected discount `E_x[e^{−∫ω} ; creep at u]` for a start `s = u e^x`.
pub fn creeping_limit(model: &LevyModel, omega: &DiscountFn, u: f64, x: f64) -> Result<f64> {
    if model.sigma() == 0.0 {
        return Ok(0.0);
    }
    let xi = omega.shift_tilt(u, model, 0.0)?;
    let grid = LogGrid::with_step(DEFAULT_X_MAX.max(x + 1.0), DEFAULT_STEP)?;
    let tables = CrashTables::build(model, &xi, grid)?;
    creeping_ladder(&tables, model, x).map(|(v, _)| v)
}
