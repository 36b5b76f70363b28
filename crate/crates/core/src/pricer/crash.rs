//! Values under exponential downward jumps.
//!
//! Above the upper boundary `u` the process leaves by a jump or, when
//! `σ > 0`, by creeping. With `x = log(s/u)` the value is
//! `J(x) · O + (K − u) · creep(x)`, where `J` is the expected discount on
//! jump exits and `O` the expected payoff at the landing point. Lack of
//! memory makes the overshoot below `u` an `Exp(φ)` variable whatever the
//! pre-jump level, so `O` is a number.

use std::sync::Arc;

use rayon::prelude::*;

use crate::discount::DiscountFn;
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::numerics::{gauss_legendre, integrate_gl, trapezoid_em};
use crate::scale::{
    ratio_limit, renewal_solve_h, CrashTables, LogGrid, RenewalSolver, DEFAULT_STEP, DEFAULT_X_MAX,
};

/// Step of the two-argument tables.
const W2_STEP: f64 = 0.01;
const W2_MAX_X: f64 = 40.0;
/// Relative size of the neglected `∫ c(z) e^{−φz} dz` tail.
const TAIL_TOL: f64 = 1e-11;

/// One-sided value `v(s, 0, u)`.
#[derive(Debug, Clone)]
pub struct OneSided {
    pub(crate) u: f64,
    pub(crate) strike: f64,
    /// `K − uφ/(φ+1)`, the expected payoff after a jump below `u`.
    overshoot: f64,
    tables: Arc<CrashTables>,
}

impl OneSided {
    /// Tables for the boundary `u`, covering spots up to `s_hi`.
    pub fn build(model: &LevyModel, omega: &DiscountFn, strike: f64, u: f64, s_hi: f64) -> Result<Self> {
        const OP: &str = "value_crash_one_sided";
        if !model.has_jumps() {
            return Err(Error::invalid(OP, "model has no exponential jumps"));
        }
        if !(u > 0.0 && u <= strike) {
            return Err(Error::invalid(OP, format!("need 0 < u <= K, got u = {u}")));
        }
        let xi = omega.shift_tilt(u, model, 0.0)?;
        let x_need = (s_hi / u).ln().max(0.0) + 0.25;
        let grid = LogGrid::with_step(DEFAULT_X_MAX.max(x_need), DEFAULT_STEP)?;
        let tables = CrashTables::build(model, &xi, grid)?;
        let phi = model.phi();
        Ok(OneSided {
            u,
            strike,
            overshoot: strike - u * phi / (phi + 1.0),
            tables: Arc::new(tables),
        })
    }

    pub fn tables(&self) -> &CrashTables {
        &self.tables
    }

    /// Continuation formula at `x = log(s/u) ≥ 0`.
    pub fn upper(&self, x: f64) -> f64 {
        self.overshoot * self.tables.jump_at(x) + (self.strike - self.u) * self.tables.creep_at(x)
    }

    pub fn value(&self, s: f64) -> f64 {
        if s <= self.u {
            self.strike - s
        } else {
            self.upper((s / self.u).ln())
        }
    }

    /// `dV/ds` at `u+`.
    pub fn slope_at_u(&self) -> f64 {
        let t = &self.tables;
        let (w_p, z_p, creep_p) = t.slopes_at_zero();
        let jump_p = z_p - t.c * w_p - creep_p;
        (self.overshoot * jump_p + (self.strike - self.u) * creep_p) / self.u
    }
}

/// `ℋ^{(ω)}(s)`: `s^{Φ(c)}` on `(0, 1]` where `ω ≡ c`, tabulated above.
#[derive(Debug, Clone)]
pub struct HTable {
    grid: LogGrid,
    values: Vec<f64>,
    phi_c: f64,
}

impl HTable {
    pub fn build(model: &LevyModel, omega: &DiscountFn, s_hi: f64) -> Result<Self> {
        const OP: &str = "value_two_sided";
        let c = omega.check_flat_below_one().ok_or_else(|| {
            Error::invalid(OP, "ω must be constant on (0, 1] for the lower branch")
        })?;
        let phi_c = model.largest_root(c, OP)?;
        let decomp_c = model.roots_at(c)?;
        let grid = LogGrid::with_step(s_hi.ln().max(0.0) + 0.25, DEFAULT_STEP)?;
        let values = renewal_solve_h(&decomp_c, &omega.log_view(), c, &grid, phi_c)?;
        Ok(HTable {
            grid,
            values,
            phi_c,
        })
    }

    pub fn phi_c(&self) -> f64 {
        self.phi_c
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 1.0 {
            s.powf(self.phi_c)
        } else {
            self.grid.interp(&self.values, s.ln())
        }
    }

    /// `s ℋ'(s)/ℋ(s)`.
    pub fn log_slope(&self, s: f64) -> f64 {
        if s < 1.0 {
            return self.phi_c;
        }
        let x = s.ln();
        let d = 1e-3;
        let f = |x: f64| self.grid.interp(&self.values, x).ln();
        if x - 2.0 * d < 0.0 {
            // Both sides agree at 0 only when ξ(0) = c; stay on the table side.
            (-3.0 * f(x) + 4.0 * f(x + d) - f(x + 2.0 * d)) / (2.0 * d)
        } else {
            (f(x - 2.0 * d) - 8.0 * f(x - d) + 8.0 * f(x + d) - f(x + 2.0 * d)) / (12.0 * d)
        }
    }
}

/// Two-sided value `v(s, l, u)` with `l > 0`.
#[derive(Debug, Clone)]
pub struct TwoSided {
    pub(crate) l: f64,
    pub(crate) u: f64,
    pub(crate) strike: f64,
    lambda: f64,
    phi: f64,
    one: OneSided,
    hh: Arc<HTable>,
    /// `∫ c(z) e^{−φz} dz` with `c(z) = lim_y 𝒲(y, z)/𝒲(y)`.
    i_c: f64,
    /// `∫_0^x (𝒲(x, z) − W(x − z)) e^{−φz} dz` on the two-argument grid.
    w2_grid: LogGrid,
    delta: Vec<f64>,
    /// Expected payoff at the landing point of a jump from `u`.
    overshoot: f64,
    /// Landing integral and value of `J` at the restart point of the
    /// one-sided tables, if they have one.
    restart: Option<(f64, f64)>,
}

impl TwoSided {
    /// Resolvent pieces for `(l, u)`; `hh` is shared across boundaries.
    pub fn build(
        model: &LevyModel,
        omega: &DiscountFn,
        strike: f64,
        l: f64,
        u: f64,
        s_hi: f64,
        hh: Arc<HTable>,
    ) -> Result<Self> {
        const OP: &str = "value_two_sided";
        if !(l > 0.0 && l <= u) {
            return Err(Error::invalid(OP, format!("need 0 < l <= u, got l = {l}, u = {u}")));
        }
        let one = OneSided::build(model, omega, strike, u, s_hi)?;
        let (lambda, phi) = (model.lambda(), model.phi());
        let decomp = model.psi_roots()?;
        let xi = omega.shift_tilt(u, model, 0.0)?;
        let solver = RenewalSolver::default();
        let mut grid = LogGrid::with_step(one.tables().grid.x_max().max(4.0), W2_STEP)?;
        let (i_c, delta) = loop {
            xi.check_covers(0.0, grid.x_max())?;
            let w2 = solver.solve_w2(&decomp, &|x| xi.eval(x), &grid)?;
            let n = grid.n();
            let h = grid.h();
            let w: Vec<f64> = (0..n).map(|j| w2.get(j, 0)).collect();
            let usable = n - (n / 10).max(12) - 2;
            let limits: Vec<Result<f64>> = (0..usable)
                .into_par_iter()
                .map(|k| {
                    let mut num = vec![0.0; k];
                    num.extend_from_slice(w2.column(k));
                    let mut den = w.clone();
                    den[..k].iter_mut().for_each(|v| *v = 1.0);
                    ratio_limit(&num, &den, &grid)
                })
                .collect();
            // Late columns have short tails; keep the settled prefix and let
            // the tail test decide whether it reaches far enough.
            let settled = limits.iter().take_while(|c| c.is_ok()).count();
            if settled < 4 {
                return Err(limits.into_iter().find_map(|c| c.err()).expect("a failed column"));
            }
            let integrand: Vec<f64> = limits[..settled]
                .iter()
                .enumerate()
                .map(|(k, c)| *c.as_ref().expect("settled") * (-phi * k as f64 * h).exp())
                .collect();
            let i_c = trapezoid_em(&integrand, h);
            let tail = integrand[settled - 1].abs() / phi;
            if tail > TAIL_TOL * i_c.abs() {
                if grid.x_max() * 2.0 > W2_MAX_X {
                    return Err(Error::no_convergence(
                        OP,
                        format!("resolvent tail {tail:e} still large at x = {}", grid.x_max()),
                    ));
                }
                grid = grid.extended();
                continue;
            }
            let delta: Vec<f64> = (0..n)
                .map(|j| {
                    let f: Vec<f64> = (0..=j)
                        .map(|k| (w2.get(j, k) - decomp.w((j - k) as f64 * h)) * (-phi * k as f64 * h).exp())
                        .collect();
                    trapezoid_em(&f, h)
                })
                .collect();
            break (i_c, delta);
        };
        let d = (u / l).ln();
        let rule = gauss_legendre(12);
        let phi_c = hh.phi_c();
        // Landing in [l, u] pays K − u e^{−y}; below l the lower branch takes over.
        let inside = strike * (1.0 - (-phi * d).exp())
            - u * phi / (phi + 1.0) * (1.0 - (-(phi + 1.0) * d).exp());
        let y1 = d.max(u.ln());
        let numeric = integrate_gl(
            |y| phi * (-phi * y).exp() * hh.eval(u * (-y).exp()),
            d,
            y1,
            ((y1 - d) / 0.05).ceil().max(1.0) as usize,
            &rule,
        );
        let analytic = phi * u.powf(phi_c) * (-(phi + phi_c) * y1).exp() / (phi + phi_c);
        let overshoot = inside + (strike - l) / hh.eval(l) * (numeric + analytic);
        let mut two = TwoSided {
            l,
            u,
            strike,
            lambda,
            phi,
            one,
            hh,
            i_c,
            w2_grid: grid,
            delta,
            overshoot,
            restart: None,
        };
        if let Some(r) = &two.one.tables().restart {
            let at = r.at;
            let panels = (at / 0.01).ceil().max(1.0) as usize;
            let m = integrate_gl(
                |z| phi * (-phi * (at - z)).exp() * two.jump_discount(z),
                0.0,
                at,
                panels,
                &rule,
            ) + (-phi * at).exp();
            two.restart = Some((m, two.jump_discount(at)));
        }
        Ok(two)
    }

    /// `R(x) = ∫_0^x 𝒲(x, z) e^{−φz} dz`.
    fn resolvent(&self, x: f64) -> f64 {
        let d = &self.one.tables().decomp;
        let phi = self.phi;
        let g: f64 = d
            .modes()
            .map(|(ups, gam)| ups * ((gam * x).exp() - (-phi * x).exp()) / (gam + phi))
            .sum();
        g + self.w2_grid.interp(&self.delta, x)
    }

    /// Expected discount on jump exits below `u`, from the resolvent.
    pub fn jump_discount(&self, x: f64) -> f64 {
        let t = self.one.tables();
        match (&t.restart, self.restart) {
            (Some(r), Some((m, j_at))) if x > r.at => r.combine(x, m, j_at),
            _ => self.lambda * (t.w_at(x) * self.i_c - self.resolvent(x)),
        }
    }

    pub fn upper(&self, x: f64) -> f64 {
        self.jump_discount(x) * self.overshoot
            + (self.strike - self.u) * self.one.tables().creep_at(x)
    }

    pub fn value(&self, s: f64) -> f64 {
        if s < self.l {
            self.hh.eval(s) / self.hh.eval(self.l) * (self.strike - self.l)
        } else if s <= self.u {
            self.strike - s
        } else {
            self.upper((s / self.u).ln())
        }
    }

    /// `dV/ds` at `u+`.
    pub fn slope_at_u(&self) -> f64 {
        let t = self.one.tables();
        let (w_p, _, creep_p) = t.slopes_at_zero();
        let jump_p = self.lambda * (w_p * self.i_c - t.decomp.w0());
        (jump_p * self.overshoot + (self.strike - self.u) * creep_p) / self.u
    }

    /// `dV/ds` at `l−`.
    pub fn slope_at_l(&self) -> f64 {
        (self.strike - self.l) * self.hh.log_slope(self.l) / self.l
    }

    pub fn overshoot_payoff(&self) -> f64 {
        self.overshoot
    }
}
