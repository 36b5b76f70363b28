//! Omega scale functions on uniform log-grids.
//!
//! For a killing rate `ξ` the functions `𝒲^{(ξ)}`, `𝒵^{(ξ)}`, `ℋ^{(ξ)}` and
//! `𝒲^{(ξ)}(x, z)` solve Volterra equations of the second kind whose kernel
//! is the classical scale function `W`. For exponential jumps `W` is a short
//! exponential sum, which the default marching scheme exploits.

mod creeping;
mod ode_route;
mod ratio;
mod volterra;

use rayon::prelude::*;

use crate::discount::{DiscountFn, LogDiscount};
use crate::error::{Error, Result};
use crate::levy::{LevyModel, RootDecomposition};
use crate::numerics::interp_uniform;

pub use crate::levy::classical_w;
pub use creeping::{creeping_ladder, creeping_limit, CrashTables, LadderTrace, ModeTable};
pub use ode_route::{ode_solve_crash, ode_solve_crash_sigma, Which};
pub use ratio::ratio_limit;
pub use volterra::Scheme;

/// Default step of the pricing grids.
pub const DEFAULT_STEP: f64 = 2e-3;
/// Default log-range, extended automatically when tail limits need more.
pub const DEFAULT_X_MAX: f64 = 3.0;
pub(crate) const MAX_X_MAX: f64 = 48.0;

/// Uniform grid `x_k = k h` on `[0, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrid {
    x_max: f64,
    n: usize,
}

impl LogGrid {
    pub fn new(x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) || n < 2 {
            return Err(Error::invalid("LogGrid", "need x_max > 0 and n >= 2"));
        }
        Ok(LogGrid { x_max, n })
    }

    /// Grid with step close to `h` covering at least `[0, x_max]`.
    pub fn with_step(x_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("LogGrid", "step must be positive"));
        }
        let cells = (x_max / h).ceil().max(1.0) as usize;
        Self::new(cells as f64 * h, cells + 1)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        self.x_max / (self.n - 1) as f64
    }
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.h()
    }
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Same range with the step halved.
    pub fn refined(&self) -> LogGrid {
        LogGrid {
            x_max: self.x_max,
            n: 2 * self.n - 1,
        }
    }

    /// Twice the range with the same step.
    pub fn extended(&self) -> LogGrid {
        LogGrid {
            x_max: 2.0 * self.x_max,
            n: 2 * self.n - 1,
        }
    }

    /// Cubic interpolation of a table on this grid.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        interp_uniform(values, 0.0, self.h(), x)
    }
}

/// Lower-triangular table `A[j][k]` for `k ≤ j`, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    columns: Vec<Vec<f64>>,
}

impl LowerTriangular {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry at row `j` (the `x` index) and column `k` (the `z` index).
    pub fn get(&self, j: usize, k: usize) -> f64 {
        assert!(k <= j && j < self.n, "index ({j}, {k}) outside the triangle");
        self.columns[k][j - k]
    }

    /// Column `k`, i.e. rows `k..n`.
    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }
}

/// Marching configuration shared by all renewal solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalSolver {
    pub scheme: Scheme,
    /// Combine the solutions on `h` and `h/2` to cancel the `h²` error term.
    pub richardson: bool,
}

impl Default for RenewalSolver {
    fn default() -> Self {
        RenewalSolver {
            scheme: Scheme::ExponentialModes,
            richardson: true,
        }
    }
}

impl RenewalSolver {
    pub fn plain(scheme: Scheme) -> Self {
        RenewalSolver {
            scheme,
            richardson: false,
        }
    }

    fn solve_once(
        &self,
        decomp: &RootDecomposition,
        xi: &[f64],
        forcings: &[Vec<f64>],
        h: f64,
    ) -> Result<Vec<Vec<f64>>> {
        forcings
            .iter()
            .map(|f| volterra::march(self.scheme, decomp, h, xi, f))
            .collect()
    }

    /// Solves `F = f + W * (ξ F)` for each forcing `f` on the grid.
    pub fn solve_many(
        &self,
        decomp: &RootDecomposition,
        xi: &dyn Fn(f64) -> f64,
        forcings: &[&dyn Fn(f64) -> f64],
        grid: &LogGrid,
    ) -> Result<Vec<Vec<f64>>> {
        let sample = |g: &LogGrid| -> (Vec<f64>, Vec<Vec<f64>>) {
            let nodes = g.nodes();
            let x: Vec<f64> = nodes.iter().map(|&x| xi(x)).collect();
            let f = forcings
                .iter()
                .map(|f| nodes.iter().map(|&x| f(x)).collect())
                .collect();
            (x, f)
        };
        let (xc, fc) = sample(grid);
        let coarse = self.solve_once(decomp, &xc, &fc, grid.h())?;
        if !self.richardson {
            return Ok(coarse);
        }
        let fine_grid = grid.refined();
        let (xf, ff) = sample(&fine_grid);
        let fine = self.solve_once(decomp, &xf, &ff, fine_grid.h())?;
        Ok(coarse
            .into_iter()
            .zip(fine)
            .map(|(c, f)| {
                c.iter()
                    .enumerate()
                    .map(|(k, &v)| (4.0 * f[2 * k] - v) / 3.0)
                    .collect()
            })
            .collect())
    }

    pub fn solve(
        &self,
        decomp: &RootDecomposition,
        xi: &dyn Fn(f64) -> f64,
        forcing: &dyn Fn(f64) -> f64,
        grid: &LogGrid,
    ) -> Result<Vec<f64>> {
        Ok(self
            .solve_many(decomp, xi, &[forcing], grid)?
            .pop()
            .expect("one forcing in, one solution out"))
    }

    /// Two-argument table `𝒲^{(ξ)}(x_j, x_k)`; column `k` is the march
    /// started at `z = x_k`.
    pub fn solve_w2(
        &self,
        decomp: &RootDecomposition,
        xi: &dyn Fn(f64) -> f64,
        grid: &LogGrid,
    ) -> Result<LowerTriangular> {
        let sample = |g: &LogGrid| -> (Vec<f64>, Vec<f64>) {
            let xs = g.nodes().iter().map(|&x| xi(x)).collect();
            let kernel = g.nodes().iter().map(|&x| decomp.w(x)).collect();
            (xs, kernel)
        };
        let n = grid.n();
        let (xc, kc) = sample(grid);
        let fine_grid = grid.refined();
        let (xf, kf) = if self.richardson {
            sample(&fine_grid)
        } else {
            (Vec::new(), Vec::new())
        };
        let columns: Result<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let col = volterra::march(self.scheme, decomp, grid.h(), &xc[k..], &kc[..n - k])?;
                if !self.richardson {
                    return Ok(col);
                }
                let nf = fine_grid.n();
                let fcol = volterra::march(
                    self.scheme,
                    decomp,
                    fine_grid.h(),
                    &xf[2 * k..],
                    &kf[..nf - 2 * k],
                )?;
                Ok(col
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (4.0 * fcol[2 * i] - v) / 3.0)
                    .collect())
            })
            .collect();
        let columns = columns?;
        Ok(LowerTriangular {
            n: grid.n(),
            columns,
        })
    }
}

fn check_bounded(xi: &LogDiscount, grid: &LogGrid) -> Result<()> {
    xi.check_covers(0.0, grid.x_max())?;
    let bad = grid.nodes().iter().any(|&x| !xi.eval(x).is_finite());
    if bad {
        return Err(Error::invalid("renewal_solve", "ξ is not finite on the grid"));
    }
    Ok(())
}

/// `𝒲^{(ξ)}` on the grid.
pub fn renewal_solve_w(decomp: &RootDecomposition, xi: &LogDiscount, grid: &LogGrid) -> Result<Vec<f64>> {
    check_bounded(xi, grid)?;
    RenewalSolver::default().solve(decomp, &|x| xi.eval(x), &|x| decomp.w(x), grid)
}

/// `𝒵^{(ξ)}` on the grid.
pub fn renewal_solve_z(decomp: &RootDecomposition, xi: &LogDiscount, grid: &LogGrid) -> Result<Vec<f64>> {
    check_bounded(xi, grid)?;
    RenewalSolver::default().solve(decomp, &|x| xi.eval(x), &|_| 1.0, grid)
}

/// `ℋ^{(ξ)}` on the grid. `decomp_c` must be the decomposition of
/// `1/(ψ − c)` and `ξ` must equal `c` on `(−∞, 0]`.
pub fn renewal_solve_h(
    decomp_c: &RootDecomposition,
    xi: &LogDiscount,
    c: f64,
    grid: &LogGrid,
    phi_c: f64,
) -> Result<Vec<f64>> {
    match xi.flat_below_zero() {
        Some(v) if (v - c).abs() <= 1e-14 * (1.0 + c.abs()) => {}
        _ => {
            return Err(Error::invalid(
                "renewal_solve_h",
                "discount is not certified constant below the origin",
            ))
        }
    }
    if (decomp_c.q() - c).abs() > 1e-14 * (1.0 + c.abs()) {
        return Err(Error::invalid("renewal_solve_h", "kernel does not belong to ψ − c"));
    }
    check_bounded(xi, grid)?;
    RenewalSolver::default().solve(decomp_c, &|x| xi.eval(x) - c, &|x| (phi_c * x).exp(), grid)
}

/// `𝒲^{(ξ)}(x_j, x_k)` for `k ≤ j`.
pub fn renewal_solve_w2(
    decomp: &RootDecomposition,
    xi: &LogDiscount,
    grid: &LogGrid,
) -> Result<LowerTriangular> {
    check_bounded(xi, grid)?;
    RenewalSolver::default().solve_w2(decomp, &|x| xi.eval(x), grid)
}

/// Tables of `𝒲^{(ξ)}`, `𝒵^{(ξ)}` and optional companions on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleTable {
    pub grid: LogGrid,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub hh: Option<Vec<f64>>,
    pub w2: Option<LowerTriangular>,
    pub c_zw: f64,
    pub c_w2w: Option<Vec<f64>>,
}

impl ScaleTable {
    /// Builds `𝒲`, `𝒵` and `lim 𝒵/𝒲`, doubling the range until the limit
    /// settles.
    pub fn build(model: &LevyModel, xi: &LogDiscount, grid: LogGrid) -> Result<Self> {
        let decomp = model.psi_roots()?;
        let solver = RenewalSolver::default();
        let mut grid = grid;
        loop {
            check_bounded(xi, &grid)?;
            let mut sol = solver.solve_many(
                &decomp,
                &|x| xi.eval(x),
                &[&|x| decomp.w(x), &|_| 1.0],
                &grid,
            )?;
            let z = sol.pop().expect("two solutions");
            let w = sol.pop().expect("two solutions");
            match ratio_limit(&z, &w, &grid) {
                Ok(c_zw) => {
                    return Ok(ScaleTable {
                        grid,
                        w,
                        z,
                        hh: None,
                        w2: None,
                        c_zw,
                        c_w2w: None,
                    })
                }
                Err(e) => {
                    let w_end = w.last().copied().unwrap_or(f64::INFINITY).abs();
                    if grid.x_max() * 2.0 > MAX_X_MAX || !(w_end < 1e150) {
                        return Err(e);
                    }
                    grid = grid.extended();
                }
            }
        }
    }

    /// Adds `ℋ^{(ξ)}`; requires `ξ` constant below the origin.
    pub fn with_h(mut self, model: &LevyModel, xi: &LogDiscount) -> Result<Self> {
        let c = xi.flat_below_zero().ok_or_else(|| {
            Error::invalid("ScaleTable::with_h", "discount is not constant below the origin")
        })?;
        let decomp_c = model.roots_at(c)?;
        let phi_c = model.largest_root(c, "ScaleTable::with_h")?;
        self.hh = Some(renewal_solve_h(&decomp_c, xi, c, &self.grid, phi_c)?);
        Ok(self)
    }

    /// Adds `𝒲^{(ξ)}(x, z)` and its column limits `lim_y 𝒲(y,z)/𝒲(y)` for
    /// the columns that leave a full tail.
    pub fn with_w2(mut self, model: &LevyModel, xi: &LogDiscount) -> Result<Self> {
        let decomp = model.psi_roots()?;
        let w2 = renewal_solve_w2(&decomp, xi, &self.grid)?;
        let n = self.grid.n();
        let usable = n - (n / 10).max(12) - 2;
        let limits: Result<Vec<f64>> = (0..usable)
            .into_par_iter()
            .map(|k| {
                let col = w2.column(k);
                let mut padded = vec![0.0; k];
                padded.extend_from_slice(col);
                let mut den = self.w.clone();
                den[..k].iter_mut().for_each(|v| *v = 1.0);
                ratio_limit(&padded, &den, &self.grid)
            })
            .collect();
        self.c_w2w = Some(limits?);
        self.w2 = Some(w2);
        Ok(self)
    }

    pub fn w_at(&self, x: f64) -> f64 {
        self.grid.interp(&self.w, x)
    }
    pub fn z_at(&self, x: f64) -> f64 {
        self.grid.interp(&self.z, x)
    }

    /// CSV with columns `x,W,Z,H` (H empty when absent).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,W,Z,H\n");
        for k in 0..self.grid.n() {
            let h = self
                .hh
                .as_ref()
                .map(|v| format!("{:.12e}", v[k]))
                .unwrap_or_default();
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{}\n",
                self.grid.node(k),
                self.w[k],
                self.z[k],
                h
            ));
        }
        out
    }
}

/// Convenience: the unshifted log view of `ω` on the default grid.
pub fn default_table(model: &LevyModel, omega: &DiscountFn) -> Result<ScaleTable> {
    let grid = LogGrid::with_step(DEFAULT_X_MAX, DEFAULT_STEP)?;
    ScaleTable::build(model, &omega.log_view(), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discount::DiscountFn;

    fn crash_model(sigma: f64) -> LevyModel {
        LevyModel::martingale(0.05, sigma, 6.0, 2.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn constant_rate_collapses_to_classical() {
        for sigma in [0.0, 0.2] {
            let m = crash_model(sigma);
            let q = 0.05;
            let omega = DiscountFn::constant(q).unwrap();
            let grid = LogGrid::new(3.0, 4001).unwrap();
            let d = m.psi_roots().unwrap();
            let w = renewal_solve_w(&d, &omega.log_view(), &grid).unwrap();
            let z = renewal_solve_z(&d, &omega.log_view(), &grid).unwrap();
            let dq = m.roots_at(q).unwrap();
            for k in (0..grid.n()).step_by(50) {
                let x = grid.node(k);
                assert!(rel(w[k], dq.w(x)) < 1e-6 || (w[k] - dq.w(x)).abs() < 1e-12, "W σ={sigma} x={x}");
                assert!(rel(z[k], dq.z(x)) < 1e-6, "Z σ={sigma} x={x}");
            }
        }
    }

    fn error_at(scheme: Scheme, n: usize, m: &LevyModel, xi: &LogDiscount, reference: f64) -> f64 {
        let grid = LogGrid::new(2.0, n).unwrap();
        let d = m.psi_roots().unwrap();
        let w = RenewalSolver::plain(scheme)
            .solve(&d, &|x| xi.eval(x), &|x| d.w(x), &grid)
            .unwrap();
        (w[n - 1] - reference).abs()
    }

    #[test]
    fn second_order_convergence() {
        let omega = DiscountFn::rational(1.0, -0.3).unwrap();
        for sigma in [0.0, 0.2] {
            let m = crash_model(sigma);
            let xi = omega.shift_tilt(1.5, &m, 0.0).unwrap();
            let d = m.psi_roots().unwrap();
            let grid = LogGrid::new(2.0, 3201).unwrap();
            let reference = RenewalSolver::default()
                .solve(&d, &|x| xi.eval(x), &|x| d.w(x), &grid)
                .unwrap()[3200];
            for scheme in [Scheme::ExponentialModes, Scheme::Trapezoid] {
                let e1 = error_at(scheme, 101, &m, &xi, reference);
                let e2 = error_at(scheme, 201, &m, &xi, reference);
                let ratio = e1 / e2;
                assert!((3.5..=4.5).contains(&ratio), "σ={sigma} {scheme:?} ratio {ratio}");
            }
        }
    }

    #[test]
    fn renewal_matches_ode() {
        let omega = DiscountFn::linear(0.1).unwrap();
        for sigma in [0.0, 0.2] {
            let m = crash_model(sigma);
            let xi = omega.shift_tilt(2.0, &m, 0.0).unwrap();
            let grid = LogGrid::with_step(2.0, 2e-3).unwrap();
            let d = m.psi_roots().unwrap();
            let w = renewal_solve_w(&d, &xi, &grid).unwrap();
            let z = renewal_solve_z(&d, &xi, &grid).unwrap();
            let (wo, zo) = if sigma == 0.0 {
                (
                    ode_solve_crash(&m, &xi, &grid, Which::W).unwrap(),
                    ode_solve_crash(&m, &xi, &grid, Which::Z).unwrap(),
                )
            } else {
                (
                    ode_solve_crash_sigma(&m, &xi, &grid, Which::W).unwrap(),
                    ode_solve_crash_sigma(&m, &xi, &grid, Which::Z).unwrap(),
                )
            };
            for k in (1..grid.n()).step_by(25) {
                assert!(rel(w[k], wo[k]) < 1e-7, "W σ={sigma} k={k} {} {}", w[k], wo[k]);
                assert!(rel(z[k], zo[k]) < 1e-7, "Z σ={sigma} k={k} {} {}", z[k], zo[k]);
            }
        }
    }

    #[test]
    fn ode_route_rejects_step_discount() {
        let m = crash_model(0.0);
        let omega = DiscountFn::step(0.05, 0.02, 2.0, crate::StepSide::Above).unwrap();
        let grid = LogGrid::new(1.0, 11).unwrap();
        let err = ode_solve_crash(&m, &omega.log_view(), &grid, Which::W).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn classical_ratio_limit() {
        for sigma in [0.0, 0.2] {
            let m = crash_model(sigma);
            let q = 0.07;
            let table = default_table(&m, &DiscountFn::constant(q).unwrap()).unwrap();
            let expected = q / m.phi_right_inverse(q).unwrap();
            assert!(rel(table.c_zw, expected) < 1e-6, "{} {}", table.c_zw, expected);
        }
    }

    #[test]
    fn creeping_matches_classical_formula() {
        let m = crash_model(0.2);
        let q = 0.05;
        let omega = DiscountFn::constant(q).unwrap();
        let grid = LogGrid::with_step(3.0, DEFAULT_STEP).unwrap();
        let t = CrashTables::build(&m, &omega.log_view(), grid).unwrap();
        let dq = m.roots_at(q).unwrap();
        let phi_q = m.phi_right_inverse(q).unwrap();
        let s2h = 0.02;
        assert!((t.creep[0] - 1.0).abs() < 1e-9);
        for x in [0.05, 0.3, 1.0, 2.0] {
            let exact = s2h * (dq.w_prime(x) - phi_q * dq.w(x));
            assert!((t.creep_at(x) - exact).abs() < 1e-7, "x={x} {} {}", t.creep_at(x), exact);
            let (ladder, trace) = creeping_ladder(&t, &m, x).unwrap();
            assert!((ladder - exact).abs() < 1e-5, "x={x} {ladder} {exact} {trace:?}");
        }
    }

    #[test]
    fn no_creeping_without_diffusion() {
        let m = crash_model(0.0);
        let omega = DiscountFn::linear(0.1).unwrap();
        assert_eq!(creeping_limit(&m, &omega, 1.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn h_requires_flat_certificate() {
        let m = crash_model(0.2);
        let omega = DiscountFn::linear(0.1).unwrap();
        let grid = LogGrid::new(1.0, 101).unwrap();
        let d = m.roots_at(0.1).unwrap();
        let err = renewal_solve_h(&d, &omega.log_view(), 0.1, &grid, 1.0).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn h_for_constant_rate_is_exponential() {
        let m = crash_model(0.2);
        let q = 0.05;
        let omega = DiscountFn::constant(q).unwrap();
        let grid = LogGrid::new(2.0, 401).unwrap();
        let d = m.roots_at(q).unwrap();
        let phi_q = m.phi_right_inverse(q).unwrap();
        let h = renewal_solve_h(&d, &omega.log_view(), q, &grid, phi_q).unwrap();
        for (k, v) in h.iter().enumerate() {
            assert!(rel(*v, (phi_q * grid.node(k)).exp()) < 1e-13);
        }
    }

    #[test]
    fn w2_diagonal_and_first_column() {
        let m = crash_model(0.0);
        let omega = DiscountFn::linear(0.1).unwrap();
        let xi = omega.shift_tilt(2.0, &m, 0.0).unwrap();
        let grid = LogGrid::new(1.0, 201).unwrap();
        let d = m.psi_roots().unwrap();
        let w2 = renewal_solve_w2(&d, &xi, &grid).unwrap();
        let w = renewal_solve_w(&d, &xi, &grid).unwrap();
        for j in 0..grid.n() {
            assert!(rel(w2.get(j, 0), w[j]) < 1e-12);
            assert!(rel(w2.get(j, j), d.w0()) < 1e-12);
        }
    }
}
