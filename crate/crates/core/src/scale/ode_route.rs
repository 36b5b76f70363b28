//! Differential-equation route to `𝒲^{(ξ)}` and `𝒵^{(ξ)}` for exponential
//! jumps. Applying `D(D − γ_2)…` to the renewal equation removes the
//! convolution and leaves a linear ODE with coefficients in `ξ` and `ξ'`.

use crate::discount::LogDiscount;
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::ode::Dopri5;

use super::LogGrid;

/// Which scale function to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    W,
    Z,
}

fn check(model: &LevyModel, xi: &LogDiscount, grid: &LogGrid, op: &'static str) -> Result<()> {
    if !model.has_jumps() {
        return Err(Error::invalid(op, "model has no exponential jumps"));
    }
    if !xi.base().is_differentiable() {
        return Err(Error::invalid(op, "discount rate is not differentiable"));
    }
    xi.check_covers(0.0, grid.x_max())
}

fn xi_prime(xi: &LogDiscount, x: f64, op: &'static str) -> Result<f64> {
    xi.derivative(x)
        .ok_or_else(|| Error::invalid(op, "discount rate is not differentiable"))
}

/// Second-order ODE for `σ = 0`.
pub fn ode_solve_crash(
    model: &LevyModel,
    xi: &LogDiscount,
    grid: &LogGrid,
    which: Which,
) -> Result<Vec<f64>> {
    const OP: &str = "ode_solve_crash";
    check(model, xi, grid, OP)?;
    if model.sigma() != 0.0 {
        return Err(Error::invalid(OP, "model has a Brownian component"));
    }
    let d = model.psi_roots()?;
    let mu = model.mu();
    let (u1, u2) = (d.upsilons()[0], d.upsilons()[1]);
    let g2 = d.gammas()[1];
    let xi0 = xi.eval(0.0);
    let y0 = match which {
        Which::W => [1.0 / mu, xi0 / (mu * mu) + u2 * g2],
        Which::Z => [1.0, xi0 / mu],
    };
    xi_prime(xi, 0.0, OP)?;
    let rhs = |x: f64, y: &[f64; 2]| {
        let a = xi.eval(x);
        let ap = xi.derivative(x).unwrap_or(0.0);
        [y[1], (a / mu + g2) * y[1] + (ap / mu - g2 * u1 * a) * y[0]]
    };
    let out = Dopri5::default().solve_on_nodes(rhs, y0, &grid.nodes())?;
    Ok(out.into_iter().map(|y| y[0]).collect())
}

/// Third-order ODE for `σ > 0`.
pub fn ode_solve_crash_sigma(
    model: &LevyModel,
    xi: &LogDiscount,
    grid: &LogGrid,
    which: Which,
) -> Result<Vec<f64>> {
    const OP: &str = "ode_solve_crash_sigma";
    check(model, xi, grid, OP)?;
    if model.sigma() == 0.0 {
        return Err(Error::invalid(OP, "model has no Brownian component"));
    }
    let d = model.psi_roots()?;
    let u1 = d.upsilons()[0];
    let (g2, g3) = (d.gammas()[1], d.gammas()[2]);
    let wp0 = d.w0_prime();
    let xi0 = xi.eval(0.0);
    let y0 = match which {
        Which::W => [0.0, wp0, d.w0_second()],
        Which::Z => [1.0, 0.0, wp0 * xi0],
    };
    xi_prime(xi, 0.0, OP)?;
    let rhs = |x: f64, y: &[f64; 3]| {
        let a = xi.eval(x);
        let ap = xi.derivative(x).unwrap_or(0.0);
        [
            y[1],
            y[2],
            (g2 + g3) * y[2] + (wp0 * a - g2 * g3) * y[1] + (wp0 * ap + g2 * g3 * u1 * a) * y[0],
        ]
    };
    let out = Dopri5::default().solve_on_nodes(rhs, y0, &grid.nodes())?;
    Ok(out.into_iter().map(|y| y[0]).collect())
}
