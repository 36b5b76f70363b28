//! Forward marching for `F(x) = f(x) + ∫_0^x W(x−y) ξ(y) F(y) dy`.

use crate::error::{Error, Result};
use crate::levy::RootDecomposition;
use crate::numerics::exp_moments;

/// Quadrature used in the march.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Composite trapezoid on `W(x−y) ξ(y) F(y)` with the half-weight diagonal.
    Trapezoid,
    /// Product integration: `ξF` is interpolated linearly on each cell and
    /// integrated exactly against every exponential mode of `W`. The
    /// convolution is carried recursively per mode, so a march costs
    /// `O(n · modes)` and stiff modes of `W` are resolved at any step size.
    #[default]
    ExponentialModes,
}

/// Marches one equation on nodes `x_k = k h`, `k < xi.len()`.
pub(crate) fn march(
    scheme: Scheme,
    decomp: &RootDecomposition,
    h: f64,
    xi: &[f64],
    forcing: &[f64],
) -> Result<Vec<f64>> {
    match scheme {
        Scheme::Trapezoid => march_trapezoid(decomp, h, xi, forcing),
        Scheme::ExponentialModes => march_modes(decomp, h, xi, forcing),
    }
}

fn singular(n: usize, h: f64, xi: &[f64], diag: f64) -> Error {
    let xi_max = xi.iter().copied().fold(0.0, f64::max);
    // diag scales like h (σ = 0) or h² (σ > 0); ask for a step that halves it.
    let x_max = h * (n.max(2) - 1) as f64;
    let factor = (2.0 * xi_max * diag).max(2.0);
    Error::GridTooCoarse {
        op: "renewal_solve",
        suggested_n: (x_max / (h / factor)).ceil() as usize + 1,
    }
}

fn march_modes(decomp: &RootDecomposition, h: f64, xi: &[f64], forcing: &[f64]) -> Result<Vec<f64>> {
    let n = xi.len();
    let modes: Vec<(f64, f64)> = decomp.modes().collect();
    let m = modes.len();
    // Per mode: decay e^{γh}, weight of the left and right cell values.
    let mut decay = vec![0.0; m];
    let mut wl = vec![0.0; m];
    let mut wr = vec![0.0; m];
    for (i, &(_, g)) in modes.iter().enumerate() {
        let z = g * h;
        let (e1, e2) = exp_moments(z);
        decay[i] = z.exp();
        wl[i] = h * e2;
        wr[i] = h * (e1 - e2);
    }
    let diag: f64 = modes.iter().zip(&wr).map(|(&(u, _), w)| u * w).sum();
    let mut acc = vec![0.0; m];
    let mut out = Vec::with_capacity(n);
    out.push(forcing[0]);
    let mut g_prev = xi[0] * forcing[0];
    for k in 1..n {
        let mut s = 0.0;
        for i in 0..m {
            acc[i] = decay[i] * acc[i] + wl[i] * g_prev;
            s += modes[i].0 * acc[i];
        }
        let denom = 1.0 - xi[k] * diag;
        if denom <= 1e-3 {
            return Err(singular(n, h, xi, diag));
        }
        let f = (forcing[k] + s) / denom;
        let g = xi[k] * f;
        for i in 0..m {
            acc[i] += wr[i] * g;
        }
        out.push(f);
        g_prev = g;
    }
    Ok(out)
}

fn march_trapezoid(
    decomp: &RootDecomposition,
    h: f64,
    xi: &[f64],
    forcing: &[f64],
) -> Result<Vec<f64>> {
    let n = xi.len();
    let kernel: Vec<f64> = (0..n).map(|k| decomp.w(k as f64 * h)).collect();
    let diag = 0.5 * h * kernel[0];
    let mut out = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    out.push(forcing[0]);
    g.push(xi[0] * forcing[0]);
    for k in 1..n {
        let mut s = 0.5 * kernel[k] * g[0];
        for j in 1..k {
            s += kernel[k - j] * g[j];
        }
        let denom = 1.0 - xi[k] * diag;
        if denom <= 1e-3 {
            return Err(singular(n, h, xi, diag));
        }
        let f = (forcing[k] + h * s) / denom;
        out.push(f);
        g.push(xi[k] * f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyModel;

    #[test]
    fn zero_potential_returns_forcing() {
        let m = LevyModel::martingale(0.05, 0.2, 6.0, 2.0).unwrap();
        let d = m.psi_roots().unwrap();
        let h = 0.01;
        let f: Vec<f64> = (0..50).map(|k| d.w(k as f64 * h)).collect();
        for s in [Scheme::Trapezoid, Scheme::ExponentialModes] {
            let out = march(s, &d, h, &vec![0.0; 50], &f).unwrap();
            assert_eq!(out, f);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let m = LevyModel::martingale(0.05, 0.0, 6.0, 2.0).unwrap();
        let d = m.psi_roots().unwrap();
        let h = 0.5;
        let xi = vec![20.0; 10];
        let f = vec![1.0; 10];
        match march(Scheme::Trapezoid, &d, h, &xi, &f) {
            Err(Error::GridTooCoarse { suggested_n, .. }) => assert!(suggested_n > 10),
            other => panic!("{other:?}"),
        }
    }
}
