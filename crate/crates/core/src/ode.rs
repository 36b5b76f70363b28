//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-11,
            atol: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Dopri5 {
            rtol,
            atol,
            ..Default::default()
        }
    }

    /// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction).
    /// `h` carries the step-size guess in and the last accepted size out.
    pub fn integrate<const N: usize, F>(
        &self,
        f: &mut F,
        x0: f64,
        y0: [f64; N],
        x1: f64,
        h: &mut f64,
    ) -> Result<[f64; N]>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let span = x1 - x0;
        if span == 0.0 {
            return Ok(y0);
        }
        let dir = span.signum();
        let mut x = x0;
        let mut y = y0;
        let mut step = if *h == 0.0 || !h.is_finite() {
            1e-3 * span.abs()
        } else {
            h.abs().min(span.abs())
        };
        let mut k1 = f(x, &y);
        for _ in 0..self.max_steps {
            let remaining = (x1 - x) * dir;
            if remaining <= 1e-14 * (1.0 + x1.abs()) {
                return Ok(y);
            }
            let last = step >= remaining;
            let hs = if last { remaining } else { step } * dir;
            let k2 = f(x + C2 * hs, &axpy(&y, &[(hs * A21, &k1)]));
            let k3 = f(x + C3 * hs, &axpy(&y, &[(hs * A31, &k1), (hs * A32, &k2)]));
            let k4 = f(
                x + C4 * hs,
                &axpy(&y, &[(hs * A41, &k1), (hs * A42, &k2), (hs * A43, &k3)]),
            );
            let k5 = f(
                x + C5 * hs,
                &axpy(
                    &y,
                    &[(hs * A51, &k1), (hs * A52, &k2), (hs * A53, &k3), (hs * A54, &k4)],
                ),
            );
            let k6 = f(
                x + hs,
                &axpy(
                    &y,
                    &[
                        (hs * A61, &k1),
                        (hs * A62, &k2),
                        (hs * A63, &k3),
                        (hs * A64, &k4),
                        (hs * A65, &k5),
                    ],
                ),
            );
            let y_new = axpy(
                &y,
                &[(hs * B1, &k1), (hs * B3, &k3), (hs * B4, &k4), (hs * B5, &k5), (hs * B6, &k6)],
            );
            let k7 = f(x + hs, &y_new);
            let mut err = 0.0_f64;
            for i in 0..N {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                step *= 0.1;
                if step < 1e-300 {
                    return Err(Error::Integration {
                        op: "Dopri5",
                        x,
                        msg: "non-finite state".into(),
                    });
                }
                continue;
            }
            if err <= 1.0 {
                x = if last { x1 } else { x + hs };
                y = y_new;
                k1 = k7;
                if !last {
                    *h = step;
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                step *= fac;
            } else {
                step *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if step <= 1e-15 * (1.0 + x.abs()) {
                    return Err(Error::Integration {
                        op: "Dopri5",
                        x,
                        msg: "step size underflow".into(),
                    });
                }
            }
        }
        Err(Error::Integration {
            op: "Dopri5",
            x,
            msg: format!("more than {} steps", self.max_steps),
        })
    }

    /// Solution values at each of `nodes`, starting from `y0` at `nodes[0]`.
    pub fn solve_on_nodes<const N: usize, F>(
        &self,
        mut f: F,
        y0: [f64; N],
        nodes: &[f64],
    ) -> Result<Vec<[f64; N]>>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let mut out = Vec::with_capacity(nodes.len());
        if nodes.is_empty() {
            return Ok(out);
        }
        out.push(y0);
        let mut y = y0;
        let mut h = 0.0;
        for w in nodes.windows(2) {
            y = self.integrate(&mut f, w[0], y, w[1], &mut h)?;
            out.push(y);
        }
        Ok(out)
    }
}
