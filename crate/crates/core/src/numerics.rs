//! Small numerical kernels shared across modules: bracketing root finders,
//! golden-section search, low-degree polynomial roots, interpolation and
//! summation.

use crate::error::{Error, Result};

/// Brent's method on a sign-changing bracket.
pub fn brent<F: FnMut(f64) -> f64>(
    op: &'static str,
    mut f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::RootBracket { op, lo, hi });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::no_convergence(op, format!("brent stalled near {b}")))
}

/// Golden-section search for a maximum of a unimodal function on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > xtol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Real roots of a polynomial of degree at most three, coefficients given
/// from the leading term down. Roots are returned in ascending order.
///
/// The polynomial is split into monotone pieces at the critical points and
/// each piece with a sign change is bisected to machine precision, which is
/// slower than the closed forms but never loses the small roots to
/// cancellation.
pub fn real_poly_roots(coeffs: &[f64]) -> Vec<f64> {
    let c: Vec<f64> = coeffs
        .iter()
        .copied()
        .skip_while(|&a| a == 0.0)
        .collect();
    match c.len() {
        0 | 1 => Vec::new(),
        2 => vec![-c[1] / c[0]],
        _ => {
            let deg = c.len() - 1;
            let dc: Vec<f64> = c[..deg]
                .iter()
                .enumerate()
                .map(|(i, &a)| a * (deg - i) as f64)
                .collect();
            let crit = real_poly_roots(&dc);
            let scale = c.iter().map(|a| (a / c[0]).abs()).fold(1.0, f64::max);
            let far = 2.0 * scale + 1.0;
            let mut knots = vec![-far];
            knots.extend(crit.iter().copied());
            knots.push(far);
            for k in knots.iter_mut() {
                *k = k.clamp(-far, far);
            }
            let mut roots = Vec::new();
            for w in knots.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (fa, fb) = (poly_eval(&c, a), poly_eval(&c, b));
                if fa == 0.0 {
                    push_unique(&mut roots, a);
                    continue;
                }
                if fa.signum() == fb.signum() {
                    if fb == 0.0 {
                        push_unique(&mut roots, b);
                    }
                    continue;
                }
                push_unique(&mut roots, bisect_monotone(&c, a, b));
            }
            roots
        }
    }
}

fn push_unique(v: &mut Vec<f64>, x: f64) {
    if v.last().map_or(true, |&y| y != x) {
        v.push(x);
    }
}

fn bisect_monotone(c: &[f64], mut a: f64, mut b: f64) -> f64 {
    let fa = poly_eval(c, a);
    for _ in 0..2000 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = poly_eval(c, m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Four-point Lagrange interpolation on a uniform grid `x_k = x0 + k h`.
/// Falls back to the nearest in-range stencil at the ends.
pub fn interp_uniform(values: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    if n < 4 {
        let t = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
        let k = (t.floor() as usize).min(n - 2);
        let w = t - k as f64;
        return values[k] * (1.0 - w) + values[k + 1] * w;
    }
    let t = (x - x0) / h;
    let k = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let s = t - k as f64;
    let (y0, y1, y2, y3) = (values[k], values[k + 1], values[k + 2], values[k + 3]);
    let l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    let l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    let l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    let l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    y0 * l0 + y1 * l1 + y2 * l2 + y3 * l3
}

/// Trapezoid rule with the Euler–Maclaurin end correction, on a uniform grid.
pub fn trapezoid_em(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.5 * (f[0] + f[n - 1]) + f[1..n - 1].iter().sum::<f64>();
    s *= h;
    if n >= 4 {
        let d0 = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        let d1 = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
        s -= h * h / 12.0 * (d1 - d0);
    }
    s
}

/// Cubic Hermite interpolation on `[x0, x1]` with values and slopes at both ends.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let slope = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, slope)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule for `∫_a^b f` with `panels` equal panels.
pub fn integrate_gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if b <= a {
        return 0.0;
    }
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        let mut s = 0.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Pairwise summation; the reduction tree depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `(e^z - 1)/z` and `(e^z (z - 1) + 1)/z^2`, accurate near zero.
pub fn exp_moments(z: f64) -> (f64, f64) {
    if z.abs() < 0.1 {
        // Σ z^n/(n+1)! and Σ z^n/(n!(n+2))
        let (mut e1, mut e2) = (0.0, 0.0);
        let mut zn_over_fact = 1.0;
        for n in 0..14 {
            let nf = n as f64;
            e1 += zn_over_fact / (nf + 1.0);
            e2 += zn_over_fact / (nf + 2.0);
            zn_over_fact *= z / (nf + 1.0);
        }
        (e1, e2)
    } else {
        let ez = z.exp();
        ((ez - 1.0) / z, (ez * (z - 1.0) + 1.0) / (z * z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cos_root() {
        let x = brent("t", f64::cos, 1.0, 2.0, 1e-14).unwrap();
        assert!((x - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_bad_bracket() {
        assert!(brent("t", |x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, _) = golden_max(|x| -(x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = gauss_legendre(8);
        assert!((rule.1.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // Degree 15 is integrated exactly by 8 nodes.
        let v = integrate_gl(|x| x.powi(14) + x.powi(15), -1.0, 1.0, 1, &rule);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let e = integrate_gl(f64::exp, 0.0, 3.0, 4, &rule);
        assert!((e - (3.0f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cubic_roots_with_wide_spread() {
        // (x - 1e-3)(x + 2)(x + 150)
        let r = real_poly_roots(&[1.0, 151.999, 299.848, -0.3]);
        let want = [-150.0, -2.0, 1e-3];
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip(want) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn quadratic_without_real_roots() {
        assert!(real_poly_roots(&[1.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn lagrange_exact_on_cubics() {
        let f = |x: f64| 2.0 * x * x * x - x + 0.5;
        let v: Vec<f64> = (0..10).map(|k| f(0.1 * k as f64)).collect();
        for &x in &[0.0, 0.05, 0.37, 0.88, 0.9] {
            assert!((interp_uniform(&v, 0.0, 0.1, x) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn exp_moments_match_closed_form() {
        for &z in &[-3.0, -0.11, 0.11, 2.0] {
            let (a, b) = exp_moments(z);
            let (c, d) = exp_moments(z * (1.0 - 1e-12));
            assert!((a - c).abs() < 1e-10 && (b - d).abs() < 1e-10);
        }
        let (a, b) = exp_moments(0.05);
        assert!((a - (0.05f64.exp() - 1.0) / 0.05).abs() < 1e-14);
        assert!((b - (0.05f64.exp() * (0.05 - 1.0) + 1.0) / 0.0025).abs() < 1e-11);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        let d = norm_cdf(1.959963984540054) - 0.975;
        assert!(d.abs() < 1e-13, "{d:e}");
        assert!((norm_cdf(-3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-17);
    }
}
