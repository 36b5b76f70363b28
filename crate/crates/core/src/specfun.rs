//! Gauss `₂F₁` and Kummer `₁F₁` hypergeometric functions, the Gamma
//! function, and the large-argument coefficient ratio of Kummer combinations.

use num_complex::Complex64;

use crate::error::{Error, Result};

const SERIES_BUDGET: usize = 10_000;

/// Parameters of `₂F₁(a, b; c; x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeometricParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HypergeometricParams {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        HypergeometricParams { a, b, c }
    }
}

/// Parameters of `₁F₁(a; b; x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KummerParams {
    pub a: f64,
    pub b: f64,
}

impl KummerParams {
    pub fn new(a: f64, b: f64) -> Self {
        KummerParams { a, b }
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `Γ(x)` by the Lanczos approximation with reflection for `x < 1/2`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return pi / ((pi * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

fn gauss_series(p: HypergeometricParams, x: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut comp = 0.0;
    for n in 0..SERIES_BUDGET {
        let nf = n as f64;
        term *= (p.a + nf) * (p.b + nf) / ((p.c + nf) * (nf + 1.0)) * x;
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term == 0.0 || (term.abs() <= 1e-17 * sum.abs() && n > 2) {
            return Ok(sum);
        }
    }
    Err(Error::no_convergence(
        "gauss_2f1",
        format!("series budget of {SERIES_BUDGET} terms exhausted at x = {x}"),
    ))
}

/// `₂F₁(a, b; c; x)` for `x < 1`.
pub fn gauss_2f1(p: HypergeometricParams, x: f64) -> Result<f64> {
    if is_nonpositive_integer(p.c) {
        return Err(Error::invalid("gauss_2f1", "c is a non-positive integer"));
    }
    if !(x < 1.0) {
        return Err(Error::OutsideDomain {
            op: "gauss_2f1",
            value: x,
            lo: f64::NEG_INFINITY,
            hi: 1.0,
        });
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < -0.5 {
        // Pfaff: (1−x)^{−a} ₂F₁(a, c−b; c; x/(x−1))
        let z = x / (x - 1.0);
        let inner = gauss_series(HypergeometricParams::new(p.a, p.c - p.b, p.c), z)?;
        return Ok((1.0 - x).powf(-p.a) * inner);
    }
    gauss_series(p, x)
}

/// `₁F₁` as `mantissa · e^{log_scale}` so that large arguments do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }
}

fn kummer_series_scaled(p: KummerParams, x: f64) -> Result<Scaled> {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut comp = 0.0_f64;
    let mut log_scale = 0.0_f64;
    for n in 0..SERIES_BUDGET {
        let nf = n as f64;
        term *= (p.a + nf) / ((p.b + nf) * (nf + 1.0)) * x;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if sum.abs() > 1e250 {
            let k = 1e-250_f64;
            sum *= k;
            term *= k;
            comp *= k;
            log_scale += 250.0 * std::f64::consts::LN_10;
        }
        if term == 0.0 || (term.abs() <= 1e-17 * sum.abs() && nf > x.abs()) {
            return Ok(Scaled {
                mantissa: sum,
                log_scale,
            });
        }
    }
    Err(Error::no_convergence(
        "kummer_1f1",
        format!("series budget of {SERIES_BUDGET} terms exhausted at x = {x}"),
    ))
}

/// `₁F₁(a; b; x)` with overflow-safe scaling.
pub fn kummer_1f1_scaled(p: KummerParams, x: f64) -> Result<Scaled> {
    if is_nonpositive_integer(p.b) {
        return Err(Error::invalid("kummer_1f1", "b is a non-positive integer"));
    }
    if x == 0.0 {
        return Ok(Scaled {
            mantissa: 1.0,
            log_scale: 0.0,
        });
    }
    if x < 0.0 {
        // Kummer transformation keeps the series free of cancellation.
        let inner = kummer_series_scaled(KummerParams::new(p.b - p.a, p.b), -x)?;
        return Ok(Scaled {
            mantissa: inner.mantissa,
            log_scale: inner.log_scale + x,
        });
    }
    kummer_series_scaled(p, x)
}

/// `₁F₁(a; b; x)`.
pub fn kummer_1f1(p: KummerParams, x: f64) -> Result<f64> {
    kummer_1f1_scaled(p, x).map(|s| s.value())
}

/// `F(x) = K_1 ₁F₁(a_1; b_1; A e^x) + K_2 (−A)^B e^{Bx} ₁F₁(a_2; b_2; A e^x)`
///
/// Both terms grow like `Γ(b)/Γ(a) (Ae^x)^{a−b} exp(Ae^x)`; when
/// `a_1 − b_1 = a_2 − b_2 + B` they share a rate and the combination has a
/// single leading coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KummerCombination {
    pub k1: Complex64,
    pub k2: Complex64,
    pub first: KummerParams,
    pub second: KummerParams,
    pub a: f64,
    pub b: f64,
}

impl KummerCombination {
    /// Coefficients chosen so that `F(0) = value` and `F'(0) = slope`.
    pub fn from_initial_conditions(
        first: KummerParams,
        second: KummerParams,
        a: f64,
        b: f64,
        value: f64,
        slope: f64,
    ) -> Result<Self> {
        let m1 = kummer_1f1(first, a)?;
        let m1p = a * first.a / first.b * kummer_1f1(KummerParams::new(first.a + 1.0, first.b + 1.0), a)?;
        let m2 = kummer_1f1(second, a)?;
        let m2p = b * m2
            + a * second.a / second.b * kummer_1f1(KummerParams::new(second.a + 1.0, second.b + 1.0), a)?;
        let det = m1 * m2p - m2 * m1p;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::invalid("KummerCombination", "basis is degenerate at 0"));
        }
        let c1 = (value * m2p - slope * m2) / det;
        let c2 = (m1 * slope - m1p * value) / det;
        let phase = minus_a_pow_b(a, b);
        Ok(KummerCombination {
            k1: Complex64::new(c1, 0.0),
            k2: Complex64::new(c2, 0.0) / phase,
            first,
            second,
            a,
            b,
        })
    }

    /// Real part of the combination at `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let t = self.a * x.exp();
        let f1 = kummer_1f1(self.first, t)?;
        let f2 = kummer_1f1(self.second, t)?;
        let phase = minus_a_pow_b(self.a, self.b);
        let v = self.k1 * f1 + self.k2 * phase * (self.b * x).exp() * f2;
        Ok(v.re)
    }

    /// Leading large-`x` coefficient
    /// `K_1 Γ(b_1)/Γ(a_1) A^{a_1−b_1} + K_2 (−A)^B Γ(b_2)/Γ(a_2) A^{a_2−b_2}`.
    pub fn leading_coefficient(&self) -> Complex64 {
        let (p1, p2) = (self.first, self.second);
        let t1 = self.k1 * (gamma(p1.b) / gamma(p1.a) * self.a.powf(p1.a - p1.b));
        let t2 = self.k2
            * minus_a_pow_b(self.a, self.b)
            * (gamma(p2.b) / gamma(p2.a) * self.a.powf(p2.a - p2.b));
        t1 + t2
    }
}

/// `(−A)^B` on the principal branch for `A > 0`.
fn minus_a_pow_b(a: f64, b: f64) -> Complex64 {
    Complex64::from_polar(a.powf(b), std::f64::consts::PI * b)
}

/// Ratio of the leading coefficients of two Kummer combinations, which is
/// `lim F_num(x)/F_den(x)`.
pub fn kummer_ratio_limit(numer: &KummerCombination, denom: &KummerCombination) -> Result<f64> {
    let n = numer.leading_coefficient();
    let d = denom.leading_coefficient();
    if d.re == 0.0 || !d.re.is_finite() {
        return Err(Error::invalid("kummer_ratio_limit", "vanishing denominator"));
    }
    Ok(n.re / d.re)
}
