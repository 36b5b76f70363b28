//! Discount-rate functions `ω(s)` and their log-coordinate views
//! `η_u^α(x) = ω(u e^x) − ψ(α)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::levy::LevyModel;

/// Which side of the level carries the extra rate of a step function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSide {
    /// `ω(s) = r + ϱ 1{s ≤ y}`
    Below,
    /// `ω(s) = r + ϱ 1{s > y}`
    Above,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscountKind {
    Constant {
        r: f64,
    },
    Step {
        r: f64,
        jump: f64,
        level: f64,
        side: StepSide,
    },
    /// `ω(s) = C s`
    Linear {
        c: f64,
    },
    /// `ω(s) = −C/(s+1) − D`
    Rational {
        c: f64,
        d: f64,
    },
    /// `ω(s) = (log s − log K)^+`
    LogArea {
        strike: f64,
    },
    /// Piecewise linear through `(s_i, ω_i)`; only defined on the knot hull.
    Tabulated {
        s: Arc<[f64]>,
        omega: Arc<[f64]>,
    },
    /// `ω(y) = base(scale / y) − shift`, the discount of a put-call dual.
    Reflected {
        base: Box<DiscountFn>,
        scale: f64,
        shift: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountFn {
    kind: DiscountKind,
    lower_bound: f64,
}

impl DiscountFn {
    pub fn constant(r: f64) -> Result<Self> {
        Self::from_kind(DiscountKind::Constant { r })
    }

    pub fn step(r: f64, jump: f64, level: f64, side: StepSide) -> Result<Self> {
        Self::from_kind(DiscountKind::Step {
            r,
            jump,
            level,
            side,
        })
    }

    pub fn linear(c: f64) -> Result<Self> {
        Self::from_kind(DiscountKind::Linear { c })
    }

    pub fn rational(c: f64, d: f64) -> Result<Self> {
        Self::from_kind(DiscountKind::Rational { c, d })
    }

    pub fn log_area(strike: f64) -> Result<Self> {
        Self::from_kind(DiscountKind::LogArea { strike })
    }

    pub fn tabulated(s: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        Self::from_kind(DiscountKind::Tabulated {
            s: s.into(),
            omega: omega.into(),
        })
    }

    pub fn reflected(base: DiscountFn, scale: f64, shift: f64) -> Result<Self> {
        Self::from_kind(DiscountKind::Reflected {
            base: Box::new(base),
            scale,
            shift,
        })
    }

    pub fn from_kind(kind: DiscountKind) -> Result<Self> {
        const OP: &str = "DiscountFn";
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let lower_bound = match &kind {
            DiscountKind::Constant { r } => {
                if !r.is_finite() {
                    return Err(Error::invalid(OP, "rate must be finite"));
                }
                *r
            }
            DiscountKind::Step {
                r, jump, level, ..
            } => {
                if !finite(&[*r, *jump, *level]) || *level <= 0.0 {
                    return Err(Error::invalid(OP, "step needs finite rates and level > 0"));
                }
                r.min(r + jump)
            }
            DiscountKind::Linear { c } => {
                if !c.is_finite() || *c < 0.0 {
                    return Err(Error::invalid(OP, "linear slope must be >= 0 to stay bounded below"));
                }
                0.0
            }
            DiscountKind::Rational { c, d } => {
                if !finite(&[*c, *d]) {
                    return Err(Error::invalid(OP, "rational coefficients must be finite"));
                }
                if *c >= 0.0 {
                    -c - d
                } else {
                    -d
                }
            }
            DiscountKind::LogArea { strike } => {
                if !(strike.is_finite() && *strike > 0.0) {
                    return Err(Error::invalid(OP, "strike must be positive"));
                }
                0.0
            }
            DiscountKind::Tabulated { s, omega } => {
                if s.len() < 2 || s.len() != omega.len() {
                    return Err(Error::invalid(OP, "table needs >= 2 knots of matching length"));
                }
                if !finite(s) || !finite(omega) || s[0] <= 0.0 {
                    return Err(Error::invalid(OP, "table knots must be finite with s > 0"));
                }
                if s.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid(OP, "table abscissae must increase strictly"));
                }
                omega.iter().copied().fold(f64::INFINITY, f64::min)
            }
            DiscountKind::Reflected { base, scale, shift } => {
                if !(scale.is_finite() && *scale > 0.0 && shift.is_finite()) {
                    return Err(Error::invalid(OP, "reflection needs scale > 0 and finite shift"));
                }
                base.lower_bound - shift
            }
        };
        Ok(DiscountFn { kind, lower_bound })
    }

    pub fn kind(&self) -> &DiscountKind {
        &self.kind
    }

    /// `inf_s ω(s)`.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// `ω(s)`; the tabulated kind rejects points outside its knot hull.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::OutsideDomain {
                op: "DiscountFn::eval",
                value: s,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if let Some((lo, hi)) = self.hull() {
            if s < lo || s > hi {
                return Err(Error::OutsideDomain {
                    op: "DiscountFn::eval",
                    value: s,
                    lo,
                    hi,
                });
            }
        }
        Ok(self.rate(s))
    }

    /// `ω(s)` without domain checks; tables are extended flat past their
    /// end knots. Callers that need the strict domain use [`eval`](Self::eval)
    /// or [`hull`](Self::hull).
    pub fn rate(&self, s: f64) -> f64 {
        match &self.kind {
            DiscountKind::Constant { r } => *r,
            DiscountKind::Step {
                r,
                jump,
                level,
                side,
            } => {
                let on = match side {
                    StepSide::Below => s <= *level,
                    StepSide::Above => s > *level,
                };
                if on {
                    r + jump
                } else {
                    *r
                }
            }
            DiscountKind::Linear { c } => c * s,
            DiscountKind::Rational { c, d } => -c / (s + 1.0) - d,
            DiscountKind::LogArea { strike } => (s.ln() - strike.ln()).max(0.0),
            DiscountKind::Tabulated { s: xs, omega } => {
                let n = xs.len();
                if s <= xs[0] {
                    return omega[0];
                }
                if s >= xs[n - 1] {
                    return omega[n - 1];
                }
                let k = xs.partition_point(|&x| x <= s) - 1;
                let w = (s - xs[k]) / (xs[k + 1] - xs[k]);
                omega[k] * (1.0 - w) + omega[k + 1] * w
            }
            DiscountKind::Reflected { base, scale, shift } => base.rate(scale / s) - shift,
        }
    }

    /// `ω'(s)` for the continuously differentiable kinds.
    pub fn derivative(&self, s: f64) -> Option<f64> {
        match &self.kind {
            DiscountKind::Constant { .. } => Some(0.0),
            DiscountKind::Linear { c } => Some(*c),
            DiscountKind::Rational { c, .. } => Some(c / ((s + 1.0) * (s + 1.0))),
            DiscountKind::Step { jump, .. } if *jump == 0.0 => Some(0.0),
            DiscountKind::Reflected { base, scale, .. } => {
                base.derivative(scale / s).map(|d| -d * scale / (s * s))
            }
            _ => None,
        }
    }

    pub fn is_differentiable(&self) -> bool {
        self.derivative(1.0).is_some()
    }

    /// Knot hull of a tabulated function, if any restriction applies.
    pub fn hull(&self) -> Option<(f64, f64)> {
        match &self.kind {
            DiscountKind::Tabulated { s, .. } => Some((s[0], s[s.len() - 1])),
            DiscountKind::Reflected { base, scale, .. } => {
                base.hull().map(|(lo, hi)| (scale / hi, scale / lo))
            }
            _ => None,
        }
    }

    /// `ω(0+)`, when it exists.
    pub fn limit_at_zero(&self) -> Option<f64> {
        match &self.kind {
            DiscountKind::Constant { r } => Some(*r),
            DiscountKind::Step {
                r, jump, side, ..
            } => Some(match side {
                StepSide::Below => r + jump,
                StepSide::Above => *r,
            }),
            DiscountKind::Linear { .. } | DiscountKind::LogArea { .. } => Some(0.0),
            DiscountKind::Rational { c, d } => Some(-c - d),
            DiscountKind::Tabulated { .. } => None,
            DiscountKind::Reflected { base, shift, .. } => {
                base.limit_at_infinity().map(|v| v - shift)
            }
        }
    }

    /// `lim_{s→∞} ω(s)`, when it is finite.
    pub fn limit_at_infinity(&self) -> Option<f64> {
        match &self.kind {
            DiscountKind::Constant { r } => Some(*r),
            DiscountKind::Step {
                r, jump, side, ..
            } => Some(match side {
                StepSide::Below => *r,
                StepSide::Above => r + jump,
            }),
            DiscountKind::Linear { c } if *c == 0.0 => Some(0.0),
            DiscountKind::Linear { .. } | DiscountKind::LogArea { .. } => None,
            DiscountKind::Rational { d, .. } => Some(-d),
            DiscountKind::Tabulated { .. } => None,
            DiscountKind::Reflected { base, shift, .. } => base.limit_at_zero().map(|v| v - shift),
        }
    }

    /// The constant value of `ω` on `(0, level]`, if `ω` is constant there.
    pub fn flat_below(&self, level: f64) -> Option<f64> {
        match &self.kind {
            DiscountKind::Constant { r } => Some(*r),
            DiscountKind::Step {
                r,
                jump,
                level: y,
                side,
            } => {
                if *jump == 0.0 {
                    Some(*r)
                } else if level <= *y {
                    Some(match side {
                        StepSide::Below => r + jump,
                        StepSide::Above => *r,
                    })
                } else {
                    None
                }
            }
            DiscountKind::Linear { c } => (*c == 0.0).then_some(0.0),
            DiscountKind::Rational { c, d } => (*c == 0.0).then_some(-d),
            DiscountKind::LogArea { strike } => (level <= *strike).then_some(0.0),
            DiscountKind::Tabulated { .. } => None,
            DiscountKind::Reflected { base, shift, .. } => match base.kind {
                DiscountKind::Constant { r } => Some(r - shift),
                _ => None,
            },
        }
    }

    /// `Some(c)` when `ω ≡ c` on `(0, 1]`.
    pub fn check_flat_below_one(&self) -> Option<f64> {
        self.flat_below(1.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.lower_bound >= 0.0
    }

    /// Whether `ω` is concave and non-decreasing on `(0, ∞)`; tables are
    /// checked on their knots, which is exact for the linear interpolant.
    pub fn is_concave_nondecreasing(&self) -> bool {
        match &self.kind {
            DiscountKind::Constant { .. } => true,
            DiscountKind::Linear { .. } => true,
            DiscountKind::Rational { c, .. } => *c >= 0.0,
            DiscountKind::Step { jump, .. } => *jump == 0.0,
            DiscountKind::LogArea { .. } => false,
            DiscountKind::Tabulated { s, omega } => {
                let slopes: Vec<f64> = s
                    .windows(2)
                    .zip(omega.windows(2))
                    .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
                    .collect();
                slopes.iter().all(|&d| d >= 0.0) && slopes.windows(2).all(|w| w[1] <= w[0])
            }
            DiscountKind::Reflected { base, .. } => {
                matches!(base.kind, DiscountKind::Constant { .. })
            }
        }
    }

    /// `η_u^α(x) = ω(u e^x) − ψ(α)`.
    pub fn shift_tilt(&self, u: f64, model: &LevyModel, alpha: f64) -> Result<LogDiscount> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::invalid("shift_tilt", "u must be positive"));
        }
        if !(alpha >= 0.0) {
            return Err(Error::invalid("shift_tilt", "alpha must be >= 0"));
        }
        let tilt = if alpha == 0.0 { 0.0 } else { model.psi(alpha) };
        Ok(LogDiscount {
            base: self.clone(),
            shift: u.ln(),
            tilt,
        })
    }

    /// `η(x) = ω(e^x)`.
    pub fn log_view(&self) -> LogDiscount {
        LogDiscount {
            base: self.clone(),
            shift: 0.0,
            tilt: 0.0,
        }
    }
}

/// Log-coordinate view `x ↦ ω(e^{x + shift}) − tilt`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDiscount {
    base: DiscountFn,
    shift: f64,
    tilt: f64,
}

impl LogDiscount {
    pub fn base(&self) -> &DiscountFn {
        &self.base
    }
    pub fn shift(&self) -> f64 {
        self.shift
    }
    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.base.rate((x + self.shift).exp()) - self.tilt
    }

    /// The same discount seen from the origin moved to `dx`.
    pub fn moved(&self, dx: f64) -> LogDiscount {
        LogDiscount {
            base: self.base.clone(),
            shift: self.shift + dx,
            tilt: self.tilt,
        }
    }

    /// `dη/dx = s ω'(s)` at `s = e^{x + shift}`.
    pub fn derivative(&self, x: f64) -> Option<f64> {
        let s = (x + self.shift).exp();
        self.base.derivative(s).map(|d| s * d)
    }

    /// Fails when a tabulated base does not cover `[x_lo, x_hi]`.
    pub fn check_covers(&self, x_lo: f64, x_hi: f64) -> Result<()> {
        if let Some((lo, hi)) = self.base.hull() {
            let (a, b) = ((x_lo + self.shift).exp(), (x_hi + self.shift).exp());
            if a < lo * (1.0 - 1e-12) || b > hi * (1.0 + 1e-12) {
                return Err(Error::OutsideDomain {
                    op: "LogDiscount",
                    value: if a < lo { a } else { b },
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// The constant value of `η` on `(−∞, 0]`, if any.
    pub fn flat_below_zero(&self) -> Option<f64> {
        self.base.flat_below(self.shift.exp()).map(|c| c - self.tilt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(DiscountFn::constant(0.05).unwrap().eval(3.0).unwrap(), 0.05);
        let rat = DiscountFn::rational(0.001, 0.01).unwrap();
        assert!((rat.eval(1.0).unwrap() + 0.0105).abs() < 1e-16);
        let lin = DiscountFn::linear(0.1).unwrap();
        assert!((lin.eval(4.56).unwrap() - 0.456).abs() < 1e-15);
        assert!(lin.eval(0.0).is_err());
    }

    #[test]
    fn tabulated_hull_enforced() {
        let t = DiscountFn::tabulated(vec![1.0, 2.0, 4.0], vec![0.0, 0.1, 0.15]).unwrap();
        assert!(t.eval(0.5).is_err());
        assert!(t.eval(5.0).is_err());
        assert!((t.eval(3.0).unwrap() - 0.125).abs() < 1e-15);
        assert!(t.is_concave_nondecreasing());
        assert!(DiscountFn::tabulated(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn shift_tilt_examples() {
        let m = LevyModel::martingale(0.05, 0.2, 0.0, 1.0).unwrap();
        let lin = DiscountFn::linear(0.1).unwrap();
        let eta = lin.shift_tilt(1.0, &m, 0.0).unwrap();
        for &x in &[-2.0, 0.0, 0.7, 3.0] {
            assert!((eta.eval(x) - lin.eval(f64::exp(x)).unwrap()).abs() < 1e-15);
        }
        let eta_u = lin.shift_tilt(4.56, &m, 0.0).unwrap();
        assert!((eta_u.eval(0.0) - 0.456).abs() < 1e-15);
        // ψ(1) = r under martingale calibration.
        let c = DiscountFn::constant(0.05).unwrap().shift_tilt(2.0, &m, 1.0).unwrap();
        assert!(c.eval(0.3).abs() < 1e-15);
    }

    #[test]
    fn flat_below_one_examples() {
        assert_eq!(DiscountFn::constant(0.05).unwrap().check_flat_below_one(), Some(0.05));
        let step = DiscountFn::step(0.05, 0.02, 0.5, StepSide::Below).unwrap();
        assert_eq!(step.check_flat_below_one(), None);
        assert_eq!(DiscountFn::linear(0.1).unwrap().check_flat_below_one(), None);
        let high = DiscountFn::step(0.05, 0.02, 3.0, StepSide::Below).unwrap();
        assert_eq!(high.check_flat_below_one(), Some(0.07));
        assert_eq!(DiscountFn::log_area(20.0).unwrap().check_flat_below_one(), Some(0.0));
    }

    #[test]
    fn reflected_dual() {
        let base = DiscountFn::linear(0.1).unwrap();
        let dual = DiscountFn::reflected(base, 200.0, 0.05).unwrap();
        assert!((dual.rate(10.0) - (2.0 - 0.05)).abs() < 1e-15);
        let d = dual.derivative(10.0).unwrap();
        let fd = (dual.rate(10.0 + 1e-6) - dual.rate(10.0 - 1e-6)) / 2e-6;
        assert!((d - fd).abs() < 1e-7);
    }

    #[test]
    fn lower_bounds() {
        assert_eq!(DiscountFn::rational(0.001, 0.01).unwrap().lower_bound(), -0.011);
        assert_eq!(DiscountFn::step(0.05, -0.1, 1.0, StepSide::Above).unwrap().lower_bound(), -0.05);
        assert!(DiscountFn::linear(-1.0).is_err());
    }

    fn kinds() -> impl Strategy<Value = DiscountFn> {
        prop_oneof![
            (-0.1f64..0.2).prop_map(|r| DiscountFn::constant(r).unwrap()),
            (0.0f64..1.0).prop_map(|c| DiscountFn::linear(c).unwrap()),
            (0.0f64..0.1, -0.05f64..0.05).prop_map(|(c, d)| DiscountFn::rational(c, d).unwrap()),
            (0.0f64..0.1, -0.1f64..0.1, 0.1f64..30.0)
                .prop_map(|(r, j, y)| DiscountFn::step(r, j, y, StepSide::Below).unwrap()),
            (1.0f64..30.0).prop_map(|k| DiscountFn::log_area(k).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn never_below_lower_bound(f in kinds(), ls in -8.0f64..6.0) {
            let s = ls.exp();
            prop_assert!(f.eval(s).unwrap() >= f.lower_bound() - 1e-15);
        }

        #[test]
        fn log_view_is_eval_of_exp(f in kinds(), x in -6.0f64..5.0) {
            let m = LevyModel::black_scholes(0.05, 0.2).unwrap();
            let v = f.shift_tilt(1.0, &m, 0.0).unwrap();
            prop_assert!((v.eval(x) - f.eval(x.exp()).unwrap()).abs() <= 1e-15 * (1.0 + v.eval(x).abs()));
        }

        #[test]
        fn concave_kinds_have_concave_samples(f in kinds(), a in 0.01f64..10.0, h in 0.001f64..2.0) {
            if f.is_concave_nondecreasing() {
                let (y0, y1, y2) = (f.rate(a), f.rate(a + h), f.rate(a + 2.0 * h));
                let tol = 1e-14 * (1.0 + y2.abs());
                prop_assert!(y1 - y0 >= -tol);
                prop_assert!(y2 - 2.0 * y1 + y0 <= tol);
            }
        }
    }
}
