//! Spectrally negative Lévy models `X_t = log s + ζt + σB_t − Σ Y_i` with
//! `Y_i ~ Exp(φ)` arriving at rate `λ`.

use crate::error::{Error, Result};
use crate::numerics::{brent, real_poly_roots};

/// Arithmetic drift that makes `e^{-rt} S_t` a martingale.
pub fn martingale_drift(r: f64, lambda: f64, phi: f64) -> f64 {
    r + lambda / (phi + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyModel {
    zeta: f64,
    sigma: f64,
    lambda: f64,
    phi: f64,
    mu: f64,
}

impl LevyModel {
    /// Builds the model from the arithmetic drift `μ` of the price process.
    pub fn new(mu: f64, sigma: f64, lambda: f64, phi: f64) -> Result<Self> {
        const OP: &str = "LevyModel::new";
        if !(mu.is_finite() && sigma.is_finite() && lambda.is_finite() && phi.is_finite()) {
            return Err(Error::invalid(OP, "parameters must be finite"));
        }
        if sigma < 0.0 || lambda < 0.0 {
            return Err(Error::invalid(OP, "sigma and lambda must be non-negative"));
        }
        if phi <= 0.0 {
            return Err(Error::invalid(OP, "phi must be positive"));
        }
        if sigma == 0.0 && lambda == 0.0 {
            return Err(Error::invalid(OP, "sigma = 0 requires jumps (lambda > 0)"));
        }
        if sigma == 0.0 && mu <= 0.0 {
            return Err(Error::invalid(
                OP,
                "sigma = 0 requires a positive drift, otherwise the log-price is monotone",
            ));
        }
        Ok(LevyModel {
            zeta: mu - 0.5 * sigma * sigma,
            sigma,
            lambda,
            phi,
            mu,
        })
    }

    /// Pure Black–Scholes dynamics.
    pub fn black_scholes(mu: f64, sigma: f64) -> Result<Self> {
        if sigma <= 0.0 {
            return Err(Error::invalid("LevyModel::black_scholes", "sigma must be positive"));
        }
        Self::new(mu, sigma, 0.0, 1.0)
    }

    /// Model calibrated so that `ψ(1) = r`.
    pub fn martingale(r: f64, sigma: f64, lambda: f64, phi: f64) -> Result<Self> {
        Self::new(martingale_drift(r, lambda, phi), sigma, lambda, phi)
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn has_jumps(&self) -> bool {
        self.lambda > 0.0
    }

    /// `ψ(θ)` for any `θ > −φ`; no domain check.
    pub fn psi(&self, theta: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let jump = if self.lambda > 0.0 {
            self.lambda * theta / (self.phi + theta)
        } else {
            0.0
        };
        self.zeta * theta + 0.5 * s2 * theta * theta - jump
    }

    pub fn psi_prime(&self, theta: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let jump = if self.lambda > 0.0 {
            let d = self.phi + theta;
            self.lambda * self.phi / (d * d)
        } else {
            0.0
        };
        self.zeta + s2 * theta - jump
    }

    /// Laplace exponent `ψ(θ) = log E[e^{θ X_1}]`.
    pub fn laplace_exponent(&self, theta: f64) -> Result<f64> {
        if !theta.is_finite() || (self.lambda > 0.0 && theta <= -self.phi) {
            return Err(Error::OutsideDomain {
                op: "laplace_exponent",
                value: theta,
                lo: -self.phi,
                hi: f64::INFINITY,
            });
        }
        Ok(self.psi(theta))
    }

    /// Right inverse `Φ(q)`: the largest root of `ψ(θ) = q`, for `q ≥ 0`.
    pub fn phi_right_inverse(&self, q: f64) -> Result<f64> {
        const OP: &str = "phi_right_inverse";
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::invalid(OP, format!("q must be finite and >= 0, got {q}")));
        }
        self.largest_root(q, OP)
    }

    /// Largest real root of `ψ(θ) = q` on `(−φ, ∞)`, for any `q` above the
    /// minimum of `ψ` there.
    pub(crate) fn largest_root(&self, q: f64, op: &'static str) -> Result<f64> {
        // ψ is convex on (−φ, ∞); start right of its minimiser.
        let start = self.argmin_psi();
        if self.psi(start) > q {
            return Err(Error::RootBracket {
                op,
                lo: start,
                hi: f64::INFINITY,
            });
        }
        let mut hi = start.max(0.0) + 1.0;
        let mut guard = 0;
        while self.psi(hi) <= q {
            hi = 2.0 * hi + 1.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::RootBracket { op, lo: start, hi });
            }
        }
        if self.psi(start) == q {
            return Ok(start);
        }
        if q == 0.0 && start < 0.0 {
            return Ok(0.0);
        }
        brent(op, |t| self.psi(t) - q, start, hi, 1e-15 * hi.max(1.0))
    }

    /// Minimiser of `ψ` on `(−φ, ∞)`.
    fn argmin_psi(&self) -> f64 {
        // ψ' is increasing; find where it changes sign.
        let lo = if self.lambda > 0.0 {
            -self.phi * (1.0 - 1e-12)
        } else {
            -1e6
        };
        if self.psi_prime(0.0) >= 0.0 && self.psi_prime(lo) >= 0.0 {
            return lo;
        }
        let mut a = lo;
        let mut b = 0.0_f64;
        while self.psi_prime(b) < 0.0 {
            a = b;
            b = 2.0 * b + 1.0;
        }
        if self.psi_prime(a) >= 0.0 {
            return a;
        }
        brent("argmin_psi", |t| self.psi_prime(t), a, b, 1e-15).unwrap_or(0.5 * (a + b))
    }

    /// Roots `γ_i` of `ψ(γ) = 0` and the partial-fraction weights
    /// `Υ_i = 1/ψ'(γ_i)`, so that `W(x) = Σ Υ_i e^{γ_i x}`.
    pub fn psi_roots(&self) -> Result<RootDecomposition> {
        if self.sigma == 0.0 && (self.lambda - self.phi * self.mu).abs() <= 1e-14 * self.lambda {
            return Err(Error::invalid(
                "psi_roots",
                "lambda = phi * mu makes two roots collide",
            ));
        }
        self.roots_at(0.0)
    }

    /// Root decomposition of `1/(ψ(θ) − q)`, which gives the `q`-scale
    /// function `W^{(q)}(x) = Σ Υ_i e^{γ_i x}`.
    ///
    /// For `q = 0` the zero root comes first and the others follow in
    /// descending order; otherwise all roots are in descending order, so the
    /// first entry is `Φ(q)` whenever `q ≥ 0`.
    pub fn roots_at(&self, q: f64) -> Result<RootDecomposition> {
        const OP: &str = "psi_roots";
        let s2h = 0.5 * self.sigma * self.sigma;
        let (z, l, f) = (self.zeta, self.lambda, self.phi);
        // (ψ(θ) − q)(φ + θ) as a polynomial, leading coefficient first.
        let coeffs: Vec<f64> = if l > 0.0 {
            vec![s2h, z + s2h * f, z * f - l - q, -q * f]
        } else {
            vec![s2h, z, -q]
        };
        let expected = if l == 0.0 {
            2
        } else if s2h > 0.0 {
            3
        } else {
            2
        };
        let mut gammas: Vec<f64> = if q == 0.0 {
            // Factor out θ = 0 exactly.
            let deflated = &coeffs[..coeffs.len() - 1];
            let mut r = real_poly_roots(deflated);
            r.retain(|&g| g != 0.0);
            r.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let mut v = vec![0.0];
            v.extend(r);
            v
        } else {
            let mut r = real_poly_roots(&coeffs);
            r.sort_by(|a, b| b.partial_cmp(a).unwrap());
            r
        };
        if gammas.len() != expected {
            return Err(Error::no_convergence(
                OP,
                format!("expected {expected} real roots of psi = {q}, found {}", gammas.len()),
            ));
        }
        // Newton polish on ψ itself.
        for g in gammas.iter_mut() {
            if *g == 0.0 && q == 0.0 {
                continue;
            }
            for _ in 0..3 {
                let d = self.psi_prime(*g);
                if d == 0.0 {
                    break;
                }
                let step = (self.psi(*g) - q) / d;
                if !step.is_finite() || step.abs() > 1e-6 * (1.0 + g.abs()) {
                    break;
                }
                *g -= step;
            }
        }
        for w in gammas.windows(2) {
            if (w[0] - w[1]).abs() <= 1e-12 * (1.0 + w[0].abs()) {
                return Err(Error::invalid(OP, "colliding roots"));
            }
        }
        let upsilons = gammas.iter().map(|&g| 1.0 / self.psi_prime(g)).collect();
        Ok(RootDecomposition {
            q,
            gammas,
            upsilons,
        })
    }

    /// Esscher tilt by `α ≥ 0`: the law of `X` under `e^{αX_t − ψ(α)t} dP`.
    pub fn esscher_tilt(&self, alpha: f64) -> Result<LevyModel> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::invalid("esscher_tilt", "alpha must be finite and >= 0"));
        }
        if alpha == 0.0 {
            return Ok(*self);
        }
        let s2 = self.sigma * self.sigma;
        let zeta = self.zeta + s2 * alpha;
        Ok(LevyModel {
            zeta,
            sigma: self.sigma,
            lambda: self.lambda * self.phi / (self.phi + alpha),
            phi: self.phi + alpha,
            mu: zeta + 0.5 * s2,
        })
    }
}

/// `1/(ψ(θ) − q) = Σ Υ_i/(θ − γ_i)`, so `W^{(q)}(x) = Σ Υ_i e^{γ_i x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootDecomposition {
    q: f64,
    gammas: Vec<f64>,
    upsilons: Vec<f64>,
}

impl RootDecomposition {
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }
    pub fn upsilons(&self) -> &[f64] {
        &self.upsilons
    }

    /// `(Υ_i, γ_i)` pairs.
    pub fn modes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.upsilons.iter().copied().zip(self.gammas.iter().copied())
    }

    /// Largest root, which is `Φ(q)` for `q ≥ 0`.
    pub fn largest(&self) -> f64 {
        self.gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `W(0+) = Σ Υ_i`.
    pub fn w0(&self) -> f64 {
        self.upsilons.iter().sum()
    }

    /// `W'(0+) = Σ Υ_i γ_i`.
    pub fn w0_prime(&self) -> f64 {
        self.modes().map(|(u, g)| u * g).sum()
    }

    /// `Σ Υ_i γ_i^2`.
    pub fn w0_second(&self) -> f64 {
        self.modes().map(|(u, g)| u * g * g).sum()
    }

    /// Classical scale function `W(x) = Σ Υ_i e^{γ_i x}`, zero for `x < 0`.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.modes().map(|(u, g)| u * (g * x).exp()).sum()
    }

    pub fn w_prime(&self, x: f64) -> f64 {
        self.modes().map(|(u, g)| u * g * (g * x).exp()).sum()
    }

    /// `Z(x) = 1 + q ∫_0^x W(y) dy`.
    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let integral: f64 = self
            .modes()
            .map(|(u, g)| {
                if g == 0.0 {
                    u * x
                } else {
                    u * (g * x).exp_m1() / g
                }
            })
            .sum();
        1.0 + self.q * integral
    }
}

/// Free-function form of [`RootDecomposition::w`].
pub fn classical_w(decomp: &RootDecomposition, x: f64) -> f64 {
    decomp.w(x)
}
