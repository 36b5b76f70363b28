//! Perpetual American options with asset-dependent discounting.
//!
//! The price process is `S_t = exp(X_t)` where `X` is a spectrally negative
//! Lévy process: Brownian motion with drift, optionally minus a compound
//! Poisson stream of exponential jumps. Cash flows are discounted with
//! `exp(-∫ ω(S_w) dw)` for a user supplied rate function `ω`.
//!
//! The crate is organised bottom-up:
//!
//! - [`levy`]: model parameters, Laplace exponent, root structure, Esscher tilt.
//! - [`discount`]: the rate functions `ω` and their log-coordinate views.
//! - [`specfun`]: Gauss and Kummer hypergeometric functions.
//! - [`scale`]: omega scale functions from renewal equations and ODEs.
//! - [`pricer`]: value functions, boundary optimisation and diagnostics.
//! - [`mc`]: Monte Carlo and Bermudan dynamic programming oracles.

pub mod discount;
pub mod error;
pub mod levy;
pub mod mc;
pub mod numerics;
pub mod ode;
pub mod pricer;
pub mod scale;
pub mod specfun;

pub use discount::{DiscountFn, DiscountKind, LogDiscount, StepSide};
pub use error::{Error, Result};
pub use levy::{martingale_drift, LevyModel, RootDecomposition};
pub use pricer::{optimize_boundaries, Boundaries, Payoff, PricingProblem, PricingResult};

