//! Substantive-model-compatible imputation of a covariate `X` when the outcome
//! model is `Y = β₀ + β₁X + β₂X² + ε`.
//!
//! Each recipient is handled by rejection sampling: propose from the covariate
//! model, accept with probability `f(y | x*) / M` where `M` is the outcome
//! density at the parabola's closest approach to `y`, inflated by 5%.

use rand::Rng;

use super::linreg::LinRegDraw;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{std_normal, uniform01};

pub const MAX_PROPOSALS: usize = 10_000;
const SAFETY: f64 = 1.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SmcFcsDraws<S> {
    pub pairs: Vec<(S, S)>,
    /// Recipients that hit the proposal cap and took the best proposal seen.
    pub cap_fallbacks: usize,
}

/// Smallest `|y − q(x)|` over real `x` for `q(x) = b0 + b1·x + b2·x²`.
fn min_residual<S: Scalar>(y: S, b: &[S]) -> S {
    let (b0, b1, b2) = (b[0], b[1], b[2]);
    let tiny = S::of(1e-12) * (S::one() + b1.abs());
    if b2.abs() <= tiny {
        return if b1.abs() > S::epsilon() { S::zero() } else { (y - b0).abs() };
    }
    let vertex = -b1 / (S::of(2.0) * b2);
    let q_v = b0 + b1 * vertex + b2 * vertex * vertex;
    if (b2 > S::zero() && y >= q_v) || (b2 < S::zero() && y <= q_v) {
        S::zero()
    } else {
        (y - q_v).abs()
    }
}

/// Draws `(x, x²)` for every recipient.
///
/// `covariate_means[i]` is the covariate model's mean for recipient `i` and
/// `covariate_sigma2` its residual variance; `substantive` holds the drawn
/// `(β₀, β₁, β₂, σ²)` of the outcome model.
pub fn impute_smcfcs_quadratic<S: Scalar, R: Rng + ?Sized>(
    y_targets: &[S],
    covariate_means: &[S],
    covariate_sigma2: S,
    substantive: &LinRegDraw<S>,
    rng: &mut R,
) -> Result<SmcFcsDraws<S>> {
    if covariate_means.len() != y_targets.len() {
        return Err(Error::DimensionMismatch { expected: y_targets.len(), found: covariate_means.len() });
    }
    if substantive.beta.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: substantive.beta.len() });
    }
    if !(covariate_sigma2 >= S::zero()) || !(substantive.sigma2 > S::zero()) {
        return Err(Error::InvalidArgument("variances must be positive".into()));
    }
    let b = &substantive.beta;
    let sd = covariate_sigma2.sqrt();
    let two_s2 = S::of(2.0) * substantive.sigma2;
    let log_safety = S::of(SAFETY.ln());
    let mut out = SmcFcsDraws { pairs: Vec::with_capacity(y_targets.len()), cap_fallbacks: 0 };
    for (&y, &mu) in y_targets.iter().zip(covariate_means) {
        let r_min = min_residual(y, b);
        let mut best = (S::neg_infinity(), mu);
        let mut chosen = None;
        for _ in 0..MAX_PROPOSALS {
            let x = mu + sd * std_normal::<S, _>(rng);
            let r = y - (b[0] + b[1] * x + b[2] * x * x);
            let log_accept = (r_min * r_min - r * r) / two_s2 - log_safety;
            if log_accept > best.0 {
                best = (log_accept, x);
            }
            if uniform01::<S, _>(rng).ln() < log_accept {
                chosen = Some(x);
                break;
            }
        }
        let x = chosen.unwrap_or_else(|| {
            out.cap_fallbacks += 1;
            best.1
        });
        out.pairs.push((x, x * x));
    }
    Ok(out)
}
