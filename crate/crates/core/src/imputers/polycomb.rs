//! Polynomial combination imputation of a covariate `X` entering the outcome
//! model as `X + X²`.
//!
//! The fitted combination `C = β̂₁X + β̂₂X²` is imputed by predictive mean
//! matching on the outcome, then inverted back to `X`. The root side of the
//! parabola is drawn from a logistic model of the observed side on the outcome.

use rand::Rng;

use super::linreg::{draw_bayes_linreg, LinRegDraw};
use super::logreg::{draw_bayes_logreg, LogRegDraw};
use super::pmm::pmm_donors;
use crate::error::{Error, Result};
use crate::linalg::{dot, ols, Matrix};
use crate::scalar::Scalar;
use crate::stats::{bernoulli, logistic};

/// Parameters drawn once per update; reused for every recipient.
#[derive(Debug, Clone)]
pub struct PolyCombModel<S> {
    /// `(β̂₀, β̂₁, β̂₂)` of `Y ~ X + X²` on complete rows.
    pub outcome_coef: [S; 3],
    pub combo_draw: LinRegDraw<S>,
    pub side_draw: LogRegDraw<S>,
    donor_y: Vec<S>,
    donor_x: Vec<S>,
    donor_combo: Vec<S>,
    donors: usize,
}

/// Imputed pairs plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCombDraws<S> {
    pub pairs: Vec<(S, S)>,
    /// Imputed combination value per recipient (a donor's observed `C`).
    pub combos: Vec<S>,
    /// Recipients whose quadratic had no real root and got the vertex.
    pub vertex_fallbacks: usize,
}

impl<S: Scalar> PolyCombModel<S> {
    /// Fits on complete rows given as parallel slices of outcome and covariate.
    pub fn fit<R: Rng + ?Sized>(y_obs: &[S], x_obs: &[S], donors: usize, rng: &mut R) -> Result<Self> {
        let n = y_obs.len();
        if x_obs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x_obs.len() });
        }
        if donors == 0 {
            return Err(Error::InvalidArgument("donor count must be at least 1".into()));
        }
        if donors > n {
            return Err(Error::TooFewRows { needed: donors, available: n });
        }
        let rows: Vec<usize> = (0..n).collect();
        let x2: Vec<S> = x_obs.iter().map(|&v| v * v).collect();
        let outcome = ols(&Matrix::design(&[x_obs, &x2], &rows), y_obs)?;
        let coef = [outcome.coef[0], outcome.coef[1], outcome.coef[2]];
        let combo: Vec<S> = x_obs.iter().zip(&x2).map(|(&a, &b)| coef[1] * a + coef[2] * b).collect();
        let y_design = Matrix::design(&[y_obs], &rows);
        let combo_draw = draw_bayes_linreg(&y_design, &combo, rng)?;
        let vertex = vertex_of(coef[1], coef[2]);
        let side: Vec<S> = x_obs.iter().map(|&v| if v > vertex { S::one() } else { S::zero() }).collect();
        let side_draw = draw_bayes_logreg(&y_design, &side, rng)?;
        Ok(Self {
            outcome_coef: coef,
            combo_draw,
            side_draw,
            donor_y: y_obs.to_vec(),
            donor_x: x_obs.to_vec(),
            donor_combo: combo,
            donors,
        })
    }

    /// The combination values of the donor pool.
    pub fn observed_combos(&self) -> &[S] {
        &self.donor_combo
    }

    pub fn vertex(&self) -> S {
        vertex_of(self.outcome_coef[1], self.outcome_coef[2])
    }

    /// Draws `(x, x²)` for recipients with outcome values `y_targets`.
    pub fn draw<R: Rng + ?Sized>(&self, y_targets: &[S], rng: &mut R) -> Result<PolyCombDraws<S>> {
        let donor_rows: Vec<usize> = (0..self.donor_y.len()).collect();
        let target_rows: Vec<usize> = (0..y_targets.len()).collect();
        let x_obs = Matrix::design(&[&self.donor_y], &donor_rows);
        let x_target = Matrix::design(&[y_targets], &target_rows);
        let picks = pmm_donors(&self.combo_draw, &x_obs, &x_target, self.donors, rng)?;
        let (b1, b2) = (self.outcome_coef[1], self.outcome_coef[2]);
        let vertex = self.vertex();
        let degenerate = b2.abs() <= S::of(1e-8) * (S::one() + b1.abs());
        let mut out = PolyCombDraws { pairs: Vec::with_capacity(picks.len()), combos: Vec::with_capacity(picks.len()), vertex_fallbacks: 0 };
        for (t, &donor) in picks.iter().enumerate() {
            let c = self.donor_combo[donor];
            let x = if degenerate {
                if b1.abs() > S::epsilon() { c / b1 } else { self.donor_x[donor] }
            } else {
                let disc = b1 * b1 + S::of(4.0) * b2 * c;
                if disc < S::zero() {
                    out.vertex_fallbacks += 1;
                    vertex
                } else {
                    let eta = dot(x_target.row(t), &self.side_draw.beta);
                    let right = bernoulli(rng, logistic(eta));
                    let half_width = disc.sqrt() / (S::of(2.0) * b2.abs());
                    if right { vertex + half_width } else { vertex - half_width }
                }
            };
            out.pairs.push((x, x * x));
            out.combos.push(c);
        }
        Ok(out)
    }
}

fn vertex_of<S: Scalar>(b1: S, b2: S) -> S {
    if b2 == S::zero() {
        S::zero()
    } else {
        -b1 / (S::of(2.0) * b2)
    }
}

/// One-shot fit and draw. `x` holds the covariate with `None` for missing
/// rows; `targets` lists the rows to impute.
pub fn impute_polycomb<S: Scalar, R: Rng + ?Sized>(
    y_response: &[S],
    x: &[Option<S>],
    targets: &[usize],
    donors: usize,
    rng: &mut R,
) -> Result<PolyCombDraws<S>> {
    if x.len() != y_response.len() {
        return Err(Error::DimensionMismatch { expected: y_response.len(), found: x.len() });
    }
    let (y_obs, x_obs): (Vec<S>, Vec<S>) =
        x.iter().zip(y_response).filter_map(|(xv, &yv)| xv.map(|v| (yv, v))).unzip();
    let model = PolyCombModel::fit(&y_obs, &x_obs, donors, rng)?;
    let y_targets: Vec<S> = targets.iter().map(|&r| y_response[r]).collect();
    model.draw(&y_targets, rng)
}
