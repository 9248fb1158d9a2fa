use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, ridge_kappa, Cholesky, Matrix};
use crate::scalar::Scalar;
use crate::stats::{chi_squared, std_normal};

/// One posterior draw of a normal linear regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRegDraw<S> {
    /// Drawn coefficients, intercept first.
    pub beta: Vec<S>,
    /// Drawn residual variance.
    pub sigma2: S,
    /// Least-squares estimate, used for donor predictions in type-1 matching.
    pub beta_hat: Vec<S>,
}

impl<S: Scalar> LinRegDraw<S> {
    pub fn predict(&self, x: &Matrix<S>) -> Result<Vec<S>> {
        x.mul_vec(&self.beta)
    }

    pub fn predict_hat(&self, x: &Matrix<S>) -> Result<Vec<S>> {
        x.mul_vec(&self.beta_hat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ridge {
    /// `κ = 1e-8 · trace(XᵀX) / p` added to the diagonal.
    #[default]
    Stabilised,
    None,
}

/// Draws `(β, σ²)` under the standard noninformative prior.
///
/// `σ² = SSR / χ²(n − p)` and `β ~ N(β̂, σ²(XᵀX + κI)⁻¹)`.
pub fn draw_bayes_linreg<S: Scalar, R: Rng + ?Sized>(x: &Matrix<S>, y: &[S], rng: &mut R) -> Result<LinRegDraw<S>> {
    draw_bayes_linreg_with(x, y, Ridge::Stabilised, rng)
}

pub fn draw_bayes_linreg_with<S: Scalar, R: Rng + ?Sized>(
    x: &Matrix<S>,
    y: &[S],
    ridge: Ridge,
    rng: &mut R,
) -> Result<LinRegDraw<S>> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n < p + 1 {
        return Err(Error::TooFewRows { needed: p + 1, available: n });
    }
    let mut gram = x.gram();
    if ridge == Ridge::Stabilised {
        let kappa = ridge_kappa(&gram);
        gram.add_diagonal(kappa);
    }
    let chol = Cholesky::new(&gram)?;
    let beta_hat = chol.solve(&x.t_mul_vec(y));
    let ssr: S = (0..n)
        .map(|i| {
            let r = y[i] - dot(x.row(i), &beta_hat);
            r * r
        })
        .sum();
    // Exact fits would give σ² = 0; keep it strictly positive.
    let floor = S::epsilon() * (S::one() + y.iter().map(|&v| v * v).sum::<S>() / S::of_usize(n));
    let sigma2 = ssr.max(floor) / chi_squared::<S, _>(rng, (n - p) as f64);
    let v = chol.inverse();
    let v_chol = Cholesky::new(&v)?;
    let z: Vec<S> = (0..p).map(|_| std_normal(rng)).collect();
    let sigma = sigma2.sqrt();
    let beta = beta_hat.iter().zip(v_chol.lower_mul(&z)).map(|(&b, e)| b + sigma * e).collect();
    Ok(LinRegDraw { beta, sigma2, beta_hat })
}

/// `x·β + N(0, σ²)` for every row of `x_target`.
pub fn impute_norm<S: Scalar, R: Rng + ?Sized>(
    draw: &LinRegDraw<S>,
    x_target: &Matrix<S>,
    rng: &mut R,
) -> Result<Vec<S>> {
    let mu = draw.predict(x_target)?;
    let sigma = draw.sigma2.sqrt();
    Ok(mu.into_iter().map(|m| m + sigma * std_normal::<S, _>(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn line_data(n: usize, seed: u64) -> (Matrix<f64>, Vec<f64>) {
        let mut r = rng(seed);
        let x: Vec<f64> = (0..n).map(|_| std_normal(&mut r)).collect();
        let y: Vec<f64> = x.iter().map(|&v| 1.0 + 2.0 * v + std_normal::<f64, _>(&mut r)).collect();
        let rows: Vec<usize> = (0..n).collect();
        (Matrix::design(&[&x], &rows), y)
    }

    #[test]
    fn mean_of_draws_recovers_generating_coefficients() {
        let (x, y) = line_data(100_000, 1);
        let mut r = rng(2);
        let k = 200;
        let mut sum = [0.0; 2];
        for _ in 0..k {
            let d = draw_bayes_linreg(&x, &y, &mut r).unwrap();
            sum[0] += d.beta[0];
            sum[1] += d.beta[1];
        }
        assert!((sum[0] / k as f64 - 1.0).abs() < 0.02);
        assert!((sum[1] / k as f64 - 2.0).abs() < 0.02);
    }

    #[test]
    fn draw_covariance_matches_closed_form() {
        // Posterior of β marginalises σ²: covariance = E[σ²]·(XᵀX)⁻¹ with
        // E[σ²] = SSR/(ν − 2).
        let (x, y) = line_data(40, 3);
        let g = x.gram();
        let ginv = Cholesky::new(&g).unwrap().inverse();
        let fit = crate::linalg::ols(&x, &y).unwrap();
        let nu = (40 - 2) as f64;
        let scale = fit.ssr / (nu - 2.0);
        let mut r = rng(4);
        let draws: Vec<LinRegDraw<f64>> = (0..10_000).map(|_| draw_bayes_linreg(&x, &y, &mut r).unwrap()).collect();
        for j in 0..2 {
            let m = draws.iter().map(|d| d.beta[j]).sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|d| (d.beta[j] - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            let expect = scale * ginv[(j, j)];
            assert!((var / expect - 1.0).abs() < 0.10, "coef {j}: {var} vs {expect}");
        }
    }

    #[test]
    fn degenerate_design_needs_the_ridge() {
        let zeros = vec![0.0f64; 6];
        let y = vec![3.0; 6];
        let rows: Vec<usize> = (0..6).collect();
        let x = Matrix::design(&[&zeros], &rows);
        let mut r = rng(5);
        assert!(matches!(
            draw_bayes_linreg_with(&x, &y, Ridge::None, &mut r),
            Err(Error::RankDeficient { .. })
        ));
        let d = draw_bayes_linreg(&x, &y, &mut r).unwrap();
        assert!(d.beta.iter().all(|b| b.is_finite()));
        assert!(d.sigma2 > 0.0);
    }

    #[test]
    fn too_few_rows_rejected() {
        let x = Matrix::design(&[&[1.0, 2.0][..]], &[0, 1]);
        assert!(matches!(
            draw_bayes_linreg(&x, &[1.0, 2.0], &mut rng(1)),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn zero_noise_limit_returns_linear_predictor() {
        let draw = LinRegDraw { beta: vec![1.0, -2.0], sigma2: 0.0, beta_hat: vec![1.0, -2.0] };
        let x = Matrix::design(&[&[0.5, 3.0][..]], &[0, 1]);
        let v = impute_norm(&draw, &x, &mut rng(1)).unwrap();
        assert_eq!(v, vec![0.0, -5.0]);
    }

    #[test]
    fn norm_draws_have_right_mean_and_variance() {
        let draw = LinRegDraw { beta: vec![0.5, 2.0], sigma2: 4.0, beta_hat: vec![0.5, 2.0] };
        let rows: Vec<usize> = vec![0; 10_000];
        let x = Matrix::design(&[&[1.5][..]], &rows);
        let v = impute_norm(&draw, &x, &mut rng(9)).unwrap();
        let m: f64 = crate::stats::mean(&v);
        let var: f64 = crate::stats::sample_variance(&v);
        assert!((m - 3.5).abs() < 3.0 * (4.0f64 / 1e4).sqrt());
        assert!((var / 4.0 - 1.0).abs() < 0.10);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let draw = LinRegDraw { beta: vec![0.0, 1.0, 2.0], sigma2: 1.0, beta_hat: vec![0.0, 1.0, 2.0] };
        let x = Matrix::design(&[&[1.0][..]], &[0]);
        assert!(matches!(impute_norm(&draw, &x, &mut rng(1)), Err(Error::DimensionMismatch { .. })));
    }
}
