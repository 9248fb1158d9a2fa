use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, ridge_kappa, Cholesky, Matrix};
use crate::scalar::Scalar;
use crate::stats::{bernoulli, logistic, std_normal};

const MAX_ITER: usize = 50;
const TOL: f64 = 1e-8;
const SEPARATION_BOUND: f64 = 25.0;

/// Large-sample posterior draw of a logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegDraw<S> {
    pub beta: Vec<S>,
    pub mle: Vec<S>,
    /// Inverse observed information at the MLE.
    pub cov: Matrix<S>,
    /// Set when separation forced the pseudo-observation retry.
    pub shrunk: bool,
}

#[derive(Debug, Clone)]
pub struct LogisticFit<S> {
    pub coef: Vec<S>,
    pub cov: Matrix<S>,
    pub iterations: usize,
}

enum IrlsOutcome<S> {
    Converged(LogisticFit<S>),
    Separated,
}

fn irls<S: Scalar>(x: &Matrix<S>, y: &[S], prior_w: &[S]) -> Result<IrlsOutcome<S>> {
    let (n, p) = (x.nrows(), x.ncols());
    let mut beta = vec![S::zero(); p];
    let bound = S::of(SEPARATION_BOUND);
    for iter in 1..=MAX_ITER {
        let mut w = vec![S::zero(); n];
        let mut z = vec![S::zero(); n];
        for i in 0..n {
            let eta = dot(x.row(i), &beta);
            let mu = logistic(eta);
            let v = (mu * (S::one() - mu)).max(S::of(1e-12));
            w[i] = prior_w[i] * v;
            z[i] = eta + (y[i] - mu) / v;
        }
        let mut info = x.weighted_gram(Some(&w));
        let kappa = ridge_kappa(&info);
        info.add_diagonal(kappa);
        let chol = Cholesky::new(&info)?;
        let wz: Vec<S> = w.iter().zip(&z).map(|(&a, &b)| a * b).collect();
        let next = chol.solve(&x.t_mul_vec(&wz));
        if next.iter().any(|b| !b.is_finite() || b.abs() > bound) {
            return Ok(IrlsOutcome::Separated);
        }
        let delta = next.iter().zip(&beta).map(|(a, b)| (*a - *b).abs()).fold(S::zero(), S::max);
        beta = next;
        if delta < S::of(TOL) {
            let cov = information(x, &beta, prior_w)?;
            return Ok(IrlsOutcome::Converged(LogisticFit { coef: beta, cov, iterations: iter }));
        }
    }
    Err(Error::Convergence(format!("IRLS did not converge in {MAX_ITER} iterations")))
}

fn information<S: Scalar>(x: &Matrix<S>, beta: &[S], prior_w: &[S]) -> Result<Matrix<S>> {
    let w: Vec<S> = (0..x.nrows())
        .map(|i| {
            let mu = logistic(dot(x.row(i), beta));
            prior_w[i] * mu * (S::one() - mu)
        })
        .collect();
    let mut info = x.weighted_gram(Some(&w));
    let kappa = ridge_kappa(&info);
    info.add_diagonal(kappa);
    Ok(Cholesky::new(&info)?.inverse())
}

/// Appends one success and one failure at the column means.
fn with_pseudo_rows<S: Scalar>(x: &Matrix<S>, y: &[S]) -> (Matrix<S>, Vec<S>) {
    let (n, p) = (x.nrows(), x.ncols());
    let means: Vec<S> =
        (0..p).map(|j| (0..n).map(|i| x[(i, j)]).sum::<S>() / S::of_usize(n.max(1))).collect();
    let mut data = Vec::with_capacity((n + 2) * p);
    for i in 0..n {
        data.extend_from_slice(x.row(i));
    }
    data.extend_from_slice(&means);
    data.extend_from_slice(&means);
    let mut yy = y.to_vec();
    yy.push(S::one());
    yy.push(S::zero());
    (Matrix::from_row_major(n + 2, p, data).expect("shape"), yy)
}

/// Maximum likelihood by IRLS, retried with two pseudo-observations when the
/// data are separated. Returns the fit and whether the retry was needed.
pub fn fit_logistic<S: Scalar>(x: &Matrix<S>, y: &[S]) -> Result<(LogisticFit<S>, bool)> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if n < x.ncols() {
        return Err(Error::TooFewRows { needed: x.ncols(), available: n });
    }
    let both_classes = y.iter().any(|&v| v == S::one()) && y.iter().any(|&v| v == S::zero());
    if both_classes {
        if let IrlsOutcome::Converged(fit) = irls(x, y, &vec![S::one(); n])? {
            return Ok((fit, false));
        }
    }
    let (xa, ya) = with_pseudo_rows(x, y);
    match irls(&xa, &ya, &vec![S::one(); n + 2])? {
        IrlsOutcome::Converged(fit) => Ok((fit, true)),
        IrlsOutcome::Separated => Err(Error::Separation),
    }
}

/// `β ~ N(β̂_MLE, I(β̂)⁻¹)`.
pub fn draw_bayes_logreg<S: Scalar, R: Rng + ?Sized>(x: &Matrix<S>, y: &[S], rng: &mut R) -> Result<LogRegDraw<S>> {
    let (fit, shrunk) = fit_logistic(x, y)?;
    let chol = Cholesky::new(&fit.cov)?;
    let z: Vec<S> = (0..fit.coef.len()).map(|_| std_normal(rng)).collect();
    let beta = fit.coef.iter().zip(chol.lower_mul(&z)).map(|(&m, e)| m + e).collect();
    Ok(LogRegDraw { beta, mle: fit.coef, cov: fit.cov, shrunk })
}

/// Bernoulli draws with `p_i = logistic(x_i·β)`, returned as 0/1 reals.
pub fn impute_logreg<S: Scalar, R: Rng + ?Sized>(
    draw: &LogRegDraw<S>,
    x_target: &Matrix<S>,
    rng: &mut R,
) -> Result<Vec<S>> {
    let eta = x_target.mul_vec(&draw.beta)?;
    Ok(eta
        .into_iter()
        .map(|e| if bernoulli(rng, logistic(e)) { S::one() } else { S::zero() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::uniform01;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn logit_data(n: usize, seed: u64) -> (Matrix<f64>, Vec<f64>) {
        let mut r = rng(seed);
        let x: Vec<f64> = (0..n).map(|_| std_normal(&mut r)).collect();
        let z: Vec<f64> = (0..n).map(|_| std_normal(&mut r)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| if uniform01::<f64, _>(&mut r) < logistic(x[i] + z[i]) { 1.0 } else { 0.0 })
            .collect();
        let rows: Vec<usize> = (0..n).collect();
        (Matrix::design(&[&x, &z], &rows), y)
    }

    #[test]
    fn mle_recovers_generating_slopes() {
        let (x, y) = logit_data(100_000, 1);
        let (fit, shrunk) = fit_logistic(&x, &y).unwrap();
        assert!(!shrunk);
        assert!(fit.coef[0].abs() < 0.05);
        assert!((fit.coef[1] - 1.0).abs() < 0.05);
        assert!((fit.coef[2] - 1.0).abs() < 0.05);
    }

    #[test]
    fn constant_outcome_takes_the_shrinkage_path() {
        let x = Matrix::design(&[&[0.1, 0.5, -0.3, 1.2, 0.7, -1.0][..]], &[0, 1, 2, 3, 4, 5]);
        let y = vec![1.0f64; 6];
        let d = draw_bayes_logreg(&x, &y, &mut rng(2)).unwrap();
        assert!(d.shrunk);
        assert!(d.mle.iter().all(|b| b.is_finite() && b.abs() < 25.0));
    }

    #[test]
    fn perfectly_separated_data_still_shrinks_or_reports() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let y: Vec<f64> = xs.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let rows: Vec<usize> = (0..20).collect();
        let x = Matrix::design(&[&xs], &rows);
        match draw_bayes_logreg(&x, &y, &mut rng(3)) {
            Ok(d) => assert!(d.shrunk),
            Err(e) => assert!(matches!(e, Error::Separation)),
        }
    }

    #[test]
    fn draw_covariance_matches_inverse_information() {
        let (x, y) = logit_data(400, 4);
        let (fit, _) = fit_logistic(&x, &y).unwrap();
        let mut r = rng(5);
        let draws: Vec<LogRegDraw<f64>> = (0..10_000).map(|_| draw_bayes_logreg(&x, &y, &mut r).unwrap()).collect();
        for j in 0..3 {
            let m = draws.iter().map(|d| d.beta[j]).sum::<f64>() / draws.len() as f64;
            let var = draws.iter().map(|d| (d.beta[j] - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            assert!((var / fit.cov[(j, j)] - 1.0).abs() < 0.10, "coef {j}");
        }
    }

    fn fixed_draw(beta: Vec<f64>) -> LogRegDraw<f64> {
        let p = beta.len();
        LogRegDraw { mle: beta.clone(), beta, cov: Matrix::identity(p), shrunk: false }
    }

    #[test]
    fn zero_linear_predictor_gives_fair_coin() {
        let draw = fixed_draw(vec![0.0]);
        let x = Matrix::design(&[], &vec![0; 10_000]);
        let v = impute_logreg(&draw, &x, &mut rng(6)).unwrap();
        let rate = v.iter().sum::<f64>() / v.len() as f64;
        assert!((rate - 0.5).abs() < 0.015, "{rate}");
    }

    #[test]
    fn saturated_linear_predictor_gives_all_ones() {
        let draw = fixed_draw(vec![25.0]);
        let x = Matrix::design(&[], &vec![0; 1000]);
        assert!(impute_logreg(&draw, &x, &mut rng(7)).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn imputed_frequencies_are_calibrated() {
        let draw = fixed_draw(vec![0.0, 1.0]);
        let mut r = rng(8);
        let xs: Vec<f64> = (0..100_000).map(|_| 6.0 * uniform01::<f64, _>(&mut r) - 3.0).collect();
        let rows: Vec<usize> = (0..xs.len()).collect();
        let x = Matrix::design(&[&xs], &rows);
        let v = impute_logreg(&draw, &x, &mut r).unwrap();
        let mut hits = [0.0; 10];
        let mut probs = [0.0; 10];
        let mut counts = [0.0; 10];
        for (i, &xi) in xs.iter().enumerate() {
            let p = logistic(xi);
            let b = ((p * 10.0) as usize).min(9);
            hits[b] += v[i];
            probs[b] += p;
            counts[b] += 1.0;
        }
        for b in 0..10 {
            if counts[b] > 100.0 {
                assert!((hits[b] / counts[b] - probs[b] / counts[b]).abs() < 0.03, "bin {b}");
            }
        }
    }
}
