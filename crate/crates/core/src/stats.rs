//! Descriptive statistics and random-variate helpers shared by the modules.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::distribution::{ChiSquared as ChiSquaredDist, ContinuousCDF, Normal, StudentsT};

use crate::scalar::Scalar;

pub fn mean<S: Scalar>(xs: &[S]) -> S {
    if xs.is_empty() {
        return S::nan();
    }
    xs.iter().copied().sum::<S>() / S::of_usize(xs.len())
}

/// Sample variance (divisor `n − 1`).
pub fn sample_variance<S: Scalar>(xs: &[S]) -> S {
    if xs.len() < 2 {
        return S::nan();
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<S>() / S::of_usize(xs.len() - 1)
}

pub fn sample_sd<S: Scalar>(xs: &[S]) -> S {
    sample_variance(xs).sqrt()
}

/// Linear-interpolation quantile between order statistics (Hyndman–Fan type 7)
/// of an ascending slice.
pub fn quantile_sorted<S: Scalar>(sorted: &[S], prob: f64) -> S {
    let n = sorted.len();
    if n == 0 {
        return S::nan();
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = S::of(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Sorts a copy and returns the type-7 quantile.
pub fn quantile<S: Scalar>(xs: &[S], prob: f64) -> S {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    quantile_sorted(&v, prob)
}

#[inline]
pub fn logistic<S: Scalar>(eta: S) -> S {
    if eta >= S::zero() {
        S::one() / (S::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (S::one() + e)
    }
}

#[inline]
pub fn std_normal<S: Scalar, R: Rng + ?Sized>(rng: &mut R) -> S {
    let z: f64 = StandardNormal.sample(rng);
    S::of(z)
}

/// Draw from χ²(ν).
pub fn chi_squared<S: Scalar, R: Rng + ?Sized>(rng: &mut R, dof: f64) -> S {
    let d = ChiSquared::new(dof).expect("positive degrees of freedom");
    S::of(d.sample(rng))
}

#[inline]
pub fn uniform01<S: Scalar, R: Rng + ?Sized>(rng: &mut R) -> S {
    S::of(rng.random::<f64>())
}

#[inline]
pub fn bernoulli<S: Scalar, R: Rng + ?Sized>(rng: &mut R, p: S) -> bool {
    rng.random::<f64>() < p.as_f64()
}

/// Upper-tail p-value of Pearson's chi-square test that `counts` are uniform
/// over their cells.
pub fn chi_square_uniformity_pvalue(counts: &[usize]) -> f64 {
    let k = counts.len();
    let total: usize = counts.iter().sum();
    if k < 2 || total == 0 {
        return 1.0;
    }
    let expected = total as f64 / k as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquaredDist::new((k - 1) as f64).expect("k >= 2");
    1.0 - dist.cdf(stat)
}

/// Two-sided critical value of Student's t (normal when `dof` is infinite).
pub fn t_critical(level: f64, dof: f64) -> f64 {
    let p = 0.5 + level / 2.0;
    if !dof.is_finite() || dof > 1e7 {
        Normal::standard().inverse_cdf(p)
    } else {
        StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn type7_quantile_matches_hand_computation() {
        // n = 5, p = 0.1 → h = 0.4 → 1 + 0.4·(2 − 1)
        let v = [1.0, 2.0, 3.0, 4.0, 10.0];
        assert_relative_eq!(quantile_sorted(&v, 0.1), 1.4);
        assert_relative_eq!(quantile_sorted(&v, 0.5), 3.0);
        // h = 3.6 → 4 + 0.6·6
        assert_relative_eq!(quantile_sorted(&v, 0.9), 7.6);
        assert_relative_eq!(quantile_sorted(&v, 1.0), 10.0);
    }

    #[test]
    fn logistic_is_stable_in_both_tails() {
        assert_relative_eq!(logistic(0.0f64), 0.5);
        assert!(logistic(800.0f64) == 1.0);
        assert!(logistic(-800.0f64) >= 0.0);
        assert_relative_eq!(logistic(2.0f64) + logistic(-2.0f64), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sample_sd_uses_n_minus_one() {
        assert_relative_eq!(sample_variance(&[0.0, 1.0, 2.0, 3.0]), 5.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn uniform_counts_give_large_pvalue() {
        assert_relative_eq!(chi_square_uniformity_pvalue(&[10; 10]), 1.0, epsilon = 1e-12);
        let skewed = [50, 0, 0, 0, 0, 0, 0, 0, 0, 50];
        assert!(chi_square_uniformity_pvalue(&skewed) < 1e-10);
    }

    #[test]
    fn t_critical_approaches_normal() {
        assert_relative_eq!(t_critical(0.95, f64::INFINITY), 1.959964, epsilon = 1e-5);
        assert_relative_eq!(t_critical(0.95, 10.0), 2.228139, epsilon = 1e-5);
    }
}
