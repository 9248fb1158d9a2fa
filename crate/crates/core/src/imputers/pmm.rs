//! Predictive mean matching with type-1 matching.
//!
//! Donors are scored with the least-squares coefficients and recipients with
//! the drawn coefficients. For each recipient the `d` donors with the smallest
//! absolute difference in predicted mean form the pool (ties on distance go
//! to the lower donor index) and one is picked uniformly.

use std::cmp::Ordering;

use rand::Rng;

use super::linreg::LinRegDraw;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Donor predictions sorted once for repeated nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct DonorIndex<S> {
    /// Donor positions in ascending (prediction, position) order.
    order: Vec<usize>,
    sorted: Vec<S>,
}

impl<S: Scalar> DonorIndex<S> {
    pub fn new(predictions: &[S]) -> Self {
        let mut order: Vec<usize> = (0..predictions.len()).collect();
        order.sort_by(|&a, &b| {
            predictions[a].partial_cmp(&predictions[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });
        let sorted = order.iter().map(|&i| predictions[i]).collect();
        Self { order, sorted }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The `d` donor positions closest to `target`, ordered by (distance, position).
    pub fn nearest(&self, target: S, d: usize) -> Vec<usize> {
        let n = self.sorted.len();
        let d = d.min(n);
        if d == 0 {
            return Vec::new();
        }
        let dist = |k: usize| (self.sorted[k] - target).abs();
        let pos = self.sorted.partition_point(|&v| v < target);
        // Walk outwards to find the d-th smallest distance.
        let (mut l, mut r) = (pos, pos);
        let mut threshold = S::zero();
        for _ in 0..d {
            let take_left = match (l > 0, r < n) {
                (true, true) => dist(l - 1) <= dist(r),
                (true, false) => true,
                (false, true) => false,
                (false, false) => unreachable!("d <= n"),
            };
            if take_left {
                l -= 1;
                threshold = dist(l);
            } else {
                threshold = dist(r);
                r += 1;
            }
        }
        // Every donor at distance <= threshold lies in one contiguous run.
        while l > 0 && dist(l - 1) <= threshold {
            l -= 1;
        }
        while r < n && dist(r) <= threshold {
            r += 1;
        }
        let mut pool: Vec<(S, usize)> = (l..r).map(|k| (dist(k), self.order[k])).collect();
        pool.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        pool.truncate(d);
        pool.into_iter().map(|(_, i)| i).collect()
    }
}

/// Picks one donor position for every recipient row of `x_target`.
pub fn pmm_donors<S: Scalar, R: Rng + ?Sized>(
    draw: &LinRegDraw<S>,
    x_obs: &Matrix<S>,
    x_target: &Matrix<S>,
    donors: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if donors == 0 {
        return Err(Error::InvalidArgument("donor count must be at least 1".into()));
    }
    if donors > x_obs.nrows() {
        return Err(Error::TooFewRows { needed: donors, available: x_obs.nrows() });
    }
    let index = DonorIndex::new(&draw.predict_hat(x_obs)?);
    let targets = draw.predict(x_target)?;
    Ok(targets
        .into_iter()
        .map(|t| {
            let pool = index.nearest(t, donors);
            pool[rng.random_range(0..pool.len())]
        })
        .collect())
}

/// Imputed values: the observed `y` of each chosen donor.
pub fn impute_pmm<S: Scalar, R: Rng + ?Sized>(
    draw: &LinRegDraw<S>,
    x_obs: &Matrix<S>,
    y_obs: &[S],
    x_target: &Matrix<S>,
    donors: usize,
    rng: &mut R,
) -> Result<Vec<S>> {
    if y_obs.len() != x_obs.nrows() {
        return Err(Error::DimensionMismatch { expected: x_obs.nrows(), found: y_obs.len() });
    }
    Ok(pmm_donors(draw, x_obs, x_target, donors, rng)?.into_iter().map(|i| y_obs[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive (distance, index) sort.
    fn brute_force(preds: &[f64], target: f64, d: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = preds.iter().enumerate().map(|(i, &p)| ((p - target).abs(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(d).map(|(_, i)| i).collect()
    }

    #[test]
    fn small_instance_matches_exhaustive_sort() {
        // Fixed draw: donors predicted at x·β̂ = 2x, recipient at x·β = 2.1x.
        let x_obs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let draw = LinRegDraw { beta: vec![0.0, 2.1], sigma2: 1.0, beta_hat: vec![0.0, 2.0] };
        let xo = Matrix::design(&[&x_obs[..]], &[0, 1, 2, 3, 4]);
        let preds = draw.predict_hat(&xo).unwrap();
        let index = DonorIndex::new(&preds);
        let target = 2.1 * 2.4; // 5.04
        let pool = index.nearest(target, 3);
        assert_eq!(pool, brute_force(&preds, target, 3));
        assert_eq!(pool, vec![3, 2, 4]);
    }

    #[test]
    fn equal_distances_prefer_lower_index() {
        let preds = [1.0, 3.0, 1.0, 3.0];
        let index = DonorIndex::new(&preds);
        assert_eq!(index.nearest(2.0, 1), vec![0]);
        assert_eq!(index.nearest(2.0, 3), vec![0, 1, 2]);
    }

    #[test]
    fn single_donor_with_exact_match_returns_its_value() {
        let x_obs = [0.0, 1.0, 2.0, 3.0];
        let y_obs = [10.0, 11.0, 12.0, 13.0];
        let draw = LinRegDraw { beta: vec![0.0, 1.0], sigma2: 1.0, beta_hat: vec![0.0, 1.0] };
        let xo = Matrix::design(&[&x_obs[..]], &[0, 1, 2, 3]);
        let xt = Matrix::design(&[&[2.0][..]], &[0]);
        let v = impute_pmm(&draw, &xo, &y_obs, &xt, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(v, vec![12.0]);
    }

    #[test]
    fn too_many_donors_is_an_error() {
        let draw = LinRegDraw { beta: vec![0.0, 1.0], sigma2: 1.0, beta_hat: vec![0.0, 1.0] };
        let xo = Matrix::design(&[&[0.0, 1.0][..]], &[0, 1]);
        let xt = Matrix::design(&[&[0.5][..]], &[0]);
        let err = impute_pmm(&draw, &xo, &[1.0, 2.0], &xt, 3, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(err, Err(Error::TooFewRows { .. })));
    }

    proptest! {
        #[test]
        fn nearest_matches_brute_force(
            preds in proptest::collection::vec(-5i32..5, 1..40),
            target in -60i32..60,
            d in 1usize..8,
        ) {
            // Integer-valued predictions force plenty of ties.
            let preds: Vec<f64> = preds.into_iter().map(f64::from).collect();
            let t = f64::from(target) / 10.0;
            let d = d.min(preds.len());
            prop_assert_eq!(DonorIndex::new(&preds).nearest(t, d), brute_force(&preds, t, d));
        }

        #[test]
        fn imputations_are_observed_values(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
            let y: Vec<f64> = (0..30).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let rows: Vec<usize> = (0..30).collect();
            let xo = Matrix::design(&[&x], &rows);
            let draw = crate::imputers::draw_bayes_linreg(&xo, &y, &mut rng).unwrap();
            let xt = Matrix::design(&[&[-1.0, 0.7, 9.0][..]], &[0, 1, 2]);
            let v = impute_pmm(&draw, &xo, &y, &xt, 5, &mut rng).unwrap();
            prop_assert!(v.iter().all(|val| y.contains(val)));
        }
    }
}
