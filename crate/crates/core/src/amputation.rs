//! Missingness simulation under MCAR and right-tailed MAR mechanisms.
//!
//! Under MAR the weighted sum score of the weight columns is standardised
//! (sample sd, divisor `n − 1`) and fed through a shifted logistic
//! `P(missing | wss) = σ(z + c)`. The shift `c` is found by bisection so the
//! expected missing fraction equals the requested proportion.

use std::collections::BTreeMap;

use rand::Rng;

use crate::data::{Dataset, RngStream};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{logistic, mean, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Mcar,
    /// Right-tailed MAR: rows with larger weighted sum scores go missing more often.
    MarRight,
}

impl Mechanism {
    pub fn label(self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::MarRight => "MARr",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "marr" | "mar-right" | "mar" => Ok(Mechanism::MarRight),
            other => Err(Error::InvalidArgument(format!("unknown mechanism `{other}`"))),
        }
    }
}

/// Columns made jointly missing, plus the score weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AmputePattern {
    pub targets: Vec<String>,
    pub weights: BTreeMap<String, f64>,
}

impl AmputePattern {
    pub fn new<T: Into<String>, W: Into<String>>(
        targets: impl IntoIterator<Item = T>,
        weights: impl IntoIterator<Item = (W, f64)>,
    ) -> Self {
        Self {
            targets: targets.into_iter().map(Into::into).collect(),
            weights: weights.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmputeSpec {
    pub pattern: AmputePattern,
    pub mechanism: Mechanism,
    pub proportion: f64,
}

impl AmputeSpec {
    fn validate<S: Scalar>(&self, data: &Dataset<S>) -> Result<()> {
        if !(self.proportion > 0.0 && self.proportion < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "proportion {} must lie strictly between 0 and 1",
                self.proportion
            )));
        }
        if self.pattern.targets.is_empty() {
            return Err(Error::InvalidArgument("amputation pattern has no target columns".into()));
        }
        for t in &self.pattern.targets {
            if !data.column(t)?.is_complete() {
                return Err(Error::IncompleteColumn { column: t.clone() });
            }
        }
        for w in self.pattern.weights.keys() {
            data.column(w)?;
        }
        if self.mechanism == Mechanism::MarRight && self.pattern.weights.values().all(|&w| w == 0.0) {
            return Err(Error::InvalidArgument("MAR amputation needs a nonzero weight".into()));
        }
        Ok(())
    }
}

/// Raw weighted sum score `Σ_j w_j x_ji` per row.
pub fn raw_wss<S: Scalar>(data: &Dataset<S>, weights: &BTreeMap<String, f64>) -> Result<Vec<S>> {
    let mut score = vec![S::zero(); data.n_rows()];
    for (name, &w) in weights {
        let col = data.column(name)?;
        if !col.is_complete() {
            return Err(Error::IncompleteColumn { column: name.clone() });
        }
        let w = S::of(w);
        for (s, &x) in score.iter_mut().zip(col.values()) {
            *s += w * x;
        }
    }
    Ok(score)
}

/// Weighted sum score standardised to mean 0 and sample sd 1.
///
/// Because of the standardisation only the relative size of the weights matters.
pub fn compute_wss<S: Scalar>(data: &Dataset<S>, weights: &BTreeMap<String, f64>) -> Result<Vec<S>> {
    let raw = raw_wss(data, weights)?;
    let m = mean(&raw);
    let sd = sample_sd(&raw);
    if !(sd > S::zero()) || !sd.is_finite() {
        return Err(Error::Calibration("weighted sum score has zero variance".into()));
    }
    Ok(raw.into_iter().map(|v| (v - m) / sd).collect())
}

/// Solves `mean_i σ(z_i + c) = target` for `c` by bisection.
pub fn calibrate_shift(scores: &[f64], target: f64) -> Result<f64> {
    let expected = |c: f64| scores.iter().map(|&z| logistic(z + c)).sum::<f64>() / scores.len() as f64;
    let (mut lo, mut hi) = (-50.0f64, 50.0f64);
    while expected(lo) > target {
        lo *= 2.0;
        if lo < -1e6 {
            return Err(Error::Calibration(format!("no shift reaches proportion {target}")));
        }
    }
    while expected(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Calibration(format!("no shift reaches proportion {target}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let e = expected(mid);
        if (e - target).abs() <= 1e-9 || hi - lo < 1e-13 {
            lo = mid;
            hi = mid;
            break;
        }
        if e < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let gap = (expected(c) - target).abs();
    if gap > 1e-6 {
        return Err(Error::Calibration(format!("bisection stalled {gap:e} from target")));
    }
    Ok(c)
}

/// Per-row probability that the pattern is applied.
pub fn missingness_probabilities<S: Scalar>(data: &Dataset<S>, spec: &AmputeSpec) -> Result<Vec<f64>> {
    spec.validate(data)?;
    match spec.mechanism {
        Mechanism::Mcar => Ok(vec![spec.proportion; data.n_rows()]),
        Mechanism::MarRight => {
            let z: Vec<f64> = compute_wss(data, &spec.pattern.weights)?.into_iter().map(Scalar::as_f64).collect();
            let c = calibrate_shift(&z, spec.proportion)?;
            Ok(z.into_iter().map(|v| logistic(v + c)).collect())
        }
    }
}

/// Returns a copy of `data` with the pattern's target columns set missing in
/// sampled rows. Other cells are untouched.
pub fn ampute<S: Scalar>(data: &Dataset<S>, spec: &AmputeSpec, stream: RngStream) -> Result<Dataset<S>> {
    let probs = missingness_probabilities(data, spec)?;
    let mut rng = stream.rng();
    let rows: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| (rng.random::<f64>() < p).then_some(i))
        .collect();
    let mut out = data.clone();
    for t in &spec.pattern.targets {
        let col = out.column(t)?.with_missing(rows.iter().copied());
        out = out.with_column(col)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn weights(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn two_col(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
        Dataset::new(vec![Column::continuous("x", x).unwrap(), Column::continuous("y", y).unwrap()]).unwrap()
    }

    #[test]
    fn raw_score_is_weighted_sum() {
        let d = Dataset::new(vec![
            Column::continuous("x1", vec![2.0, 0.0]).unwrap(),
            Column::continuous("x2", vec![3.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let raw = raw_wss(&d, &weights(&[("x1", 1.0), ("x2", 1.0)])).unwrap();
        assert_eq!(raw[0], 5.0);
    }

    #[test]
    fn standardised_scores_match_hand_computation() {
        // mean 1.5, sample sd sqrt(5/3)
        let d = Dataset::new(vec![Column::continuous("x", vec![0.0, 1.0, 2.0, 3.0]).unwrap()]).unwrap();
        let z = compute_wss(&d, &weights(&[("x", 1.0)])).unwrap();
        let sd = (5.0f64 / 3.0).sqrt();
        let expected = [-1.5 / sd, -0.5 / sd, 0.5 / sd, 1.5 / sd];
        for (a, b) in z.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert_relative_eq!(z[0], -1.1619, epsilon = 1e-4);
        assert_relative_eq!(z[1], -0.3873, epsilon = 1e-4);
    }

    #[test]
    fn weight_scale_is_irrelevant() {
        let d = two_col(50, 1);
        let a = compute_wss(&d, &weights(&[("x", 1.0), ("y", 1.0)])).unwrap();
        let b = compute_wss(&d, &weights(&[("x", 2.0), ("y", 2.0)])).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_relative_eq!(*u, *v, epsilon = 1e-12);
        }
    }

    #[test]
    fn score_requires_complete_weight_columns() {
        let d = two_col(5, 1);
        let d = d.with_column(d.column("x").unwrap().with_missing([0])).unwrap();
        assert!(matches!(
            compute_wss(&d, &weights(&[("x", 1.0)])),
            Err(Error::IncompleteColumn { .. })
        ));
    }

    #[test]
    fn zero_variance_score_fails_under_mar() {
        let d = Dataset::new(vec![
            Column::continuous("c", vec![1.0; 10]).unwrap(),
            Column::continuous("y", (0..10).map(f64::from).collect()).unwrap(),
        ])
        .unwrap();
        let spec = AmputeSpec {
            pattern: AmputePattern::new(["y"], [("c", 1.0)]),
            mechanism: Mechanism::MarRight,
            proportion: 0.3,
        };
        assert!(matches!(ampute(&d, &spec, RngStream::from_seed(1)), Err(Error::Calibration(_))));
    }

    #[test]
    fn shift_hits_target_in_expectation() {
        let z: Vec<f64> = (0..101).map(|i| (i as f64 - 50.0) / 25.0).collect();
        for target in [0.3, 0.5, 0.8, 1e-9] {
            let c = calibrate_shift(&z, target).unwrap();
            let e = z.iter().map(|&v| logistic(v + c)).sum::<f64>() / z.len() as f64;
            assert!((e - target).abs() <= 1e-6);
        }
    }

    #[test]
    fn invalid_proportions_rejected() {
        let d = two_col(10, 2);
        for p in [0.0, 1.0, -0.1, 1.5] {
            let spec = AmputeSpec { pattern: AmputePattern::new(["y"], [("x", 1.0)]), mechanism: Mechanism::Mcar, proportion: p };
            assert!(ampute(&d, &spec, RngStream::from_seed(1)).is_err());
        }
    }

    #[test]
    fn mcar_fraction_lies_in_binomial_band() {
        let d = two_col(1000, 3);
        let spec = AmputeSpec { pattern: AmputePattern::new(["y"], [("x", 1.0)]), mechanism: Mechanism::Mcar, proportion: 0.3 };
        let out = ampute(&d, &spec, RngStream::from_seed(11)).unwrap();
        let frac = out.column("y").unwrap().n_missing() as f64 / 1000.0;
        assert!((frac - 0.3).abs() < 0.05, "{frac}");
        // non-target column untouched
        assert_eq!(out.column("x").unwrap(), d.column("x").unwrap());
    }

    #[test]
    fn marr_hits_top_decile_harder() {
        let d = two_col(5000, 4);
        let spec = AmputeSpec { pattern: AmputePattern::new(["y"], [("x", 1.0)]), mechanism: Mechanism::MarRight, proportion: 0.5 };
        let out = ampute(&d, &spec, RngStream::from_seed(5)).unwrap();
        let x = d.column("x").unwrap().values();
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let obs = out.column("y").unwrap().observed();
        let rate = |rows: &[usize]| rows.iter().filter(|&&r| !obs[r]).count() as f64 / rows.len() as f64;
        let bottom = rate(&order[..500]);
        let top = rate(&order[4500..]);
        assert!(top > bottom, "top {top} bottom {bottom}");
    }

    #[test]
    fn marr_probabilities_are_monotone_in_score() {
        let d = two_col(300, 6);
        let spec = AmputeSpec { pattern: AmputePattern::new(["y"], [("x", 1.0)]), mechanism: Mechanism::MarRight, proportion: 0.3 };
        let p = missingness_probabilities(&d, &spec).unwrap();
        let x = d.column("x").unwrap().values();
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        assert!(order.windows(2).all(|w| p[w[0]] <= p[w[1]]));
    }

    #[test]
    fn tiny_proportion_amputes_almost_nothing() {
        let d = two_col(1000, 7);
        for mech in [Mechanism::Mcar, Mechanism::MarRight] {
            let spec = AmputeSpec { pattern: AmputePattern::new(["y"], [("x", 1.0)]), mechanism: mech, proportion: 1e-9 };
            let out = ampute(&d, &spec, RngStream::from_seed(8)).unwrap();
            assert!(out.column("y").unwrap().n_missing() <= 1);
        }
    }

    #[test]
    fn joint_pattern_and_determinism() {
        let base = two_col(200, 9);
        let z = Column::continuous("z", vec![0.5; 200]).unwrap();
        let d = Dataset::new(vec![base.column_at(0).clone(), base.column_at(1).clone(), z]).unwrap();
        let spec = AmputeSpec { pattern: AmputePattern::new(["x", "z"], [("y", 1.0)]), mechanism: Mechanism::MarRight, proportion: 0.3 };
        let a = ampute(&d, &spec, RngStream::from_seed(3)).unwrap();
        let b = ampute(&d, &spec, RngStream::from_seed(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.column("x").unwrap().observed(), a.column("z").unwrap().observed());
        assert!(a.column("y").unwrap().is_complete());
    }
}
