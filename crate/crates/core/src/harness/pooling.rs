//! Rubin's rules and the repeated-sampling check of pooled PMM estimates.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::amputation::{ampute, AmputeSpec, Mechanism};
use crate::data::{Dataset, RngStream};
use crate::engine::{run_fcs, EngineConfig};
use crate::error::{Error, Result};
use crate::imputers::ImputerSpec;
use crate::linalg::{ols, Matrix};
use crate::scalar::Scalar;
use crate::stats::{mean, sample_variance, t_critical};

use super::{gen_scenario2, ScenarioKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RubinPooled {
    pub estimate: f64,
    /// Mean within-imputation variance `Ū`.
    pub within: f64,
    /// Between-imputation variance `B`.
    pub between: f64,
    /// `T = Ū + (1 + 1/m) B`.
    pub total: f64,
    /// `(m − 1)(1 + 1/r)²` with `r = (1 + 1/m) B / Ū`; infinite when `B = 0`.
    pub df: f64,
}

pub fn pool_rubin(estimates: &[f64], variances: &[f64]) -> Result<RubinPooled> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("pooling needs at least 2 imputations, got {m}")));
    }
    if variances.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: variances.len() });
    }
    let estimate = mean(estimates);
    let within = mean(variances);
    let between = sample_variance(estimates);
    let inflated = (1.0 + 1.0 / m as f64) * between;
    let total = within + inflated;
    let df = if inflated > 0.0 {
        let r = inflated / within;
        (m as f64 - 1.0) * (1.0 + 1.0 / r).powi(2)
    } else {
        f64::INFINITY
    };
    Ok(RubinPooled { estimate, within, between, total, df })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolingStudySpec {
    pub n: usize,
    pub m: usize,
    pub repetitions: usize,
    pub mechanism: Mechanism,
    pub proportion: f64,
    pub level: f64,
    pub seed: u64,
}

impl PoolingStudySpec {
    /// PMM under MCAR with 30% of `(x, x2)` missing, 200 repetitions of
    /// n = 1000 and m = 50, 95% intervals.
    pub fn standard(seed: u64) -> Self {
        Self { n: 1000, m: 50, repetitions: 200, mechanism: Mechanism::Mcar, proportion: 0.3, level: 0.95, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSummary {
    pub coefficient: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub coverage: f64,
    pub mean_ci_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolingStudy {
    pub repetitions: usize,
    pub level: f64,
    pub coefficients: Vec<CoefficientSummary>,
    /// Pooled results per repetition, `[β₁, β₂]`.
    #[serde(skip)]
    pub pooled: Vec<[RubinPooled; 2]>,
}

impl PoolingStudy {
    pub fn coefficient(&self, name: &str) -> Option<&CoefficientSummary> {
        self.coefficients.iter().find(|c| c.coefficient == name)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["coefficient", "truth", "mean_estimate", "coverage", "mean_ci_width", "repetitions", "level"])?;
        for c in &self.coefficients {
            w.write_record([
                c.coefficient.clone(),
                c.truth.to_string(),
                c.mean_estimate.to_string(),
                c.coverage.to_string(),
                c.mean_ci_width.to_string(),
                self.repetitions.to_string(),
                self.level.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<table>", e))
    }
}

/// Fits `y ~ x + x2` on one completed dataset; returns `[(β₁, var), (β₂, var)]`.
fn fit_quadratic<S: Scalar>(d: &Dataset<S>) -> Result<[(f64, f64); 2]> {
    let get = |name: &str| -> Result<Vec<f64>> { Ok(d.column(name)?.values().iter().map(|v| v.as_f64()).collect()) };
    let (x, x2, y) = (get("x")?, get("x2")?, get("y")?);
    let rows: Vec<usize> = (0..d.n_rows()).collect();
    let fit = ols(&Matrix::design(&[&x, &x2], &rows), &y)?;
    Ok([(fit.coef[1], fit.cov[(1, 1)]), (fit.coef[2], fit.cov[(2, 2)])])
}

/// Repeats generate → ampute → PMM → pool on the quadratic-covariate design
/// and reports the bias and interval coverage of the pooled `β₁` and `β₂`.
pub fn pooled_coefficient_study<S: Scalar>(spec: &PoolingStudySpec) -> Result<PoolingStudy> {
    if spec.repetitions == 0 || spec.m < 2 || spec.n < 50 {
        return Err(Error::InvalidConfig("need repetitions ≥ 1, m ≥ 2 and n ≥ 50".into()));
    }
    let root = RngStream::from_seed(spec.seed);
    let method = ImputerSpec::pmm(&["y"]).with_square("x2");
    let pooled: Vec<[RubinPooled; 2]> = (0..spec.repetitions)
        .into_par_iter()
        .map(|rep| {
            let stream = root.child(rep as u64);
            let complete: Dataset<S> = gen_scenario2(spec.n, &mut stream.child(0).rng());
            let aspec = AmputeSpec {
                pattern: ScenarioKind::QuadCovariate.pattern(),
                mechanism: spec.mechanism,
                proportion: spec.proportion,
            };
            let amputed = ampute(&complete, &aspec, stream.child(1))?;
            let seed = stream.child(2).rng().random::<u64>();
            let config = EngineConfig::new(spec.m, 1, seed).with_method("x", method.clone());
            let result = run_fcs(&amputed, &config).map_err(|e| e.context(format!("repetition {rep}")))?;
            let fits = result.completed.iter().map(fit_quadratic).collect::<Result<Vec<_>>>()?;
            let pool = |k: usize| {
                let est: Vec<f64> = fits.iter().map(|f| f[k].0).collect();
                let var: Vec<f64> = fits.iter().map(|f| f[k].1).collect();
                pool_rubin(&est, &var)
            };
            Ok([pool(0)?, pool(1)?])
        })
        .collect::<Result<_>>()?;
    let reps = pooled.len() as f64;
    let coefficients = ["beta1", "beta2"]
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let truth = 1.0;
            let mut covered = 0usize;
            let mut width = 0.0;
            for p in &pooled {
                let half = t_critical(spec.level, p[k].df) * p[k].total.sqrt();
                covered += usize::from((p[k].estimate - truth).abs() <= half);
                width += 2.0 * half;
            }
            CoefficientSummary {
                coefficient: name.to_string(),
                truth,
                mean_estimate: pooled.iter().map(|p| p[k].estimate).sum::<f64>() / reps,
                coverage: covered as f64 / reps,
                mean_ci_width: width / reps,
            }
        })
        .collect();
    Ok(PoolingStudy { repetitions: spec.repetitions, level: spec.level, coefficients, pooled })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_estimates_pool_to_within_variance() {
        let r = pool_rubin(&[2.0; 5], &[0.3; 5]).unwrap();
        assert_eq!(r.estimate, 2.0);
        assert!((r.total - 0.3).abs() < 1e-15);
        assert!(r.df.is_infinite());
    }

    #[test]
    fn two_imputation_arithmetic() {
        let r = pool_rubin(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert!((r.total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pooling_rejects_single_imputation() {
        assert!(pool_rubin(&[1.0], &[1.0]).is_err());
        assert!(pool_rubin(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn small_study_runs_and_is_deterministic() {
        let spec = PoolingStudySpec { n: 200, m: 5, repetitions: 4, ..PoolingStudySpec::standard(3) };
        let a = pooled_coefficient_study::<f64>(&spec).unwrap();
        let b = pooled_coefficient_study::<f64>(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.coefficients.len(), 2);
        assert!(a.coefficients.iter().all(|c| (c.mean_estimate - 1.0).abs() < 0.5));
    }
}
