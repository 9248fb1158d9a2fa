//! Posterior predictive p-values for completed-data test statistics.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, RngStream};
use crate::engine::{EngineConfig, Plan};
use crate::error::{Error, Result};
use crate::linalg::{ols, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyResult {
    pub statistic: String,
    pub p_value: f64,
    /// Number of parameter draws (outer draws for the nested estimator).
    pub draws: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_draws: Option<usize>,
    /// Per-draw indicators that counted towards `p_value`.
    #[serde(skip)]
    pub indicators: Vec<bool>,
}

/// A test statistic evaluated on a completed dataset.
type StatFn<S> = Arc<dyn Fn(&Dataset<S>) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Statistic<S> {
    label: String,
    f: StatFn<S>,
}

impl<S> fmt::Debug for Statistic<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Statistic").field("label", &self.label).finish()
    }
}

impl<S: Scalar> Statistic<S> {
    pub fn new(label: impl Into<String>, f: impl Fn(&Dataset<S>) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, data: &Dataset<S>) -> f64 {
        (self.f)(data)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(format!("constant({value})"), move |_| value)
    }

    /// Mean of a column over all rows.
    pub fn mean_of(column: &str) -> Self {
        let name = column.to_string();
        Self::new(format!("mean({column})"), move |d: &Dataset<S>| {
            let v = d.column(&name).expect("statistic column exists").values();
            v.iter().map(|x| x.as_f64()).sum::<f64>() / v.len() as f64
        })
    }

    /// Mean of a column over a fixed set of rows.
    pub fn mean_over_rows(column: &str, rows: Vec<usize>) -> Self {
        let name = column.to_string();
        Self::new(format!("mean({column})[{} rows]", rows.len()), move |d: &Dataset<S>| {
            let v = d.column(&name).expect("statistic column exists").values();
            rows.iter().map(|&r| v[r].as_f64()).sum::<f64>() / rows.len() as f64
        })
    }

    /// Least-squares coefficient of `predictors[index]` in
    /// `response ~ 1 + predictors`.
    pub fn ols_coefficient(response: &str, predictors: &[&str], index: usize) -> Self {
        let resp = response.to_string();
        let preds: Vec<String> = predictors.iter().map(|s| s.to_string()).collect();
        let label = format!("coef({response} ~ {})[{}]", predictors.join(" + "), predictors[index]);
        Self::new(label, move |d: &Dataset<S>| {
            let cols: Vec<Vec<f64>> = preds
                .iter()
                .map(|p| d.column(p).expect("statistic column exists").values().iter().map(|x| x.as_f64()).collect())
                .collect();
            let slices: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let y: Vec<f64> = d.column(&resp).expect("statistic column exists").values().iter().map(|x| x.as_f64()).collect();
            let rows: Vec<usize> = (0..d.n_rows()).collect();
            ols(&Matrix::design(&slices, &rows), &y).map_or(f64::NAN, |fit| fit.coef[index + 1])
        })
    }
}

/// `p = #{j : T_j(rep) ≥ T_j(obs)} / N`; a single observed value is compared
/// with every replicate.
pub fn ppc_pvalue(observed: &[f64], replicate: &[f64]) -> Result<DiscrepancyResult> {
    if replicate.is_empty() || observed.is_empty() {
        return Err(Error::InvalidArgument("p-value needs at least one draw".into()));
    }
    if observed.len() != 1 && observed.len() != replicate.len() {
        return Err(Error::DimensionMismatch { expected: replicate.len(), found: observed.len() });
    }
    let indicators: Vec<bool> = replicate
        .iter()
        .enumerate()
        .map(|(j, &r)| r >= observed[if observed.len() == 1 { 0 } else { j }])
        .collect();
    Ok(DiscrepancyResult {
        statistic: String::new(),
        p_value: indicators.iter().filter(|&&b| b).count() as f64 / indicators.len() as f64,
        draws: indicators.len(),
        inner_draws: None,
        indicators,
    })
}

fn standard_plan<S: Scalar>(data: &Dataset<S>, config: &EngineConfig) -> Result<Plan<S>> {
    let mut cfg = config.clone();
    cfg.where_mask = None;
    Plan::new(data, &cfg)
}

/// Completed-data p-value: for each of `n` parameter draws, compare
/// `T(y_com^rep)` with `T(y_com)` where the replicate redraws every cell of the
/// imputed columns under the same parameters.
///
/// Draw `j` runs the chain on stream `child(j)` of the configured seed.
pub fn p_b_com<S: Scalar>(data: &Dataset<S>, config: &EngineConfig, t: &Statistic<S>, n: usize) -> Result<DiscrepancyResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let plan = standard_plan(data, config)?;
    let root = RngStream::from_seed(config.seed);
    let pairs: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut chain = plan.run_chain(j, root.child(j as u64))?;
            let rep = plan.replicate_sweep(&chain.completed, &chain.params, &mut chain.rng)?;
            Ok((t.eval(&plan.to_dataset(&chain.completed)), t.eval(&plan.to_dataset(&rep))))
        })
        .collect::<Result<_>>()?;
    let (obs, rep): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mut out = ppc_pvalue(&obs, &rep)?;
    out.statistic = t.label().to_string();
    Ok(out)
}

/// Expected completed-data p-value with `n1` outer and `n2` inner draws.
///
/// Outer draw `j` reproduces draw `j` of [`p_b_com`]: the completed data
/// `(y_obs, y_mis^j)` and a replicate `y_com^rep,j`. Inner draw `k` re-imputes
/// the missing cells under the same parameters twice from one shared stream,
/// once next to `y_obs` and once next to the replicated observed cells, and
/// records `D_jk = T(y_obs^rep,j, ·) − T(y_obs, ·)`. The p-value is the share of
/// outer draws with `mean_k D_jk ≥ 0`.
pub fn p_b_ecom<S: Scalar>(
    data: &Dataset<S>,
    config: &EngineConfig,
    t: &Statistic<S>,
    n1: usize,
    n2: usize,
) -> Result<DiscrepancyResult> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("need at least one outer and one inner draw".into()));
    }
    let plan = standard_plan(data, config)?;
    let root = RngStream::from_seed(config.seed);
    let means: Vec<f64> = (0..n1)
        .into_par_iter()
        .map(|j| {
            let outer = root.child(j as u64);
            let mut chain = plan.run_chain(j, outer)?;
            let rep = plan.replicate_sweep(&chain.completed, &chain.params, &mut chain.rng)?;
            let mut total = 0.0;
            for k in 0..n2 {
                let inner = outer.child(k as u64 + 1);
                let given_obs = plan.reimpute_missing(&chain.completed, &chain.params, &mut inner.rng())?;
                let given_rep = plan.reimpute_missing(&rep, &chain.params, &mut inner.rng())?;
                total += t.eval(&plan.to_dataset(&given_rep)) - t.eval(&plan.to_dataset(&given_obs));
            }
            Ok(total / n2 as f64)
        })
        .collect::<Result<_>>()?;
    let mut out = ppc_pvalue(&[0.0], &means)?;
    out.statistic = t.label().to_string();
    out.inner_draws = Some(n2);
    Ok(out)
}
