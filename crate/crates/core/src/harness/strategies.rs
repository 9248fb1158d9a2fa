//! Side-by-side diagnostics for several imputation strategies on one dataset.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{run_fcs, EngineConfig};
use crate::error::{Error, Result};
use crate::imputers::ImputerSpec;
use crate::ppc::cell_diagnostics;
use crate::scalar::Scalar;

/// A named set of per-column imputation models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategy {
    pub name: String,
    pub methods: BTreeMap<String, ImputerSpec>,
    /// Defaults to 10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxit: Option<usize>,
}

/// Reads a JSON list of strategies.
pub fn load_strategies(path: impl AsRef<Path>) -> Result<Vec<Strategy>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let out: Vec<Strategy> =
        serde_json::from_str(&text).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub variable: String,
    pub cov: f64,
    pub distance: f64,
    pub ciw: f64,
}

/// Imputes `data` once per strategy with every observed cell of the modelled
/// columns replicated, and scores each incomplete variable. All strategies
/// share `seed`.
pub fn run_strategy_comparison<S: Scalar>(
    data: &Dataset<S>,
    strategies: &[Strategy],
    level: f64,
    m: usize,
    seed: u64,
) -> Result<Vec<StrategyRow>> {
    if strategies.is_empty() {
        return Err(Error::InvalidConfig("no strategies given".into()));
    }
    let incomplete: Vec<&str> = data.columns().iter().filter(|c| !c.is_complete()).map(|c| c.name()).collect();
    for s in strategies {
        if let Some(v) = incomplete.iter().find(|v| !s.methods.contains_key(**v)) {
            return Err(Error::InvalidConfig(format!("strategy `{}` has no model for incomplete column `{v}`", s.name)));
        }
    }
    let per: Vec<Vec<StrategyRow>> = strategies
        .par_iter()
        .map(|s| {
            let mut config = EngineConfig::new(m, s.maxit.unwrap_or(10), seed);
            config.methods = s.methods.clone();
            let config = config.replicate_observed(data);
            let ctx = format!("strategy `{}`", s.name);
            let result = run_fcs(data, &config).map_err(|e| e.context(ctx.clone()))?;
            let report = cell_diagnostics(&result, level).map_err(|e| e.context(ctx))?;
            incomplete
                .iter()
                .map(|v| {
                    let summary = report.variable(v)?;
                    Ok(StrategyRow {
                        strategy: s.name.clone(),
                        variable: v.to_string(),
                        cov: summary.cov,
                        distance: summary.distance,
                        ciw: summary.ciw,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

pub fn write_strategy_table<W: Write>(rows: &[StrategyRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["strategy", "variable", "cov", "distance", "ciw"])?;
    for r in rows {
        w.write_record([r.strategy.clone(), r.variable.clone(), r.cov.to_string(), r.distance.to_string(), r.ciw.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))
}
