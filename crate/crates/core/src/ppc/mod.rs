//! Posterior predictive diagnostics computed from replicated observed cells.
//!
//! Diagnostics are reported in `f64` whatever the working precision.

mod pvalue;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::data::ColumnKind;
use crate::engine::MultiplyImputed;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{mean, quantile_sorted};

pub use pvalue::{p_b_com, p_b_ecom, ppc_pvalue, DiscrepancyResult, Statistic};

/// Interval bounds below this replicate count are unreliable at 95%.
pub const RECOMMENDED_MIN_M: usize = 20;

/// Replicate summary for one observed cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObsCellDiag {
    pub column: String,
    pub row: usize,
    pub observed: f64,
    pub rep_mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub covered: bool,
    pub distance: f64,
}

impl ObsCellDiag {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSummary {
    pub column: String,
    pub n_cells: usize,
    pub cov: f64,
    pub distance: f64,
    pub ciw: f64,
    /// Mean squared deviance residual, binary columns only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpcReport {
    pub level: f64,
    pub m: usize,
    pub variables: Vec<VariableSummary>,
    #[serde(skip)]
    pub cells: Vec<ObsCellDiag>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub p_values: Vec<DiscrepancyResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PpcReport {
    pub fn variable(&self, column: &str) -> Result<&VariableSummary> {
        self.variables.iter().find(|v| v.column == column).ok_or_else(|| Error::NoReplicates(column.to_string()))
    }

    pub fn cells_for<'a>(&'a self, column: &'a str) -> impl Iterator<Item = &'a ObsCellDiag> + 'a {
        self.cells.iter().filter(move |c| c.column == column)
    }

    /// Cell-level table with header
    /// `column,row,observed,rep_mean,lo,hi,covered,distance`.
    pub fn write_cells_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::InvalidArgument(format!("writing cell table: {e}"));
        w.write_record(["column", "row", "observed", "rep_mean", "lo", "hi", "covered", "distance"]).map_err(io)?;
        for c in &self.cells {
            w.write_record([
                c.column.clone(),
                c.row.to_string(),
                c.observed.to_string(),
                c.rep_mean.to_string(),
                c.lo.to_string(),
                c.hi.to_string(),
                c.covered.to_string(),
                c.distance.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("writing cell table: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<stem>_cells.csv` and `<stem>.json` into `dir`.
    pub fn write_files(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let cells = dir.join(format!("{stem}_cells.csv"));
        let file = std::fs::File::create(&cells).map_err(|e| Error::io(&cells, e))?;
        self.write_cells_csv(std::io::BufWriter::new(file))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))
    }
}

/// Empirical `((1−level)/2, (1+level)/2)` replicate intervals for every
/// replicated observed cell, with per-variable coverage, distance and width.
pub fn cell_diagnostics<S: Scalar>(result: &MultiplyImputed<S>, level: f64) -> Result<PpcReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("nominal level {level} outside (0, 1)")));
    }
    if result.replicates.is_empty() {
        return Err(Error::NoReplicates("<all>".into()));
    }
    let (p_lo, p_hi) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut cells = Vec::new();
    let mut variables = Vec::new();
    for set in &result.replicates {
        let column = result.original.column(&set.column)?;
        let start = cells.len();
        for (&row, reps) in set.rows.iter().zip(&set.values) {
            let mut sorted: Vec<f64> = reps.iter().map(|v| v.as_f64()).collect();
            let rep_mean = mean(&sorted);
            sorted.sort_by(f64::total_cmp);
            let lo = quantile_sorted(&sorted, p_lo);
            let hi = quantile_sorted(&sorted, p_hi);
            let observed = column.values()[row].as_f64();
            cells.push(ObsCellDiag {
                column: set.column.clone(),
                row,
                observed,
                rep_mean,
                lo,
                hi,
                covered: lo <= observed && observed <= hi,
                distance: (observed - rep_mean).abs(),
            });
        }
        let own = &cells[start..];
        let n = own.len() as f64;
        let deviance = match column.kind() {
            ColumnKind::Binary => Some(deviance_summary(result, &set.column)?.mean_squared),
            ColumnKind::Continuous => None,
        };
        variables.push(VariableSummary {
            column: set.column.clone(),
            n_cells: own.len(),
            cov: own.iter().filter(|c| c.covered).count() as f64 / n,
            distance: own.iter().map(|c| c.distance).sum::<f64>() / n,
            ciw: own.iter().map(ObsCellDiag::width).sum::<f64>() / n,
            deviance,
        });
    }
    let mut warnings = Vec::new();
    if result.m() < RECOMMENDED_MIN_M {
        warnings.push(format!(
            "only {} replicates per cell; intervals at level {level} are coarse (at least {RECOMMENDED_MIN_M} recommended)",
            result.m()
        ));
    }
    Ok(PpcReport { level, m: result.m(), variables, cells, p_values: Vec::new(), warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DevianceCell {
    pub row: usize,
    pub observed: f64,
    pub p_hat: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DevianceSummary {
    pub column: String,
    pub cells: Vec<DevianceCell>,
    /// `Σ d_i² / n_obs`.
    pub mean_squared: f64,
}

impl DevianceSummary {
    pub fn mean_abs(&self) -> f64 {
        self.cells.iter().map(|c| c.residual.abs()).sum::<f64>() / self.cells.len() as f64
    }
}

/// Deviance residual of `y ∈ {0,1}` at probability `p`.
pub fn deviance_residual(y: f64, p: f64) -> f64 {
    let ll = y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    (y - p).signum() * (-2.0 * ll).sqrt()
}

/// Deviance residuals of a binary column against replicate frequencies
/// `p̂ = #{rep = 1}/m`, clamped to `[1/(2m), 1 − 1/(2m)]`.
pub fn deviance_summary<S: Scalar>(result: &MultiplyImputed<S>, target: &str) -> Result<DevianceSummary> {
    let column = result.original.column(target)?;
    if column.kind() != ColumnKind::Binary {
        return Err(Error::NotBinary(target.to_string()));
    }
    let set = result.replicates_for(target)?;
    if set.rows.is_empty() {
        return Err(Error::NoReplicates(target.to_string()));
    }
    let m = set.values[0].len() as f64;
    let floor = 1.0 / (2.0 * m);
    let cells: Vec<DevianceCell> = set
        .rows
        .iter()
        .zip(&set.values)
        .map(|(&row, reps)| {
            let ones = reps.iter().filter(|v| **v == S::one()).count() as f64;
            let p_hat = (ones / m).clamp(floor, 1.0 - floor);
            let y = column.values()[row].as_f64();
            DevianceCell { row, observed: y, p_hat, residual: deviance_residual(y, p_hat) }
        })
        .collect();
    let mean_squared = cells.iter().map(|c| c.residual * c.residual).sum::<f64>() / cells.len() as f64;
    Ok(DevianceSummary { column: target.to_string(), cells, mean_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Dataset, WhereMask};
    use crate::engine::{EngineFlags, ReplicateSet};

    fn fake(kind: ColumnKind, observed: Vec<f64>, reps: Vec<Vec<f64>>) -> MultiplyImputed<f64> {
        let n = observed.len();
        let col = Column::new("y", kind, observed, vec![true; n]).unwrap();
        let data = Dataset::new(vec![col]).unwrap();
        let m = reps[0].len();
        MultiplyImputed {
            completed: vec![data.clone(); m],
            where_mask: WhereMask::all_of(&data, &["y"]),
            original: data,
            replicates: vec![ReplicateSet { column: "y".into(), rows: (0..n).collect(), values: reps }],
            traces: Vec::new(),
            flags: EngineFlags::default(),
            maxit: 1,
            imputed_columns: vec!["y".into()],
        }
    }

    #[test]
    fn degenerate_replicates_give_zero_width_and_distance() {
        let r = fake(ColumnKind::Continuous, vec![2.5, -1.0], vec![vec![2.5; 30], vec![-1.0; 30]]);
        let rep = cell_diagnostics(&r, 0.95).unwrap();
        let v = rep.variable("y").unwrap();
        assert_eq!((v.cov, v.distance, v.ciw), (1.0, 0.0, 0.0));
    }

    #[test]
    fn interval_uses_type7_quantiles() {
        // Replicates 1..=21: the 2.5% and 97.5% points are 1.5 and 20.5.
        let reps: Vec<f64> = (1..=21).map(f64::from).collect();
        let r = fake(ColumnKind::Continuous, vec![20.7], vec![reps]);
        let rep = cell_diagnostics(&r, 0.95).unwrap();
        let c = &rep.cells[0];
        assert!((c.lo - 1.5).abs() < 1e-12 && (c.hi - 20.5).abs() < 1e-12);
        assert!(!c.covered);
        assert_eq!(c.rep_mean, 11.0);
        assert!((c.distance - 9.7).abs() < 1e-12);
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn level_outside_unit_interval_is_rejected() {
        let r = fake(ColumnKind::Continuous, vec![0.0], vec![vec![0.0; 5]]);
        assert!(cell_diagnostics(&r, 1.0).is_err());
        assert!(cell_diagnostics(&r, 0.0).is_err());
        assert!(!cell_diagnostics(&r, 0.5).unwrap().warnings.is_empty());
    }

    #[test]
    fn deviance_clamps_perfect_agreement() {
        let m = 50;
        let r = fake(ColumnKind::Binary, vec![1.0, 0.0], vec![vec![1.0; m], vec![0.0; m]]);
        let d = deviance_summary(&r, "y").unwrap();
        let expect = (-2.0 * (1.0 - 1.0 / (2.0 * m as f64)).ln()).sqrt();
        assert!((d.cells[0].residual - expect).abs() < 1e-15);
        assert!((d.cells[1].residual + expect).abs() < 1e-15);
        let bound = (-2.0 * (1.0 / (2.0 * m as f64)).ln()).sqrt();
        let worst = fake(ColumnKind::Binary, vec![1.0], vec![vec![0.0; m]]);
        let dw = deviance_summary(&worst, "y").unwrap();
        assert!((dw.cells[0].residual.abs() - bound).abs() < 1e-12);
    }

    #[test]
    fn deviance_needs_binary_column() {
        let r = fake(ColumnKind::Continuous, vec![1.0], vec![vec![1.0; 4]]);
        assert!(matches!(deviance_summary(&r, "y"), Err(Error::NotBinary(_))));
    }

    #[test]
    fn cell_table_has_fixed_header() {
        let r = fake(ColumnKind::Continuous, vec![1.0], vec![vec![0.0, 1.0, 2.0]]);
        let rep = cell_diagnostics(&r, 0.9).unwrap();
        let mut buf = Vec::new();
        rep.write_cells_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("column,row,observed,rep_mean,lo,hi,covered,distance\n"));
        assert_eq!(text.lines().count(), 2);
        let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(json["variables"][0]["column"], "y");
    }
}
