//! Plot-ready CSV files for distribution, density, scatter and deviance plots.
//!
//! All columns are numeric so each file loads back with [`crate::data::load_csv`];
//! flags are written as 0/1.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use crate::data::ColumnKind;
use crate::engine::MultiplyImputed;
use crate::error::{Error, Result};
use crate::ppc::{DevianceSummary, PpcReport};
use crate::scalar::Scalar;
use crate::stats::{quantile, sample_sd};

pub const DENSITY_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionPlotRow {
    /// 1-based position in ascending order of the replicate mean.
    pub rank: usize,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub obs: f64,
    pub covered: bool,
}

/// One row per replicated cell of `variable`, sorted by replicate mean
/// (stable, so equal means keep row order).
pub fn distribution_rows(report: &PpcReport, variable: &str) -> Result<Vec<DistributionPlotRow>> {
    let mut cells: Vec<_> = report.cells_for(variable).collect();
    if cells.is_empty() {
        return Err(Error::UnknownColumn(variable.to_string()));
    }
    cells.sort_by(|a, b| a.rep_mean.partial_cmp(&b.rep_mean).unwrap_or(Ordering::Equal));
    Ok(cells
        .into_iter()
        .enumerate()
        .map(|(i, c)| DistributionPlotRow { rank: i + 1, mean: c.rep_mean, lo: c.lo, hi: c.hi, obs: c.observed, covered: c.covered })
        .collect())
}

/// Non-covered cells per rank decile of the distribution ordering.
pub fn miss_decile_counts(rows: &[DistributionPlotRow]) -> [usize; 10] {
    let n = rows.len();
    let mut counts = [0usize; 10];
    for r in rows.iter().filter(|r| !r.covered) {
        counts[((r.rank - 1) * 10 / n).min(9)] += 1;
    }
    counts
}

fn create(path: &Path) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(std::io::BufWriter::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn flag(b: bool) -> &'static str {
    if b { "1" } else { "0" }
}

/// Header `rank,mean,lo,hi,obs,covered`.
pub fn emit_distribution_plot(report: &PpcReport, variable: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rows = distribution_rows(report, variable)?;
    let mut w = create(path)?;
    w.write_record(["rank", "mean", "lo", "hi", "obs", "covered"]).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.rank.to_string(),
            r.mean.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
            r.obs.to_string(),
            flag(r.covered).to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Silverman's rule `0.9 · min(sd, IQR/1.34) · n^(−1/5)`, falling back to the
/// larger spread measure when the smaller one is zero.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewRows { needed: 2, available: values.len() });
    }
    let sd = sample_sd(values);
    let iqr = (quantile(values, 0.75) - quantile(values, 0.25)) / 1.34;
    let spread = match sd.min(iqr) {
        s if s > 0.0 => s,
        _ => sd.max(iqr),
    };
    if !(spread > 0.0) {
        return Err(Error::InvalidArgument("density of a constant series".into()));
    }
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

/// Gaussian-kernel density of `values` with bandwidth `h` at each grid point.
pub fn kde(values: &[f64], h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| values.iter().map(|&v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum::<f64>() * norm)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityData {
    pub grid: Vec<f64>,
    /// Series 0 is the observed values; series `k` is chain `k`'s draws.
    pub series: Vec<Vec<f64>>,
}

impl DensityData {
    /// Trapezoid integral of one series over the grid.
    pub fn integral(&self, series: usize) -> f64 {
        let d = &self.series[series];
        self.grid.windows(2).zip(d.windows(2)).map(|(g, v)| (g[1] - g[0]) * (v[0] + v[1]) / 2.0).sum()
    }

    /// Pointwise mean of the chain series.
    pub fn mean_replicate(&self) -> Vec<f64> {
        let k = (self.series.len() - 1) as f64;
        (0..self.grid.len()).map(|i| self.series[1..].iter().map(|s| s[i]).sum::<f64>() / k).collect()
    }

    /// `sup |observed − mean replicate|` over the grid.
    pub fn sup_gap(&self) -> f64 {
        self.series[0].iter().zip(self.mean_replicate()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Observed values and each chain's draws of `variable` on a shared grid.
///
/// Chain draws are the replicates of observed cells when the where-mask asked
/// for them, otherwise the imputations of the missing cells.
pub fn density_data<S: Scalar>(result: &MultiplyImputed<S>, variable: &str) -> Result<DensityData> {
    let column = result.original.column(variable)?;
    if column.kind() != ColumnKind::Continuous {
        return Err(Error::InvalidArgument(format!("`{variable}` is not continuous")));
    }
    let observed: Vec<f64> = column.observed_rows().iter().map(|&r| column.values()[r].as_f64()).collect();
    let mut series = vec![observed];
    match result.replicates_for(variable) {
        Ok(set) => {
            for k in 0..result.m() {
                series.push(set.chain(k).into_iter().map(Scalar::as_f64).collect());
            }
        }
        Err(_) => {
            let missing = column.missing_rows();
            for c in &result.completed {
                let v = c.column(variable)?.values();
                series.push(missing.iter().map(|&r| v[r].as_f64()).collect());
            }
        }
    }
    let bandwidths = series.iter().map(|s| silverman_bandwidth(s)).collect::<Result<Vec<_>>>()?;
    let h_max = bandwidths.iter().copied().fold(0.0, f64::max);
    let lo = series.iter().flatten().copied().fold(f64::INFINITY, f64::min) - 3.0 * h_max;
    let hi = series.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h_max;
    let step = (hi - lo) / (DENSITY_GRID - 1) as f64;
    let grid: Vec<f64> = (0..DENSITY_GRID).map(|i| lo + step * i as f64).collect();
    let series = series.iter().zip(&bandwidths).map(|(s, &h)| kde(s, h, &grid)).collect();
    Ok(DensityData { grid, series })
}

/// Header `series,grid_x,density`.
pub fn emit_density_data<S: Scalar>(result: &MultiplyImputed<S>, variable: &str, path: impl AsRef<Path>) -> Result<DensityData> {
    let path = path.as_ref();
    let data = density_data(result, variable)?;
    let mut w = create(path)?;
    w.write_record(["series", "grid_x", "density"]).map_err(csv_err(path))?;
    for (k, s) in data.series.iter().enumerate() {
        for (x, d) in data.grid.iter().zip(s) {
            w.write_record([k.to_string(), x.to_string(), d.to_string()]).map_err(csv_err(path))?;
        }
    }
    finish(w, path)?;
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub panel: usize,
    /// `false` for rows observed on both variables.
    pub drawn: bool,
    pub x: f64,
    pub y: f64,
}

/// Panel 0 holds rows observed on both variables; panel `k` holds all rows of
/// completed dataset `k`.
pub fn scatter_points<S: Scalar>(result: &MultiplyImputed<S>, x_var: &str, y_var: &str) -> Result<Vec<ScatterPoint>> {
    let xo = result.original.column(x_var)?;
    let yo = result.original.column(y_var)?;
    let n = result.original.n_rows();
    let both: Vec<bool> = (0..n).map(|r| xo.observed()[r] && yo.observed()[r]).collect();
    let mut out: Vec<ScatterPoint> = (0..n)
        .filter(|&r| both[r])
        .map(|r| ScatterPoint { panel: 0, drawn: false, x: xo.values()[r].as_f64(), y: yo.values()[r].as_f64() })
        .collect();
    for (k, c) in result.completed.iter().enumerate() {
        let (xc, yc) = (c.column(x_var)?.values(), c.column(y_var)?.values());
        out.extend((0..n).map(|r| ScatterPoint { panel: k + 1, drawn: !both[r], x: xc[r].as_f64(), y: yc[r].as_f64() }));
    }
    Ok(out)
}

/// Header `panel,origin,x,y`; origin is 0 for observed rows and 1 for rows
/// with a drawn value.
pub fn emit_scatter_data<S: Scalar>(result: &MultiplyImputed<S>, x_var: &str, y_var: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let points = scatter_points(result, x_var, y_var)?;
    let mut w = create(path)?;
    w.write_record(["panel", "origin", "x", "y"]).map_err(csv_err(path))?;
    for p in points {
        w.write_record([p.panel.to_string(), flag(p.drawn).to_string(), p.x.to_string(), p.y.to_string()])
            .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Header `index,p_hat,residual`; `index` is the data row.
pub fn emit_deviance_plot(summary: &DevianceSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_record(["index", "p_hat", "residual"]).map_err(csv_err(path))?;
    for c in &summary.cells {
        w.write_record([c.row.to_string(), c.p_hat.to_string(), c.residual.to_string()]).map_err(csv_err(path))?;
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppc::ObsCellDiag;

    fn cell(row: usize, rep_mean: f64, covered: bool) -> ObsCellDiag {
        ObsCellDiag { column: "y".into(), row, observed: 0.0, rep_mean, lo: -1.0, hi: 1.0, covered, distance: rep_mean.abs() }
    }

    fn report(cells: Vec<ObsCellDiag>) -> PpcReport {
        PpcReport { level: 0.95, m: 50, variables: Vec::new(), cells, p_values: Vec::new(), warnings: Vec::new() }
    }

    #[test]
    fn distribution_rows_sorted_and_ranked() {
        let r = report(vec![cell(0, 3.0, true), cell(1, -1.0, false), cell(2, 3.0, true)]);
        let rows = distribution_rows(&r, "y").unwrap();
        assert_eq!(rows.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(rows.iter().map(|r| r.mean).collect::<Vec<_>>(), vec![-1.0, 3.0, 3.0]);
        assert!(distribution_rows(&r, "z").is_err());
    }

    #[test]
    fn single_cell_gives_one_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        emit_distribution_plot(&report(vec![cell(4, 0.5, true)]), "y", &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "rank,mean,lo,hi,obs,covered\n1,0.5,-1,1,0,1\n");
    }

    #[test]
    fn kde_integrates_to_one() {
        let values = [0.0, 0.3, 1.7, 2.2, -0.4];
        let h = silverman_bandwidth(&values).unwrap();
        let (lo, hi) = (-0.4 - 3.0 * h, 2.2 + 3.0 * h);
        let grid: Vec<f64> = (0..DENSITY_GRID).map(|i| lo + (hi - lo) * i as f64 / 511.0).collect();
        let d = DensityData { series: vec![kde(&values, h, &grid)], grid };
        assert!((d.integral(0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bandwidth_follows_silverman() {
        // sd = 1.5811, IQR/1.34 = 2/1.34 = 1.4925; n^(-1/5) = 5^(-0.2).
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let expect = 0.9 * (2.0 / 1.34) * 5f64.powf(-0.2);
        assert!((silverman_bandwidth(&v).unwrap() - expect).abs() < 1e-12);
        assert!(silverman_bandwidth(&[1.0]).is_err());
        assert!(silverman_bandwidth(&[2.0, 2.0]).is_err());
    }

    #[test]
    fn decile_counts_bucket_by_rank() {
        let rows: Vec<DistributionPlotRow> = (1..=20)
            .map(|rank| DistributionPlotRow { rank, mean: 0.0, lo: 0.0, hi: 0.0, obs: 0.0, covered: rank != 1 && rank != 20 })
            .collect();
        let c = miss_decile_counts(&rows);
        assert_eq!(c[0], 1);
        assert_eq!(c[9], 1);
        assert_eq!(c.iter().sum::<usize>(), 2);
    }
}
