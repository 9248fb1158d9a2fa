//! Chained-equations driver with replication of observed cells.
//!
//! Every chain starts from random observed values, then cycles through the
//! imputed columns `maxit` times. Cells flagged in the where-mask that are
//! observed get replicate draws: under [`PpcMode::Retain`] these are only
//! recorded, under [`PpcMode::Overwrite`] they also replace the observed value
//! in the chain's working data.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Dataset, RngStream, WhereMask};
use crate::error::{Error, Result};
use crate::imputers::{
    draw_bayes_linreg, draw_bayes_logreg, impute_logreg, impute_norm, impute_smcfcs_quadratic, pmm_donors,
    ImputerSpec, LinRegDraw, LogRegDraw, Method, PolyCombModel,
};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PpcMode {
    #[default]
    Retain,
    Overwrite,
}

fn default_maxit() -> usize {
    10
}

fn default_m() -> usize {
    50
}

/// Engine settings. Parsed from JSON of the form
/// `{"m":50,"maxit":10,"seed":1,"ppc_mode":"retain","methods":{...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ppc_mode: PpcMode,
    pub methods: BTreeMap<String, ImputerSpec>,
    /// Column visit order; defaults to dataset order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visit_order: Option<Vec<String>>,
    /// Extra cells to draw besides the missing ones.
    #[serde(skip)]
    pub where_mask: Option<WhereMask>,
}

impl EngineConfig {
    pub fn new(m: usize, maxit: usize, seed: u64) -> Self {
        Self {
            m,
            maxit,
            seed,
            ppc_mode: PpcMode::Retain,
            methods: BTreeMap::new(),
            visit_order: None,
            where_mask: None,
        }
    }

    pub fn with_method(mut self, column: &str, spec: ImputerSpec) -> Self {
        self.methods.insert(column.to_string(), spec);
        self
    }

    pub fn with_where(mut self, mask: WhereMask) -> Self {
        self.where_mask = Some(mask);
        self
    }

    pub fn with_mode(mut self, mode: PpcMode) -> Self {
        self.ppc_mode = mode;
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Where-mask covering every observed cell of the imputed columns and
    /// their square companions.
    pub fn replicate_observed<S: Scalar>(mut self, data: &Dataset<S>) -> Self {
        let mut names: Vec<&str> = self.methods.keys().map(String::as_str).collect();
        names.extend(self.methods.values().filter_map(|s| s.square.as_deref()));
        self.where_mask = Some(where_all_observed(data).restricted_to(&names));
        self
    }
}

/// True exactly at observed cells.
pub fn where_all_observed<S: Scalar>(data: &Dataset<S>) -> WhereMask {
    let cells = data.columns().iter().map(|c| c.observed().to_vec()).collect();
    WhereMask::from_cells(data.names().map(str::to_owned).collect(), cells).expect("shape taken from data")
}

/// Replicate draws of the observed where-cells of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet<S> {
    pub column: String,
    pub rows: Vec<usize>,
    /// `values[cell][chain]`.
    pub values: Vec<Vec<S>>,
}

impl<S: Scalar> ReplicateSet<S> {
    pub fn n_cells(&self) -> usize {
        self.rows.len()
    }

    /// All cells' draws from one chain.
    pub fn chain(&self, chain: usize) -> Vec<S> {
        self.values.iter().map(|v| v[chain]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub chain: usize,
    pub iteration: usize,
    pub column: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Counts of fallbacks taken by the imputers, summed over chains and iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EngineFlags {
    pub shrunk_logistic: usize,
    pub vertex_fallbacks: usize,
    pub cap_fallbacks: usize,
}

impl EngineFlags {
    fn add(&mut self, other: EngineFlags) {
        self.shrunk_logistic += other.shrunk_logistic;
        self.vertex_fallbacks += other.vertex_fallbacks;
        self.cap_fallbacks += other.cap_fallbacks;
    }
}

/// Output of [`run_fcs`].
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplyImputed<S> {
    pub original: Dataset<S>,
    pub completed: Vec<Dataset<S>>,
    pub replicates: Vec<ReplicateSet<S>>,
    pub traces: Vec<TraceRow>,
    pub flags: EngineFlags,
    pub where_mask: WhereMask,
    pub maxit: usize,
    /// Names of the columns with imputation models, in visit order.
    pub imputed_columns: Vec<String>,
}

impl<S: Scalar> MultiplyImputed<S> {
    pub fn m(&self) -> usize {
        self.completed.len()
    }

    pub fn replicates_for(&self, column: &str) -> Result<&ReplicateSet<S>> {
        self.replicates
            .iter()
            .find(|r| r.column == column)
            .ok_or_else(|| Error::NoReplicates(column.to_string()))
    }
}

/// Per chain × iteration × column mean and sd of the freshly drawn values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<TraceRow>,
}

impl TraceTable {
    pub fn column_name(&self, row: &TraceRow) -> &str {
        &self.columns[row.column]
    }

    /// CSV with header `chain,iteration,column,mean,sd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("chain,iteration,column,mean,sd\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.chain, r.iteration, self.columns[r.column], r.mean, r.sd));
        }
        out
    }
}

pub fn chain_trace_summary<S: Scalar>(result: &MultiplyImputed<S>) -> Result<TraceTable> {
    if result.maxit < 2 {
        return Err(Error::InvalidArgument("trace summaries need at least two iterations".into()));
    }
    Ok(TraceTable { columns: result.imputed_columns.clone(), rows: result.traces.clone() })
}

/// Resolved, validated per-column work plan.
#[derive(Debug, Clone)]
pub(crate) struct Target {
    pub col: usize,
    pub name: String,
    pub method: Method,
    pub predictors: Vec<usize>,
    pub square: Option<usize>,
    pub observed_rows: Vec<usize>,
    pub missing_rows: Vec<usize>,
    /// Observed rows with a where flag on this column or its square.
    pub replicate_rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan<S> {
    pub original: Dataset<S>,
    pub targets: Vec<Target>,
    pub mode: PpcMode,
    pub maxit: usize,
    pub where_mask: WhereMask,
    /// Replicate store layout: (column index, rows, owning target, is square).
    pub stores: Vec<(usize, Vec<usize>, usize, bool)>,
}

impl<S: Scalar> Plan<S> {
    pub fn new(data: &Dataset<S>, config: &EngineConfig) -> Result<Self> {
        if config.m == 0 || config.maxit == 0 {
            return Err(Error::InvalidConfig("m and maxit must be at least 1".into()));
        }
        let where_mask = match &config.where_mask {
            Some(w) if !w.matches(data) => {
                return Err(Error::InvalidConfig("where mask does not match the dataset".into()));
            }
            Some(w) => w.clone(),
            None => WhereMask::none(data),
        };
        let order: Vec<String> = match &config.visit_order {
            Some(v) => {
                let mut sorted = v.clone();
                sorted.sort();
                let keys: Vec<String> = config.methods.keys().cloned().collect();
                if sorted != keys {
                    return Err(Error::InvalidConfig("visit order must list each imputed column once".into()));
                }
                v.clone()
            }
            None => data.names().filter(|n| config.methods.contains_key(*n)).map(str::to_owned).collect(),
        };
        for name in config.methods.keys() {
            data.index_of(name)?;
        }
        let mut square_owner: BTreeMap<usize, usize> = BTreeMap::new();
        let mut targets = Vec::with_capacity(order.len());
        for name in &order {
            let spec = &config.methods[name];
            spec.validate(name)?;
            let col = data.index_of(name)?;
            let column = data.column_at(col);
            if spec.method == Method::LogReg && column.kind() != ColumnKind::Binary {
                return Err(Error::NotBinary(name.clone()));
            }
            let predictors = spec.predictors.iter().map(|p| data.index_of(p)).collect::<Result<Vec<_>>>()?;
            let square = match &spec.square {
                Some(sq) => {
                    let idx = data.index_of(sq)?;
                    if config.methods.contains_key(sq) {
                        return Err(Error::InvalidConfig(format!("square column `{sq}` has its own model")));
                    }
                    if square_owner.insert(idx, targets.len()).is_some() {
                        return Err(Error::InvalidConfig(format!("`{sq}` is the square of two columns")));
                    }
                    Some(idx)
                }
                None => None,
            };
            let observed_rows = column.observed_rows();
            let needed = predictors.len() + 2;
            if observed_rows.len() < needed {
                return Err(Error::TooFewRows { needed, available: observed_rows.len() }
                    .context(format!("column `{name}`")));
            }
            targets.push(Target {
                col,
                name: name.clone(),
                method: spec.method,
                predictors,
                square,
                missing_rows: column.missing_rows(),
                observed_rows,
                replicate_rows: Vec::new(),
            });
        }
        // Cells the engine will fill: where-cells and missing cells.
        let imputed: Vec<usize> = targets.iter().map(|t| t.col).collect();
        for (c, column) in data.columns().iter().enumerate() {
            let flagged = where_mask.column(c).iter().any(|&b| b);
            let covered = imputed.contains(&c) || square_owner.contains_key(&c);
            if flagged && !covered {
                return Err(Error::InvalidConfig(format!("where mask flags `{}` but it has no model", column.name())));
            }
        }
        for t in &targets {
            for &p in &t.predictors {
                let pc = data.column_at(p);
                if !pc.is_complete() && !imputed.contains(&p) && !square_owner.contains_key(&p) {
                    return Err(Error::InvalidConfig(format!(
                        "predictor `{}` of `{}` has missing cells but no model",
                        pc.name(),
                        t.name
                    )));
                }
            }
        }
        for (&sq, &owner) in &square_owner {
            let t = &targets[owner];
            let own = data.column_at(t.col).observed();
            let sq_col = data.column_at(sq);
            if sq_col.observed().iter().zip(own).any(|(&s, &o)| !s && o) {
                return Err(Error::InvalidConfig(format!(
                    "`{}` is missing where `{}` is observed",
                    sq_col.name(),
                    t.name
                )));
            }
            if (0..data.n_rows()).any(|r| where_mask.get(r, sq) && sq_col.observed()[r] && !where_mask.get(r, t.col)) {
                return Err(Error::InvalidConfig(format!(
                    "where mask flags `{}` on rows where `{}` is not drawn",
                    sq_col.name(),
                    t.name
                )));
            }
        }
        let mut stores = Vec::new();
        for (ti, t) in targets.iter_mut().enumerate() {
            let own = data.column_at(t.col).observed();
            t.replicate_rows = (0..data.n_rows()).filter(|&r| own[r] && where_mask.get(r, t.col)).collect();
            stores.push((t.col, t.replicate_rows.clone(), ti, false));
            if let Some(sq) = t.square {
                let sq_obs = data.column_at(sq).observed();
                let rows: Vec<usize> = (0..data.n_rows()).filter(|&r| sq_obs[r] && where_mask.get(r, sq)).collect();
                stores.push((sq, rows, ti, true));
            }
        }
        stores.retain(|s| !s.1.is_empty());
        stores.sort_by_key(|s| s.0);
        Ok(Self { original: data.clone(), targets, mode: config.ppc_mode, maxit: config.maxit, where_mask, stores })
    }
}

/// Posterior draw of one column's parameters.
#[derive(Debug, Clone)]
pub(crate) enum Params<S> {
    Norm(LinRegDraw<S>),
    Pmm { draw: LinRegDraw<S>, x_obs: Matrix<S>, y_obs: Vec<S>, donors: usize },
    LogReg(LogRegDraw<S>),
    PolyComb(PolyCombModel<S>),
    Smc { substantive: LinRegDraw<S>, covariate: LinRegDraw<S> },
}

/// Working copy of the data, one vector per column.
pub(crate) type Cols<S> = Vec<Vec<S>>;

fn design<S: Scalar>(cols: &Cols<S>, predictors: &[usize], rows: &[usize]) -> Matrix<S> {
    let slices: Vec<&[S]> = predictors.iter().map(|&p| cols[p].as_slice()).collect();
    Matrix::design(&slices, rows)
}

fn gather<S: Scalar>(values: &[S], rows: &[usize]) -> Vec<S> {
    rows.iter().map(|&r| values[r]).collect()
}

impl<S: Scalar> Plan<S> {
    /// Draws θ for target `t` given the working data.
    pub fn fit<R: Rng + ?Sized>(&self, t: &Target, cols: &Cols<S>, rng: &mut R) -> Result<(Params<S>, EngineFlags)> {
        let original = self.original.column_at(t.col).values();
        let y_obs = gather(original, &t.observed_rows);
        let mut flags = EngineFlags::default();
        let params = match t.method {
            Method::Norm => Params::Norm(draw_bayes_linreg(&design(cols, &t.predictors, &t.observed_rows), &y_obs, rng)?),
            Method::Pmm { donors } => {
                let x_obs = design(cols, &t.predictors, &t.observed_rows);
                let draw = draw_bayes_linreg(&x_obs, &y_obs, rng)?;
                Params::Pmm { draw, x_obs, y_obs, donors }
            }
            Method::LogReg => {
                let draw = draw_bayes_logreg(&design(cols, &t.predictors, &t.observed_rows), &y_obs, rng)?;
                flags.shrunk_logistic += usize::from(draw.shrunk);
                Params::LogReg(draw)
            }
            Method::PolyComb { donors } => {
                let outcome = gather(&cols[t.predictors[0]], &t.observed_rows);
                Params::PolyComb(PolyCombModel::fit(&outcome, &y_obs, donors, rng)?)
            }
            Method::SmcFcsQuadratic => {
                // Both models are fitted to the current completed data.
                let n = self.original.n_rows();
                let obs = self.original.column_at(t.col).observed();
                let x: Vec<S> = (0..n).map(|r| if obs[r] { original[r] } else { cols[t.col][r] }).collect();
                let x2: Vec<S> = x.iter().map(|&v| v * v).collect();
                let all: Vec<usize> = (0..n).collect();
                let substantive = draw_bayes_linreg(&Matrix::design(&[&x, &x2], &all), &cols[t.predictors[0]], rng)?;
                let covariate = draw_bayes_linreg(&Matrix::design(&[], &all), &x, rng)?;
                Params::Smc { substantive, covariate }
            }
        };
        Ok((params, flags))
    }

    /// Draws values of target `t` at `rows` under fixed parameters.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        t: &Target,
        params: &Params<S>,
        cols: &Cols<S>,
        rows: &[usize],
        rng: &mut R,
    ) -> Result<(Vec<S>, EngineFlags)> {
        let mut flags = EngineFlags::default();
        if rows.is_empty() {
            return Ok((Vec::new(), flags));
        }
        let values = match params {
            Params::Norm(draw) => impute_norm(draw, &design(cols, &t.predictors, rows), rng)?,
            Params::Pmm { draw, x_obs, y_obs, donors } => {
                let picks = pmm_donors(draw, x_obs, &design(cols, &t.predictors, rows), *donors, rng)?;
                picks.into_iter().map(|i| y_obs[i]).collect()
            }
            Params::LogReg(draw) => impute_logreg(draw, &design(cols, &t.predictors, rows), rng)?,
            Params::PolyComb(model) => {
                let out = model.draw(&gather(&cols[t.predictors[0]], rows), rng)?;
                flags.vertex_fallbacks += out.vertex_fallbacks;
                out.pairs.into_iter().map(|p| p.0).collect()
            }
            Params::Smc { substantive, covariate } => {
                let means = vec![covariate.beta[0]; rows.len()];
                let y = gather(&cols[t.predictors[0]], rows);
                let out = impute_smcfcs_quadratic(&y, &means, covariate.sigma2, substantive, rng)?;
                flags.cap_fallbacks += out.cap_fallbacks;
                out.pairs.into_iter().map(|p| p.0).collect()
            }
        };
        Ok((values, flags))
    }

    /// Writes `values` at `rows` of target `t` (and its square).
    pub fn write(&self, t: &Target, cols: &mut Cols<S>, rows: &[usize], values: &[S]) {
        for (&r, &v) in rows.iter().zip(values) {
            cols[t.col][r] = v;
            if let Some(sq) = t.square {
                cols[sq][r] = v * v;
            }
        }
    }

    pub fn initial_cols(&self) -> Cols<S> {
        self.original.columns().iter().map(|c| c.values().to_vec()).collect()
    }

    pub fn to_dataset(&self, cols: &Cols<S>) -> Dataset<S> {
        let mut columns: Vec<Column<S>> = self.original.columns().to_vec();
        for t in &self.targets {
            columns[t.col] = columns[t.col].filled(cols[t.col].clone());
            if let Some(sq) = t.square {
                columns[sq] = columns[sq].filled(cols[sq].clone());
            }
        }
        Dataset::new(columns).expect("shape preserved")
    }

    /// `cols` with every originally observed cell of the imputed columns restored.
    pub fn restore_observed(&self, cols: &mut Cols<S>) {
        for t in &self.targets {
            let c = self.original.column_at(t.col);
            for &r in &t.observed_rows {
                cols[t.col][r] = c.values()[r];
            }
            if let Some(sq) = t.square {
                let s = self.original.column_at(sq);
                for r in s.observed_rows() {
                    cols[sq][r] = s.values()[r];
                }
            }
        }
    }

    /// Runs one chain. The returned state keeps the final parameters and the
    /// generator so follow-up draws continue the same stream.
    pub fn run_chain(&self, chain: usize, stream: RngStream) -> Result<ChainOutput<S>> {
        let mut rng = stream.rng();
        let mut cols = self.initial_cols();
        let overwrite = self.mode == PpcMode::Overwrite;
        for t in &self.targets {
            let pool: Vec<S> = gather(self.original.column_at(t.col).values(), &t.observed_rows);
            let mut rows = t.missing_rows.clone();
            if overwrite {
                rows.extend(&t.replicate_rows);
            }
            let init: Vec<S> = rows.iter().map(|_| pool[rng.random_range(0..pool.len())]).collect();
            self.write(t, &mut cols, &rows, &init);
        }
        let mut traces = Vec::with_capacity(self.maxit * self.targets.len());
        let mut flags = EngineFlags::default();
        let mut params = Vec::with_capacity(self.targets.len());
        let mut replicates: Vec<Vec<S>> = vec![Vec::new(); self.targets.len()];
        for iteration in 1..=self.maxit {
            let last = iteration == self.maxit;
            params.clear();
            for (ti, t) in self.targets.iter().enumerate() {
                let wrap = |e: Error| Error::Engine { chain, iteration, column: t.name.clone(), source: Box::new(e) };
                let (theta, f) = self.fit(t, &cols, &mut rng).map_err(wrap)?;
                flags.add(f);
                let (missing, f) = self.draw(t, &theta, &cols, &t.missing_rows, &mut rng).map_err(wrap)?;
                flags.add(f);
                self.write(t, &mut cols, &t.missing_rows, &missing);
                // Retain mode only needs replicates from the final sweep.
                let mut fresh = missing;
                if overwrite || last {
                    let (reps, f) = self.draw(t, &theta, &cols, &t.replicate_rows, &mut rng).map_err(wrap)?;
                    flags.add(f);
                    if overwrite {
                        self.write(t, &mut cols, &t.replicate_rows, &reps);
                    }
                    fresh.extend(&reps);
                    if last {
                        replicates[ti] = reps;
                    }
                }
                let (mean, sd) = mean_sd(&fresh);
                traces.push(TraceRow { chain, iteration, column: ti, mean, sd });
                params.push(theta);
            }
        }
        let mut completed = cols;
        self.restore_observed(&mut completed);
        Ok(ChainOutput { completed, replicates, traces, flags, params, rng })
    }

    /// Redraws every cell of every imputed column under the chain's final
    /// parameters, visiting columns in order and overwriting as it goes.
    pub fn replicate_sweep(&self, base: &Cols<S>, params: &[Params<S>], rng: &mut ChaCha8Rng) -> Result<Cols<S>> {
        let mut cols = base.clone();
        let all: Vec<usize> = (0..self.original.n_rows()).collect();
        for (t, theta) in self.targets.iter().zip(params) {
            let (values, _) = self.draw(t, theta, &cols, &all, rng)?;
            self.write(t, &mut cols, &all, &values);
        }
        Ok(cols)
    }

    /// Redraws only the originally missing cells of `base`.
    pub fn reimpute_missing(&self, base: &Cols<S>, params: &[Params<S>], rng: &mut ChaCha8Rng) -> Result<Cols<S>> {
        let mut cols = base.clone();
        for (t, theta) in self.targets.iter().zip(params) {
            let (values, _) = self.draw(t, theta, &cols, &t.missing_rows, rng)?;
            self.write(t, &mut cols, &t.missing_rows, &values);
        }
        Ok(cols)
    }
}

pub(crate) struct ChainOutput<S> {
    pub completed: Cols<S>,
    /// Final replicate draws per target, aligned with `replicate_rows`.
    pub replicates: Vec<Vec<S>>,
    pub traces: Vec<TraceRow>,
    pub flags: EngineFlags,
    pub params: Vec<Params<S>>,
    pub rng: ChaCha8Rng,
}

fn mean_sd<S: Scalar>(values: &[S]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    let mean = crate::stats::mean(&v);
    let sd = if v.len() > 1 { crate::stats::sample_sd(&v) } else { 0.0 };
    (mean, sd)
}

/// Runs `config.m` independent chains; chain `c` uses stream `child(c)` of
/// the configured seed.
pub fn run_fcs<S: Scalar>(data: &Dataset<S>, config: &EngineConfig) -> Result<MultiplyImputed<S>> {
    let plan = Plan::new(data, config)?;
    let root = RngStream::from_seed(config.seed);
    let chains: Vec<ChainOutput<S>> = (0..config.m)
        .into_par_iter()
        .map(|c| plan.run_chain(c, root.child(c as u64)))
        .collect::<Result<_>>()?;
    let mut replicates = Vec::with_capacity(plan.stores.len());
    for (col, rows, owner, is_square) in &plan.stores {
        let target = &plan.targets[*owner];
        let values = rows
            .iter()
            .map(|r| {
                let pos = target.replicate_rows.binary_search(r).expect("square rows are drawn with the owner");
                chains
                    .iter()
                    .map(|ch| {
                        let v = ch.replicates[*owner][pos];
                        if *is_square { v * v } else { v }
                    })
                    .collect()
            })
            .collect();
        replicates.push(ReplicateSet { column: data.column_at(*col).name().to_string(), rows: rows.clone(), values });
    }
    let mut flags = EngineFlags::default();
    let mut traces = Vec::with_capacity(chains.len() * config.maxit * plan.targets.len());
    let mut completed = Vec::with_capacity(chains.len());
    for ch in chains {
        flags.add(ch.flags);
        traces.extend(ch.traces);
        completed.push(plan.to_dataset(&ch.completed));
    }
    Ok(MultiplyImputed {
        original: data.clone(),
        completed,
        replicates,
        traces,
        flags,
        where_mask: plan.where_mask.clone(),
        maxit: config.maxit,
        imputed_columns: plan.targets.iter().map(|t| t.name.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Column;

    fn small() -> Dataset<f64> {
        let x: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
        let y: Vec<Option<f64>> = x.iter().enumerate().map(|(i, &v)| (i % 4 != 0).then_some(1.0 + v + (i % 3) as f64)).collect();
        Dataset::new(vec![
            Column::continuous("x", x).unwrap(),
            Column::from_options("y", ColumnKind::Continuous, &y).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn parses_the_documented_config() {
        let c = EngineConfig::from_json_str(
            r#"{"m":50,"maxit":10,"seed":1,"ppc_mode":"retain","methods":{"y":{"method":"pmm","donors":5,"predictors":["x","z"]}}}"#,
        )
        .unwrap();
        assert_eq!(c.m, 50);
        assert_eq!(c.ppc_mode, PpcMode::Retain);
        assert_eq!(c.methods["y"].method, Method::Pmm { donors: 5 });
        let back = EngineConfig::from_json_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(EngineConfig::from_json_str(r#"{"methods":{},"bogus":1}"#).is_err());
    }

    #[test]
    fn complete_data_without_where_is_a_no_op() {
        let d = small().with_column(Column::continuous("y", (0..40).map(|i| (i % 5) as f64).collect()).unwrap()).unwrap();
        let cfg = EngineConfig::new(3, 2, 7).with_method("y", ImputerSpec::norm(&["x"]));
        let out = run_fcs(&d, &cfg).unwrap();
        assert!(out.completed.iter().all(|c| *c == d));
        assert!(out.replicates.is_empty());
    }

    #[test]
    fn where_all_observed_is_complement_of_missing() {
        let d = small();
        let w = where_all_observed(&d);
        let miss = WhereMask::missing(&d);
        for c in 0..d.n_cols() {
            for r in 0..d.n_rows() {
                assert_ne!(w.get(r, c), miss.get(r, c));
            }
        }
    }

    #[test]
    fn retain_keeps_observed_and_stores_m_replicates() {
        let d = small();
        let cfg = EngineConfig::new(4, 3, 11).with_method("y", ImputerSpec::pmm(&["x"])).replicate_observed(&d);
        let out = run_fcs(&d, &cfg).unwrap();
        let y = d.column("y").unwrap();
        for c in &out.completed {
            let cy = c.column("y").unwrap();
            assert!(cy.is_complete());
            for r in y.observed_rows() {
                assert_eq!(cy.values()[r], y.values()[r]);
            }
        }
        let reps = out.replicates_for("y").unwrap();
        assert_eq!(reps.rows, y.observed_rows());
        assert!(reps.values.iter().all(|v| v.len() == 4));
        assert_eq!(out.traces.len(), 4 * 3);
    }

    #[test]
    fn validation_errors() {
        let d = small();
        let bad = EngineConfig::new(2, 1, 1).with_method("y", ImputerSpec::norm(&["y"]));
        assert!(run_fcs(&d, &bad).is_err());
        let unknown = EngineConfig::new(2, 1, 1).with_method("y", ImputerSpec::norm(&["nope"]));
        assert!(matches!(run_fcs(&d, &unknown), Err(Error::UnknownColumn(_))));
        let flagged = EngineConfig::new(2, 1, 1).with_where(where_all_observed(&d));
        assert!(run_fcs(&d, &flagged).is_err());
        let logit = EngineConfig::new(2, 1, 1).with_method("y", ImputerSpec::logreg(&["x"]));
        assert!(matches!(run_fcs(&d, &logit), Err(Error::NotBinary(_))));
    }

    #[test]
    fn trace_summary_needs_two_iterations() {
        let d = small();
        let one = run_fcs(&d, &EngineConfig::new(2, 1, 1).with_method("y", ImputerSpec::norm(&["x"]))).unwrap();
        assert!(chain_trace_summary(&one).is_err());
        let two = run_fcs(&d, &EngineConfig::new(2, 2, 1).with_method("y", ImputerSpec::norm(&["x"]))).unwrap();
        let table = chain_trace_summary(&two).unwrap();
        assert_eq!(table.rows.len(), 2 * 2);
        assert!(table.to_csv().starts_with("chain,iteration,column,mean,sd\n"));
    }
}
