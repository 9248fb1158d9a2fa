//! Simulation studies: scenario generators, the factor-grid runner that
//! produces the coverage/distance/width tables, a strategy comparison for
//! user data, and Rubin pooling.

mod generate;
mod pooling;
mod strategies;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use generate::{gen_scenario1, gen_scenario2, gen_scenario3};
pub use pooling::{pool_rubin, pooled_coefficient_study, CoefficientSummary, PoolingStudy, PoolingStudySpec, RubinPooled};
pub use strategies::{load_strategies, run_strategy_comparison, write_strategy_table, Strategy, StrategyRow};

use crate::amputation::{ampute, AmputePattern, AmputeSpec, Mechanism};
use crate::data::{Dataset, RngStream};
use crate::engine::{run_fcs, EngineConfig, MultiplyImputed};
use crate::error::{Error, Result};
use crate::imputers::{ImputerSpec, Method};
use crate::ppc::{cell_diagnostics, PpcReport};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    /// Quadratic outcome, incomplete outcome.
    QuadOutcome,
    /// Quadratic outcome, incomplete covariate and its square.
    QuadCovariate,
    /// Binary outcome from a logistic model.
    LogisticOutcome,
}

impl ScenarioKind {
    pub fn number(self) -> u8 {
        match self {
            ScenarioKind::QuadOutcome => 1,
            ScenarioKind::QuadCovariate => 2,
            ScenarioKind::LogisticOutcome => 3,
        }
    }

    pub fn table_file(self) -> &'static str {
        match self {
            ScenarioKind::QuadOutcome => "table1.csv",
            ScenarioKind::QuadCovariate => "table2_3.csv",
            ScenarioKind::LogisticOutcome => "table5.csv",
        }
    }

    /// Column whose observed cells are scored.
    pub fn scored_column(self) -> &'static str {
        match self {
            ScenarioKind::QuadCovariate => "x",
            _ => "y",
        }
    }

    pub fn generate<S: Scalar, R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Dataset<S> {
        match self {
            ScenarioKind::QuadOutcome => gen_scenario1(n, rng),
            ScenarioKind::QuadCovariate => gen_scenario2(n, rng),
            ScenarioKind::LogisticOutcome => gen_scenario3(n, rng),
        }
    }

    pub fn pattern(self) -> AmputePattern {
        match self {
            ScenarioKind::QuadOutcome => AmputePattern::new(["y"], [("x", 1.0)]),
            ScenarioKind::QuadCovariate => AmputePattern::new(["x", "x2"], [("y", 1.0)]),
            ScenarioKind::LogisticOutcome => AmputePattern::new(["y"], [("x", 1.0), ("z", 1.0)]),
        }
    }

    /// Candidate imputation models, in table order.
    pub fn models(self) -> Vec<CandidateModel> {
        let model = |name: &str, column: &str, spec: ImputerSpec, maxit: usize| CandidateModel {
            name: name.to_string(),
            column: column.to_string(),
            spec,
            maxit,
        };
        match self {
            ScenarioKind::QuadOutcome => vec![
                model("linear", "y", ImputerSpec::norm(&["x"]), 1),
                model("quadratic", "y", ImputerSpec::norm(&["x", "x2"]), 1),
            ],
            ScenarioKind::QuadCovariate => vec![
                model("PMM", "x", ImputerSpec::pmm(&["y"]).with_square("x2"), 1),
                model("PC", "x", ImputerSpec::new(Method::PolyComb { donors: 5 }, &["y"]).with_square("x2"), 1),
                model("SMC-FCS", "x", ImputerSpec::new(Method::SmcFcsQuadratic, &["y"]).with_square("x2"), 10),
            ],
            ScenarioKind::LogisticOutcome => vec![
                model("with x", "y", ImputerSpec::logreg(&["x", "z"]), 1),
                model("without x", "y", ImputerSpec::logreg(&["z"]), 1),
            ],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "quad-outcome" => Ok(ScenarioKind::QuadOutcome),
            "2" | "quad-covariate" => Ok(ScenarioKind::QuadCovariate),
            "3" | "logistic-outcome" => Ok(ScenarioKind::LogisticOutcome),
            other => Err(Error::InvalidArgument(format!("unknown scenario `{other}`"))),
        }
    }
}

/// One imputation model for the single incomplete block of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    pub name: String,
    pub column: String,
    pub spec: ImputerSpec,
    pub maxit: usize,
}

impl CandidateModel {
    /// Engine configuration replicating every observed cell of the block.
    pub fn config<S: Scalar>(&self, data: &Dataset<S>, m: usize, seed: u64) -> EngineConfig {
        EngineConfig::new(m, self.maxit, seed).with_method(&self.column, self.spec.clone()).replicate_observed(data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub proportions: Vec<f64>,
    pub mechanisms: Vec<Mechanism>,
    pub levels: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    /// Independent datasets per factor cell. The tables use one.
    pub repetitions: usize,
    /// Overrides every model's iteration count when set.
    pub maxit: Option<usize>,
}

impl ScenarioSpec {
    /// Full factor grid: n = 1000, m = 50, 30/50/80% under MCAR and MARr,
    /// levels 75% and 95%.
    pub fn full(scenario: ScenarioKind, seed: u64) -> Self {
        Self {
            scenario,
            n: 1000,
            proportions: vec![0.3, 0.5, 0.8],
            mechanisms: vec![Mechanism::Mcar, Mechanism::MarRight],
            levels: vec![0.75, 0.95],
            m: 50,
            seed,
            repetitions: 1,
            maxit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 50 {
            return bad(format!("n = {} is below the minimum of 50", self.n));
        }
        if self.m < 2 {
            return bad(format!("m = {} must be at least 2", self.m));
        }
        if self.repetitions == 0 {
            return bad("need at least one repetition".into());
        }
        if self.proportions.is_empty() || self.mechanisms.is_empty() || self.levels.is_empty() {
            return bad("proportions, mechanisms and levels must be non-empty".into());
        }
        if let Some(p) = self.proportions.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return bad(format!("proportion {p} outside (0, 1)"));
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return bad(format!("level {l} outside (0, 1)"));
        }
        if self.maxit == Some(0) {
            return bad("maxit must be positive".into());
        }
        Ok(())
    }

    /// Factor cells in canonical order: mechanism, then proportion.
    fn cells(&self) -> Vec<(Mechanism, f64, usize)> {
        let mut mechs = self.mechanisms.clone();
        mechs.sort();
        mechs.dedup();
        let mut props = self.proportions.clone();
        props.sort_by(f64::total_cmp);
        props.dedup();
        let mut out = Vec::new();
        for &mech in &mechs {
            for &p in &props {
                for rep in 0..self.repetitions {
                    out.push((mech, p, rep));
                }
            }
        }
        out
    }

    fn sorted_levels(&self) -> Vec<f64> {
        let mut l = self.levels.clone();
        l.sort_by(f64::total_cmp);
        l.dedup();
        l
    }
}

/// Stream for one factor cell, keyed by the cell's identity so that subsets
/// of the grid reproduce the matching rows of the full grid.
fn cell_stream(root: RngStream, mech: Mechanism, proportion: f64, rep: usize) -> RngStream {
    let mech_key = match mech {
        Mechanism::Mcar => 0,
        Mechanism::MarRight => 1,
    };
    root.child(mech_key).child((proportion * 1000.0).round() as u64).child(rep as u64)
}

/// One line of a scenario table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub scenario: u8,
    pub mechanism: String,
    pub proportion: f64,
    pub repetition: usize,
    pub model: String,
    pub level: f64,
    pub cov: f64,
    pub distance: f64,
    pub ciw: f64,
    pub deviance: Option<f64>,
}

/// Everything produced for one model in one factor cell.
#[derive(Debug, Clone)]
pub struct CellRun<S> {
    pub mechanism: Mechanism,
    pub proportion: f64,
    pub repetition: usize,
    pub model: String,
    pub amputed: Dataset<S>,
    pub result: MultiplyImputed<S>,
    /// One report per level, ascending.
    pub reports: Vec<PpcReport>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun<S> {
    pub spec: ScenarioSpec,
    pub rows: Vec<TableRow>,
    pub cells: Vec<CellRun<S>>,
}

impl<S: Scalar> ScenarioRun<S> {
    pub fn cell(&self, mech: Mechanism, proportion: f64, model: &str) -> Option<&CellRun<S>> {
        self.cells
            .iter()
            .find(|c| c.mechanism == mech && (c.proportion - proportion).abs() < 1e-9 && c.model == model)
    }

    pub fn row(&self, mech: Mechanism, proportion: f64, model: &str, level: f64) -> Option<&TableRow> {
        self.rows.iter().find(|r| {
            r.mechanism == mech.label()
                && (r.proportion - proportion).abs() < 1e-9
                && r.model == model
                && (r.level - level).abs() < 1e-9
        })
    }

    pub fn write_table(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(self.spec.scenario.table_file());
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_table_to(&self.rows, file)?;
        Ok(path)
    }
}

pub fn write_table_to<W: std::io::Write>(rows: &[TableRow], writer: W) -> Result<()> {
    let with_deviance = rows.iter().any(|r| r.deviance.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["scenario", "mechanism", "proportion", "repetition", "model", "level", "cov", "distance", "ciw"];
    if with_deviance {
        header.push("deviance");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.scenario.to_string(),
            r.mechanism.clone(),
            r.proportion.to_string(),
            r.repetition.to_string(),
            r.model.clone(),
            r.level.to_string(),
            r.cov.to_string(),
            r.distance.to_string(),
            r.ciw.to_string(),
        ];
        if with_deviance {
            rec.push(r.deviance.map_or_else(String::new, |d| d.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}

/// Generates, amputes and imputes every factor cell, scoring each candidate
/// model's replicates of the observed cells.
pub fn run_scenario<S: Scalar>(spec: &ScenarioSpec) -> Result<ScenarioRun<S>> {
    spec.validate()?;
    let kind = spec.scenario;
    let models = kind.models();
    let levels = spec.sorted_levels();
    let root = RngStream::from_seed(spec.seed);
    let cells: Vec<Vec<CellRun<S>>> = spec
        .cells()
        .into_par_iter()
        .map(|(mech, p, rep)| {
            let ctx = format!("scenario {kind}, {} {:.0}%, repetition {rep}", mech.label(), p * 100.0);
            let stream = cell_stream(root, mech, p, rep);
            let complete: Dataset<S> = kind.generate(spec.n, &mut stream.child(0).rng());
            let aspec = AmputeSpec { pattern: kind.pattern(), mechanism: mech, proportion: p };
            let amputed = ampute(&complete, &aspec, stream.child(1)).map_err(|e| e.context(ctx.clone()))?;
            models
                .par_iter()
                .enumerate()
                .map(|(k, model)| {
                    let seed = stream.child(2 + k as u64).rng().random::<u64>();
                    let mut candidate = model.clone();
                    if let Some(maxit) = spec.maxit {
                        candidate.maxit = maxit;
                    }
                    let config = candidate.config(&amputed, spec.m, seed);
                    let ctx = format!("{ctx}, model {}", model.name);
                    let result = run_fcs(&amputed, &config).map_err(|e| e.context(ctx.clone()))?;
                    let reports = levels
                        .iter()
                        .map(|&l| cell_diagnostics(&result, l))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| e.context(ctx.clone()))?;
                    Ok(CellRun {
                        mechanism: mech,
                        proportion: p,
                        repetition: rep,
                        model: model.name.clone(),
                        amputed: amputed.clone(),
                        result,
                        reports,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let cells: Vec<CellRun<S>> = cells.into_iter().flatten().collect();
    let mut rows = Vec::new();
    for cell in &cells {
        for report in &cell.reports {
            let v = report.variable(kind.scored_column())?;
            rows.push(TableRow {
                scenario: kind.number(),
                mechanism: cell.mechanism.label().to_string(),
                proportion: cell.proportion,
                repetition: cell.repetition,
                model: cell.model.clone(),
                level: report.level,
                cov: v.cov,
                distance: v.distance,
                ciw: v.ciw,
                deviance: v.deviance,
            });
        }
    }
    Ok(ScenarioRun { spec: spec.clone(), rows, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ScenarioKind) -> ScenarioSpec {
        ScenarioSpec {
            n: 200,
            m: 5,
            proportions: vec![0.3],
            mechanisms: vec![Mechanism::MarRight],
            levels: vec![0.95, 0.75],
            ..ScenarioSpec::full(kind, 7)
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = small(ScenarioKind::QuadOutcome);
        assert!(s.validate().is_ok());
        s.n = 49;
        assert!(s.validate().is_err());
        let mut s = small(ScenarioKind::QuadOutcome);
        s.m = 1;
        assert!(s.validate().is_err());
        let mut s = small(ScenarioKind::QuadOutcome);
        s.proportions = vec![1.0];
        assert!(s.validate().is_err());
    }

    #[test]
    fn scenario_parse() {
        assert_eq!("2".parse::<ScenarioKind>().unwrap(), ScenarioKind::QuadCovariate);
        assert!("4".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn rows_are_in_canonical_order() {
        let run = run_scenario::<f64>(&small(ScenarioKind::QuadOutcome)).unwrap();
        let keys: Vec<(String, f64)> = run.rows.iter().map(|r| (r.model.clone(), r.level)).collect();
        assert_eq!(
            keys,
            [("linear".into(), 0.75), ("linear".into(), 0.95), ("quadratic".into(), 0.75), ("quadratic".into(), 0.95)]
        );
    }

    #[test]
    fn deviance_only_for_binary_scenario() {
        let run = run_scenario::<f64>(&small(ScenarioKind::LogisticOutcome)).unwrap();
        assert!(run.rows.iter().all(|r| r.deviance.is_some()));
        let mut buf = Vec::new();
        write_table_to(&run.rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with(
            "scenario,mechanism,proportion,repetition,model,level,cov,distance,ciw,deviance\n"
        ));
    }
}
