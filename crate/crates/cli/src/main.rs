use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mippc::amputation::{ampute, AmputePattern, AmputeSpec, Mechanism};
use mippc::data::{load_csv, write_csv, Schema};
use mippc::engine::chain_trace_summary;
use mippc::harness::{
    load_strategies, pooled_coefficient_study, run_scenario, run_strategy_comparison, write_strategy_table,
    PoolingStudySpec, ScenarioKind, ScenarioSpec,
};
use mippc::imputers::Method;
use mippc::plot_emit::{emit_density_data, emit_deviance_plot, emit_distribution_plot, emit_scatter_data};
use mippc::ppc::deviance_summary;
use mippc::{ColumnKind, DatasetF64, EngineConfig, Error, Result, RngStream};

#[derive(Parser)]
#[command(name = "mippc", version, about = "Multiple imputation with posterior predictive checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Make columns missing under MCAR or right-tailed MAR.
    Ampute(AmputeArgs),
    /// Run a simulation scenario over its factor grid and write the table.
    Simulate(SimulateArgs),
    /// Compare imputation strategies on one dataset.
    Compare(CompareArgs),
    /// Impute with one model, replicate the observed cells and write the
    /// diagnostics and plot data.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV; empty fields and NA are missing.
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated binary (0/1) columns.
    #[arg(long, value_delimiter = ',')]
    binary: Vec<String>,
}

impl InputArgs {
    fn load(&self, extra_binary: &[String]) -> Result<DatasetF64> {
        let schema: Schema = self
            .binary
            .iter()
            .chain(extra_binary)
            .map(|c| (c.clone(), ColumnKind::Binary))
            .collect::<HashMap<_, _>>();
        load_csv(&self.input, &schema)
    }
}

#[derive(Args)]
struct AmputeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    /// Columns made jointly missing.
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<String>,
    /// Score weights as name=weight pairs, e.g. x=1,z=0.5.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<String>,
    #[arg(long, default_value = "mcar")]
    mech: Mechanism,
    /// Missing proportion as a fraction or percentage.
    #[arg(long)]
    prop: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// 1: quadratic outcome, 2: quadratic covariate, 3: logistic outcome.
    #[arg(long)]
    scenario: ScenarioKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, value_delimiter = ',', default_value = "30,50,80")]
    props: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "mcar,marr")]
    mech: Vec<Mechanism>,
    #[arg(long, value_delimiter = ',', default_value = "75,95")]
    levels: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Overrides the per-model iteration count.
    #[arg(long)]
    maxit: Option<usize>,
    /// Also run the pooled-coefficient coverage study with this many
    /// repetitions (scenario 2 only) and write table4.csv.
    #[arg(long, default_value_t = 0)]
    pooling_reps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    /// JSON list of {"name", "methods", "maxit"?} objects.
    #[arg(long)]
    strategies: PathBuf,
    #[arg(long, default_value_t = 95.0)]
    level: f64,
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Engine configuration JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 95.0)]
    level: f64,
    /// Scatter plot pairs as x:y.
    #[arg(long, value_delimiter = ',')]
    scatter: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Accepts 0.3 or 30.
fn fraction(v: f64) -> f64 {
    if v > 1.0 {
        v / 100.0
    } else {
        v
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Context { context: format!("creating {}", dir.display()), source: Box::new(io_err(e)) })
}

fn io_err(e: io::Error) -> Error {
    Error::InvalidArgument(e.to_string())
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Context { context: format!("creating {}", path.display()), source: Box::new(io_err(e)) })
}

fn cmd_ampute(a: AmputeArgs) -> Result<()> {
    let data = a.input.load(&[])?;
    let weights = a
        .weights
        .iter()
        .map(|w| {
            let (name, value) = w
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("weight `{w}` is not name=value")))?;
            let value: f64 =
                value.parse().map_err(|_| Error::InvalidArgument(format!("weight `{w}` has a non-numeric value")))?;
            Ok((name.to_string(), value))
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = AmputeSpec {
        pattern: AmputePattern::new(a.targets, weights),
        mechanism: a.mech,
        proportion: fraction(a.prop),
    };
    let out = ampute(&data, &spec, RngStream::from_seed(a.seed))?;
    write_csv(&out, &a.out)?;
    let missing = out.column(&spec.pattern.targets[0])?.n_missing();
    eprintln!("{missing} of {} rows amputed", out.n_rows());
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let spec = ScenarioSpec {
        scenario: a.scenario,
        n: a.n,
        proportions: a.props.iter().copied().map(fraction).collect(),
        mechanisms: a.mech,
        levels: a.levels.iter().copied().map(fraction).collect(),
        m: a.m,
        seed: a.seed,
        repetitions: 1,
        maxit: a.maxit,
    };
    let run = run_scenario::<f64>(&spec)?;
    let path = run.write_table(&a.out)?;
    println!("{}", path.display());
    if a.pooling_reps > 0 {
        if a.scenario != ScenarioKind::QuadCovariate {
            return Err(Error::InvalidArgument("the pooling study belongs to scenario 2".into()));
        }
        let study = pooled_coefficient_study::<f64>(&PoolingStudySpec {
            n: a.n,
            m: a.m,
            repetitions: a.pooling_reps,
            ..PoolingStudySpec::standard(a.seed)
        })?;
        let path = a.out.join("table4.csv");
        study.write_csv(create_file(&path)?)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let strategies = load_strategies(&a.strategies)?;
    let binary: Vec<String> = strategies
        .iter()
        .flat_map(|s| s.methods.iter())
        .filter(|(_, spec)| spec.method == Method::LogReg)
        .map(|(col, _)| col.clone())
        .collect();
    let data = a.input.load(&binary)?;
    let rows = run_strategy_comparison(&data, &strategies, fraction(a.level), a.m, a.seed)?;
    match a.out {
        Some(path) => write_strategy_table(&rows, create_file(&path)?),
        None => write_strategy_table(&rows, io::stdout().lock()),
    }
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<()> {
    let config = EngineConfig::from_path(&a.config)?;
    let binary: Vec<String> =
        config.methods.iter().filter(|(_, s)| s.method == Method::LogReg).map(|(c, _)| c.clone()).collect();
    let data = a.input.load(&binary)?;
    let config = config.replicate_observed(&data);
    let result = mippc::run_fcs(&data, &config)?;
    let report = mippc::cell_diagnostics(&result, fraction(a.level))?;
    create_dir(&a.out)?;
    report.write_files(&a.out, "report")?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if result.maxit >= 2 {
        let trace = chain_trace_summary(&result)?;
        std::fs::write(a.out.join("trace.csv"), trace.to_csv()).map_err(io_err)?;
    }
    for v in &report.variables {
        emit_distribution_plot(&report, &v.column, a.out.join(format!("distribution_{}.csv", v.column)))?;
        match data.column(&v.column)?.kind() {
            ColumnKind::Continuous => {
                emit_density_data(&result, &v.column, a.out.join(format!("density_{}.csv", v.column)))?;
            }
            ColumnKind::Binary => {
                let dev = deviance_summary(&result, &v.column)?;
                emit_deviance_plot(&dev, a.out.join(format!("deviance_{}.csv", v.column)))?;
            }
        }
    }
    for pair in &a.scatter {
        let (x, y) = pair
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("scatter pair `{pair}` is not x:y")))?;
        emit_scatter_data(&result, x, y, a.out.join(format!("scatter_{x}_{y}.csv")))?;
    }
    println!("{}", report.to_json()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ampute(a) => cmd_ampute(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
