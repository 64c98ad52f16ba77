use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use heredity_svm::bench::{run_benchmark, BenchmarkConfig, Method};
use heredity_svm::sim::{generate_example, Example, LogisticModelSpec};

use crate::data::{CsvDataset, Schema, LABEL_COLUMN};
use crate::error::{CliError, CliResult};
use crate::model::{parse_grid, train, ModelArtifact, TrainOptions, Tuning, TuningChoice};

#[derive(Debug, Parser)]
#[command(name = "hsvm", version, about = "SVM classifiers with sparsity and heredity constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a CSV file and save it as JSON.
    Train(TrainArgs),
    /// Print one label per row for a CSV file.
    Predict(PredictArgs),
    /// Run a simulation benchmark from a JSON config.
    Benchmark(BenchmarkArgs),
    /// Write samples of a simulation example as CSV.
    Generate(GenerateArgs),
}

/// A parsed `--grid` value.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid_arg(spec: &str) -> Result<Grid, String> {
    parse_grid(spec).map(Grid)
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("tuning").required(true).args(["lambda", "big_m", "cv"])))]
pub struct TrainArgs {
    /// CSV with a header row and a `y` label column.
    pub data: PathBuf,
    /// l2, l1, garrote, shsvm, whsvm, np-shsvm or np-whsvm.
    #[arg(long)]
    pub method: Method,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Budget `Σθ ≤ M` for garrote-type methods.
    #[arg(long = "big-m")]
    pub big_m: Option<f64>,
    /// Choose the tuning value by k-fold CV.
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
    /// CV grid: `log:LO:HI:COUNT`, `lin:LO:HI:COUNT` or `v1,v2,...`.
    #[arg(long, requires = "cv", value_parser = parse_grid_arg)]
    pub grid: Option<Grid>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Where to write the model artifact.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON schema declaring categorical columns.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// λ of the initial ridge fit (default: 5-fold CV).
    #[arg(long)]
    pub initial_lambda: Option<f64>,
    /// Leave out squared terms.
    #[arg(long)]
    pub no_quadratic: bool,
    /// Spline functions per variable for np-* methods.
    #[arg(long, default_value_t = 5)]
    pub basis_functions: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    /// CSV with the training columns in the same order; `y` is optional.
    pub data: PathBuf,
    /// Write labels here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for `<config>.json` and `<config>.csv` (default: current).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Simulation example, 1 to 5.
    #[arg(long)]
    pub example: u8,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Generate(a) => cmd_generate(&a),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &str) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write output: {e}"))),
    }
}

pub fn train_options(a: &TrainArgs) -> CliResult<TrainOptions> {
    let tuning = match (a.lambda, a.big_m, a.cv) {
        (Some(l), None, None) => TuningChoice::Fixed(Tuning::Lambda(l)),
        (None, Some(m), None) => TuningChoice::Fixed(Tuning::BigM(m)),
        (None, None, Some(k)) => TuningChoice::Cv {
            folds: k,
            grid: a.grid.clone().map(|g| g.0),
        },
        _ => return Err(CliError::Usage("give exactly one of --lambda, --big-m, --cv".into())),
    };
    Ok(TrainOptions {
        method: a.method,
        tuning,
        seed: a.seed,
        initial_lambda: a.initial_lambda,
        quadratic: !a.no_quadratic,
        basis_functions: a.basis_functions,
    })
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let opts = train_options(a)?;
    let data = CsvDataset::load(&a.data)?;
    let schema = match &a.schema {
        Some(p) => Schema::load(p)?,
        None => Schema::default(),
    };
    let variables = schema.variables(&data.names)?;
    let artifact = train(&data, &variables, &opts)?;
    write_file(&a.out, &artifact.to_json())?;
    let tuning = match artifact.tuning {
        Tuning::Lambda(l) => format!("lambda = {l}"),
        Tuning::BigM(m) => format!("M = {m}"),
    };
    println!("method: {}", artifact.method.as_str());
    println!("tuning: {tuning}{}", if artifact.cv.is_some() { " (cross-validated)" } else { "" });
    if let Some(crate::model::InitialEstimator::Parametric { lambda, .. }) = &artifact.initial {
        println!("initial lambda: {lambda}");
    }
    if let Some(crate::model::InitialEstimator::Nonparametric(ni)) = &artifact.initial {
        println!("initial lambda: {}", ni.lambda);
    }
    println!("training hinge: {}", artifact.training_hinge);
    println!("active effects ({}): {}", artifact.active_effects.len(), artifact.active_effects.join(", "));
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.model)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", a.model.display())))?;
    let artifact = ModelArtifact::from_json(&text)?;
    let data = CsvDataset::load(&a.data)?;
    let labels = artifact.predict(&data)?;
    if let Some(y) = &data.labels {
        let wrong = labels.iter().zip(y).filter(|(p, t)| p != t).count();
        eprintln!("error rate against `{LABEL_COLUMN}`: {}", wrong as f64 / y.len() as f64);
    }
    let mut out = String::with_capacity(3 * labels.len());
    for l in labels {
        out.push_str(if l > 0.0 { "1\n" } else { "-1\n" });
    }
    emit(a.out.as_deref(), &out)
}

fn cmd_benchmark(a: &BenchmarkArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", a.config.display())))?;
    let mut config: BenchmarkConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", a.config.display())))?;
    if let Some(r) = a.replications {
        config.replications = r;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let report = run_benchmark(&config)?;
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let stem = a.config.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let csv = report.to_csv();
    write_file(&dir.join(format!("{stem}.json")), &report.to_json())?;
    write_file(&dir.join(format!("{stem}.csv")), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let example = Example::try_from(a.example).map_err(CliError::Usage)?;
    let spec = LogisticModelSpec::new(example, a.rho)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let d = generate_example(&spec, a.n, a.seed);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=d.p()).map(|j| format!("z{j}")).collect();
    header.push(LABEL_COLUMN.to_string());
    let io = |e: csv::Error| CliError::Data(format!("cannot write CSV: {e}"));
    w.write_record(&header).map_err(io)?;
    for i in 0..d.n() {
        let mut row: Vec<String> = (0..d.p()).map(|j| format!("{}", d.x()[(i, j)])).collect();
        row.push(if d.y()[i] > 0.0 { "1".into() } else { "-1".into() });
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(format!("cannot write CSV: {e}")))?;
    emit(a.out.as_deref(), &String::from_utf8(bytes).expect("CSV is UTF-8"))
}
