use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qbnn::annealer::{AnnealConfig, SweepOrder};
use qbnn::builder::{build, BuildParams, ModelCounts};
use qbnn::dataset::{generate_canonical, Dataset, Image, Sample, SIDE};
use qbnn::evaluator::{EvalReport, TrainedNetwork};
use qbnn::oracle::{verify_equivalence, EquivalenceReport};
use qbnn::topology::Architecture;
use qbnn::trainer::{
    run_experiment_matrix, train_dropout, train_once, tuned_config, AnnealerOverrides, DropoutParams,
    ExperimentSpec,
};
use qbnn::{Error, Result, THREADS_ENV};

#[derive(Parser)]
#[command(name = "qbnn", version, about = "Binary neural network training through QUBO annealing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset utilities.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train one network and print a JSON report.
    Train(TrainArgs),
    /// Run an experiment matrix described by a JSON file.
    Matrix(MatrixArgs),
    /// Brute-force reference checks.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Write the training QUBO in sparse text form.
    ExportQubo(ExportArgs),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate the canonical 44-image dataset.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Check fit existence against zero-energy states on a small instance.
    Verify {
        #[arg(long)]
        arch: Architecture,
        /// Number of images, training images first.
        #[arg(long)]
        batch: usize,
        /// Crop images to their top-left square of this side.
        #[arg(long, default_value_t = 2)]
        input_side: usize,
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset file; generated from `--dataset-seed` when absent.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    dataset_seed: u64,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        match &self.dataset {
            Some(p) => Dataset::load(p),
            None => Ok(generate_canonical(self.dataset_seed)),
        }
    }
}

#[derive(Args, Default)]
struct AnnealArgs {
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    tmin: Option<f64>,
    #[arg(long, value_parser = parse_order)]
    sweep_order: Option<SweepOrder>,
    /// Tune the temperature range with Nelder–Mead before training.
    #[arg(long)]
    tune: bool,
    #[arg(long)]
    tune_budget: Option<usize>,
    #[arg(long)]
    tune_replicas: Option<usize>,
}

fn parse_order(s: &str) -> std::result::Result<SweepOrder, String> {
    match s {
        "randomized" => Ok(SweepOrder::Randomized),
        "sequential" => Ok(SweepOrder::Sequential),
        _ => Err(format!("expected randomized or sequential, got {s:?}")),
    }
}

impl AnnealArgs {
    fn overrides(&self) -> AnnealerOverrides {
        AnnealerOverrides {
            replicas: self.replicas,
            steps: self.steps,
            t_max: self.tmax,
            t_min: self.tmin,
            sweep_order: self.sweep_order,
            tune: self.tune,
            tune_budget: self.tune_budget,
            tune_replicas: self.tune_replicas,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    arch: Architecture,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Enables dropout training with this learning rate.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n_drop: usize,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 5)]
    input_drop: usize,
    /// Also write the trained network as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    anneal: AnnealArgs,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = "runs.csv")]
    runs_out: PathBuf,
    #[arg(long, default_value = "summary.csv")]
    summary_out: PathBuf,
    /// Overrides the master seed of the experiment file.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    anneal: AnnealArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    arch: Architecture,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long)]
    single_precision: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    arch: String,
    seed: u64,
    gamma: f64,
    eta: Option<f64>,
    t_max: f64,
    t_min: f64,
    energy: f64,
    feasible: bool,
    unsat: usize,
    #[serde(flatten)]
    report: &'a EvalReport,
    weights: &'a [i8],
    biases: &'a [i8],
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Argument(format!("{THREADS_ENV} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Argument(e.to_string()))
}

fn crop(img: &Image, side: usize) -> Sample {
    let full = img.to_sample();
    let inputs = (0..side * side).map(|i| full.inputs[(i / side) * SIDE + i % side]).collect();
    Sample { inputs, targets: full.targets }
}

fn train(a: &TrainArgs) -> Result<()> {
    let ds = a.data.load()?;
    let t = a.arch.build(SIDE)?;
    let ov = a.anneal.overrides();
    let base = ov.config(a.seed)?;
    let cfg: AnnealConfig = if ov.tune {
        let pilots = ov.tune_replicas.unwrap_or(base.n_replicas);
        tuned_config(&t, &ds, a.gamma, &base, pilots, ov.budget())?
    } else {
        base
    };
    eprintln!(
        "arch={} replicas={} steps={} t_max={} t_min={} seed={}",
        a.arch, cfg.n_replicas, cfg.schedule.n_steps, cfg.schedule.t_max, cfg.schedule.t_min, cfg.seed
    );
    let outcome = match a.eta {
        Some(eta) => {
            let dp = DropoutParams {
                eta,
                beta: a.beta,
                iterations: a.iterations,
                input_drop_count: a.input_drop,
                hidden_drop_count: a.n_drop,
                seed: a.seed,
            };
            train_dropout(&t, &ds, &dp, &cfg)?
        }
        None => train_once(&t, &ds, a.gamma, &cfg)?,
    };
    if let Some(p) = &a.out {
        std::fs::write(p, serde_json::to_string_pretty(&outcome.net)?)?;
    }
    let net: &TrainedNetwork = &outcome.net;
    let r = TrainReport {
        arch: a.arch.to_string(),
        seed: a.seed,
        gamma: a.gamma,
        eta: a.eta,
        t_max: cfg.schedule.t_max,
        t_min: cfg.schedule.t_min,
        energy: outcome.energy,
        feasible: outcome.feasible(),
        unsat: outcome.audit.unsat(),
        report: &outcome.report,
        weights: &net.weights,
        biases: &net.biases,
    };
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}

fn matrix(a: &MatrixArgs) -> Result<()> {
    let mut spec = ExperimentSpec::from_json(&std::fs::read_to_string(&a.spec)?)?;
    spec.annealer = spec.annealer.merged(&a.anneal.overrides());
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let res = run_experiment_matrix(&spec)?;
    res.write_csv(&a.runs_out, &a.summary_out)?;
    eprintln!("{} runs in {} cells", res.rows.len(), res.summaries.len());
    Ok(())
}

fn oracle_verify(arch: Architecture, batch: usize, side: usize, data: &DataArgs) -> Result<bool> {
    if side == 0 || side > SIDE {
        return Err(Error::Argument(format!("input side must lie in 1..={SIDE}")));
    }
    let ds = data.load()?;
    let images: Vec<&Image> = ds.train.iter().chain(ds.test.iter()).collect();
    if batch > images.len() {
        return Err(Error::Argument(format!("batch exceeds the {} available images", images.len())));
    }
    let samples: Vec<Sample> = images[..batch].iter().map(|img| crop(img, side)).collect();
    let t = arch.build(side)?;
    let report: EquivalenceReport = verify_equivalence(&t, &samples)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.holds)
}

#[derive(Serialize)]
struct ExportHeader {
    arch: String,
    gamma: f64,
    #[serde(flatten)]
    counts: ModelCounts,
}

fn export(a: &ExportArgs) -> Result<()> {
    let ds = a.data.load()?;
    let t = a.arch.build(SIDE)?;
    let params = BuildParams { gamma: a.gamma, single_precision: a.single_precision, ..Default::default() };
    let (q, vm) = build(&t, &ds.train_samples(), &params)?;
    let c = vm.counts();
    let header = ExportHeader { arch: a.arch.to_string(), gamma: a.gamma, counts: c };
    q.save(&a.out, &[serde_json::to_string(&header)?])?;
    eprintln!(
        "{}: {} variables ({} binary, {} integer, {} constraints)",
        a.arch,
        q.num_vars(),
        c.binary,
        c.integer,
        c.constraints
    );
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Dataset(DatasetCmd::Gen { seed, out }) => generate_canonical(seed).save(out).map(|_| true),
        Command::Train(a) => train(&a).map(|_| true),
        Command::Matrix(a) => matrix(&a).map(|_| true),
        Command::Oracle(OracleCmd::Verify { arch, batch, input_side, data }) => {
            oracle_verify(arch, batch, input_side, &data)
        }
        Command::ExportQubo(a) => export(&a).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: equivalence check failed");
            ExitCode::from(2)
        }
        Err(Error::Argument(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
