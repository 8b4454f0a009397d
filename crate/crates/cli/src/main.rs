use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cusp_mdn::datagen::{self, GenConfig, ModelKind, RegressionCoeffs};
use cusp_mdn::eval::{self, EvalReport};
use cusp_mdn::experiments;
use cusp_mdn::io::{self, DatasetMeta, GridAxis, SurfaceGrid};
use cusp_mdn::mdn::{self, Activation, NetworkConfig, Optimizer, TrainConfig};
use cusp_mdn::rng;

#[derive(Parser)]
#[command(name = "cuspmdn", version, about = "Cusp catastrophe data generation and mixture density network fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV plus .meta.json sidecar)
    Generate(GenerateArgs),
    /// Split a dataset, train an MDN on one half, report Delay-MSE on both
    Train(TrainArgs),
    /// Score a saved model on a dataset
    Evaluate(EvaluateArgs),
    /// Write per-row mixture parameters for a dataset
    Predict(PredictArgs),
    /// Write mixture parameters over a grid of two features
    ExportSurface(SurfaceArgs),
    /// Run a pinned experiment and compare with published MSEs
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenModel {
    Regcusp,
    Bimodal,
    Sde,
    Oliva,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: GenModel,
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Comma-separated a0,a1,..,ap (not used for oliva)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs_a: Vec<f64>,
    /// Comma-separated b0,b1,..,bp (not used for oliva)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs_b: Vec<f64>,
    /// Noise standard deviation (regcusp, bimodal)
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Standard deviation of the normal features
    #[arg(long, default_value_t = 2.0)]
    feature_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Omit the creation time from the metadata sidecar
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct NetArgs {
    /// Mixture components
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Comma-separated hidden layer widths
    #[arg(long, value_delimiter = ',', default_value = "32,32,32")]
    hidden: Vec<usize>,
    #[arg(long, value_enum, default_value = "relu")]
    activation: ActivationArg,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    sd_floor: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Relu,
    Tanh,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Rmsprop,
    Adam,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of rows used for training
    #[arg(long, default_value_t = 0.5)]
    split: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    net: NetArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write the full report (with per-row table) as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SurfaceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// 1-based indices of the two features on the grid
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "1,2")]
    features: Vec<usize>,
    /// First axis as min,max,count
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-5,5,41")]
    grid1: Vec<f64>,
    /// Second axis as min,max,count
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-5,5,41")]
    grid2: Vec<f64>,
    /// Values for every feature (comma-separated); the two grid features
    /// are overwritten. Defaults to zeros.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    fix: Vec<f64>,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_parser = experiments::SELECTORS)]
    table: String,
    #[arg(long, default_value_t = experiments::DEFAULT_SEED)]
    seed: u64,
    /// Also write the verdicts as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
        Command::ExportSurface(a) => export_surface(a),
        Command::Reproduce(a) => reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their source in the message
            let mut msg = String::new();
            for cause in e.chain() {
                let text = cause.to_string();
                if !msg.ends_with(&text) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&text);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Exits with clap's usage-error status.
fn usage_error(subcommand: &str, message: &str) -> ! {
    let mut cmd = Cli::command();
    cmd.build();
    cmd.find_subcommand_mut(subcommand)
        .expect("known subcommand")
        .clone()
        .error(clap::error::ErrorKind::MissingRequiredArgument, message)
        .exit()
}

/// `m.model` -> `m.model.run.json`
fn run_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let (data, generator, config) = match a.model {
        GenModel::Oliva => {
            let d = datagen::gen_oliva(a.n, a.seed)?;
            (d, "oliva", serde_json::json!({ "n": a.n, "seed": a.seed }))
        }
        m => {
            if a.coeffs_a.is_empty() || a.coeffs_b.is_empty() {
                usage_error("generate", "--coeffs-a and --coeffs-b are required for this model");
            }
            let kind = match m {
                GenModel::Regcusp => ModelKind::RegCusp,
                GenModel::Bimodal => ModelKind::BimodalRegCusp,
                _ => ModelKind::SdeCusp,
            };
            let coeffs = RegressionCoeffs::new(a.coeffs_a.clone(), a.coeffs_b.clone())?;
            let mut cfg = GenConfig::new(kind, a.n, coeffs, a.sigma, a.seed);
            cfg.feature_sd = a.feature_sd;
            let d = datagen::generate(&cfg)?;
            (d, kind.name(), serde_json::to_value(&cfg)?)
        }
    };
    io::write_dataset(&data, &a.out)?;
    let meta = DatasetMeta {
        generator: generator.to_string(),
        seed: a.seed,
        rng: rng::RNG_ALGORITHM.to_string(),
        config,
        n_rows: data.len(),
        cusp_fraction: data.cusp_fraction(),
        created_unix: (!a.no_timestamp).then(io::now_unix),
    };
    io::write_json(&meta, &io::meta_path(&a.out))?;
    println!("rows: {}", data.len());
    println!("cusp-region fraction: {:.4}", data.cusp_fraction().unwrap_or(0.0));
    Ok(())
}

fn configs(net: &NetArgs, input_dim: usize, seed: u64) -> (NetworkConfig, TrainConfig) {
    let mut nc = NetworkConfig::new(input_dim, net.k);
    nc.hidden_sizes = net.hidden.clone();
    nc.activation = match net.activation {
        ActivationArg::Relu => Activation::Relu,
        ActivationArg::Tanh => Activation::Tanh,
    };
    nc.dropout_rate = net.dropout;
    let tc = TrainConfig {
        epochs: net.epochs,
        batch_size: net.batch,
        learning_rate: net.lr,
        optimizer: match net.optimizer {
            OptimizerArg::Sgd => Optimizer::Sgd,
            OptimizerArg::Rmsprop => Optimizer::RmsProp,
            OptimizerArg::Adam => Optimizer::Adam,
        },
        seed,
        sd_floor: net.sd_floor,
    };
    (nc, tc)
}

#[derive(Serialize)]
struct TrainRun<'a> {
    data: &'a Path,
    seed: u64,
    split: f64,
    split_seed: u64,
    network: &'a NetworkConfig,
    train: &'a TrainConfig,
    n_train: usize,
    n_test: usize,
    train_mse: f64,
    test_mse: f64,
}

fn train(a: TrainArgs) -> Result<()> {
    let data = io::read_dataset(&a.data)?;
    let split_seed = rng::derive_seed(a.seed, 1);
    let (tr, te) = eval::split(&data, a.split, split_seed)?;
    let (nc, tc) = configs(&a.net, data.n_features(), rng::derive_seed(a.seed, 2));
    let model = mdn::train(&tr, &nc, &tc).context("training failed")?;
    let report = EvalReport::build("mdn", &model, &tr, &te)?;
    io::save_model(&model, Some(&tc), &a.out)?;
    io::write_json(
        &TrainRun {
            data: &a.data,
            seed: a.seed,
            split: a.split,
            split_seed,
            network: &nc,
            train: &tc,
            n_train: tr.len(),
            n_test: te.len(),
            train_mse: report.train_mse,
            test_mse: report.test_mse,
        },
        &run_path(&a.out),
    )?;
    println!("k: {}", nc.k);
    println!("train Delay-MSE: {:.6}", report.train_mse);
    println!("test Delay-MSE: {:.6}", report.test_mse);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (model, _) = io::load_model(&a.model)?;
    let data = io::read_dataset(&a.data)?;
    let preds = model.predict_rows(data.features())?;
    let rows = eval::delay_rows(&preds, data.response());
    let mse = rows.iter().map(|r| r.squared_error).sum::<f64>() / rows.len().max(1) as f64;
    println!("rows: {}", data.len());
    println!("Delay-MSE: {mse:.6}");
    if let Some(out) = a.out {
        let report = EvalReport {
            model_kind: "mdn".into(),
            k: model.k(),
            train_mse: f64::NAN,
            test_mse: mse,
            n_train: 0,
            n_test: data.len(),
            rows,
        };
        io::write_json(&report, &out)?;
        io::write_json(
            &serde_json::json!({ "model": a.model, "data": a.data }),
            &run_path(&out),
        )?;
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let (model, _) = io::load_model(&a.model)?;
    let data = io::read_dataset(&a.data)?;
    io::write_predictions(&model, &data, &a.out)?;
    io::write_json(
        &serde_json::json!({ "model": a.model, "data": a.data }),
        &run_path(&a.out),
    )?;
    println!("rows: {}", data.len());
    Ok(())
}

fn axis(feature: usize, spec: &[f64], flag: &str) -> Result<GridAxis> {
    let [min, max, count] = spec else {
        bail!("--{flag} takes min,max,count");
    };
    if *count < 0.0 || count.fract() != 0.0 {
        bail!("--{flag}: count must be a non-negative integer");
    }
    Ok(GridAxis {
        feature,
        min: *min,
        max: *max,
        count: *count as usize,
    })
}

fn export_surface(a: SurfaceArgs) -> Result<()> {
    let (model, _) = io::load_model(&a.model)?;
    let dim = model.config().input_dim;
    let [f1, f2] = a.features[..] else {
        bail!("--features takes exactly two 1-based indices");
    };
    if f1 == 0 || f2 == 0 {
        bail!("--features indices are 1-based");
    }
    let base = if a.fix.is_empty() { vec![0.0; dim] } else { a.fix.clone() };
    let grid = SurfaceGrid {
        axes: [axis(f1 - 1, &a.grid1, "grid1")?, axis(f2 - 1, &a.grid2, "grid2")?],
        base,
    };
    io::export_surface(&model, &grid, &a.out)?;
    io::write_json(
        &serde_json::json!({ "model": a.model, "grid": grid }),
        &run_path(&a.out),
    )?;
    println!("cells: {}", grid.axes[0].count * grid.axes[1].count);
    Ok(())
}

fn reproduce(a: ReproduceArgs) -> Result<()> {
    let tc = experiments::default_training();
    let r = experiments::reproduce(&a.table, a.seed, &tc).expect("selector validated by clap")?;
    println!("{} (seed {})", r.name, r.seed);
    for c in &r.checks {
        println!("{c}");
    }
    println!("overall: {}", if r.passed() { "PASS" } else { "FAIL" });
    if let Some(out) = a.out {
        io::write_json(&r, &out)?;
        io::write_json(
            &serde_json::json!({ "table": a.table, "seed": a.seed, "train": tc }),
            &run_path(&out),
        )?;
    }
    Ok(())
}
