//! Command-line front end for the fringe-projection pipeline.
//!
//! Subcommands: `generate` (synthetic datasets), `unwrap` (one scene with
//! mftpu / mftpu3f / dltpu), `train` (fit a network for one high frequency),
//! `eval` (score a method on a dataset split), and `sweep`
//! (frequency/exposure/gamma/noise ladders to CSV).
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 frequency
//! mismatch, 5 missing checkpoint.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phaseforge::dataset::{generate_dataset, Dataset, DatasetConfig, Split};
use phaseforge::dltpu::{self, TrainConfig};
use phaseforge::error::Error;
use phaseforge::eval::{
    evaluate_dataset, measure, metrics_to_csv, run_method, run_sweep, write_metrics_csv,
    EvalOptions, MethodSpec, SweepKind, SweepOptions, METRICS_CSV_HEADER,
};
use phaseforge::sim::AcquisitionSpec;
use phaseforge::tpu::{compensate_orders, error_budget};

use config::{create_parent, echo, ensure_writable, parse_list, Resolver};

#[derive(Parser)]
#[command(
    name = "phaseforge",
    about = "Synthetic fringe projection, temporal phase unwrapping, and a learned fringe-order predictor",
    version
)]
struct Cli {
    /// Flat key=value config file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (also PHASEFORGE_THREADS); 0 picks the core count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of fringe stacks with ground truth.
    Generate(GenerateArgs),
    /// Unwrap one scene of a dataset and write order/phase maps.
    Unwrap(UnwrapArgs),
    /// Train the fringe-order network for one high frequency.
    Train(TrainArgs),
    /// Evaluate one method on a dataset split.
    Eval(EvalArgs),
    /// Sweep a stress variable and write one CSV row per (method, value).
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of scenes.
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Comma-separated fringe frequencies; must include 1.
    #[arg(long)]
    freqs: Option<String>,
    /// Projector-pixels of fringe shift per millimeter of height.
    #[arg(long)]
    kappa: Option<f64>,
    /// Sensor noise standard deviation (normalized intensity).
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Projector nonlinearity exponent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Relative exposure in (0, 1].
    #[arg(long)]
    exposure: Option<f64>,
    /// 0 (off) or 8.
    #[arg(long)]
    quantize_bits: Option<u8>,
    /// Fraction of scenes in the train split.
    #[arg(long)]
    train_frac: Option<f64>,
    /// Modulation threshold for the stored validity mask.
    #[arg(long)]
    threshold: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite an existing output.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct UnwrapArgs {
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dataset split (train or test).
    #[arg(long)]
    split: Option<String>,
    /// Scene index; defaults to the first scene of the split.
    #[arg(long)]
    scene: Option<usize>,
    /// mftpu, mftpu3f, or dltpu.
    #[arg(long)]
    method: Option<String>,
    /// High fringe frequency.
    #[arg(long)]
    fh: Option<u32>,
    /// Mid frequency for mftpu3f.
    #[arg(long)]
    fm: Option<u32>,
    /// PUW1 checkpoint (required for dltpu).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Modulation threshold for the validity mask.
    #[arg(long)]
    threshold: Option<f64>,
    /// Apply the majority-vote order compensation pass.
    #[arg(long)]
    compensate: bool,
    /// Output directory for k.pud, phi_abs.pud, diagnostics.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// High fringe frequency (class count).
    #[arg(long)]
    fh: Option<u32>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Square crop size for training steps (even).
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cap on test scenes scored per epoch.
    #[arg(long)]
    eval_scenes: Option<usize>,
    /// Output checkpoint path (PUW1).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log CSV; defaults to `<out>.log.csv`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    fh: Option<u32>,
    #[arg(long)]
    fm: Option<u32>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Optional CSV output (header + one row).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// frequency, exposure, gamma, or noise.
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated method list.
    #[arg(long)]
    methods: Option<String>,
    /// High frequency for exposure/gamma/noise sweeps.
    #[arg(long)]
    fh: Option<u32>,
    #[arg(long)]
    fm: Option<u32>,
    /// Directory holding dltpu_f{f}.puw checkpoints.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. }
        | Error::OutOfRange { .. }
        | Error::DatasetMissingFrequency { .. }
        | Error::MissingData { .. } => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
        Error::FrequencyMismatch { .. } | Error::FrequencyOrder { .. } => 4,
        Error::MissingCheckpoint { .. } => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    let result = match &cli.command {
        Command::Generate(args) => cmd_generate(&cli, args),
        Command::Unwrap(args) => cmd_unwrap(&cli, args),
        Command::Train(args) => cmd_train(&cli, args),
        Command::Eval(args) => cmd_eval(&cli, args),
        Command::Sweep(args) => cmd_sweep(&cli, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("PHASEFORGE_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(n) = n {
        if n > 0 {
            // Ignore failure: the pool can only be installed once.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs) -> Result<(), Error> {
    let mut r = Resolver::new(cli.config.as_deref())?;
    let out = r.require_path("out", args.out.clone())?;
    let scenes = r.get("scenes", args.scenes, 10)?;
    let width = r.get("width", args.width, 128)?;
    let height = r.get("height", args.height, 128)?;
    let freqs_raw: String = r.get("freqs", args.freqs.clone(), "1,8".to_string())?;
    let kappa = r.get("kappa", args.kappa, 4.0)?;
    let noise_sigma = r.get("noise_sigma", args.noise_sigma, 0.02)?;
    let gamma = r.get("gamma", args.gamma, 1.0)?;
    let exposure = r.get("exposure", args.exposure, 1.0)?;
    let quantize_bits = r.get("quantize_bits", args.quantize_bits, 8)?;
    let train_frac = r.get("train_frac", args.train_frac, 0.8)?;
    let threshold = r.get("threshold", args.threshold, 0.08)?;
    let seed = r.get("seed", args.seed, 1)?;
    let force = r.switch("force", args.force)?;
    echo("generate", &r.finish()?);

    ensure_writable(&out, force)?;
    let freqs: Vec<u32> = parse_list(&freqs_raw, "freqs")?;
    let cfg = DatasetConfig {
        n_scenes: scenes,
        width,
        height,
        kappa,
        acquisitions: freqs
            .iter()
            .map(|&f| AcquisitionSpec {
                frequency: f,
                gamma,
                exposure,
                noise_sigma,
                quantize_bits,
                seed: 0,
            })
            .collect(),
        master_seed: seed,
        train_fraction: train_frac,
        modulation_threshold: threshold,
    };
    let summary = generate_dataset(&cfg, &out)?;
    println!(
        "wrote {} train + {} test scenes at {} (frequencies {:?})",
        summary.n_train,
        summary.n_test,
        summary.root.display(),
        summary.frequencies
    );
    Ok(())
}

fn parse_split(raw: &str) -> Result<Split, Error> {
    Split::parse(raw)
}

fn cmd_unwrap(cli: &Cli, args: &UnwrapArgs) -> Result<(), Error> {
    let mut r = Resolver::new(cli.config.as_deref())?;
    let data = r.require_path("data", args.data.clone())?;
    let split_raw: String = r.get("split", args.split.clone(), "test".to_string())?;
    let scene_flag = r.optional("scene", args.scene)?;
    let method_raw: String = r.get("method", args.method.clone(), "mftpu".to_string())?;
    let f_h: u32 = r.require("fh", args.fh)?;
    let f_mid = r.get("fm", args.fm, 8)?;
    let checkpoint = r.optional_path("checkpoint", args.checkpoint.clone())?;
    let threshold = r.get("threshold", args.threshold, 0.08)?;
    let compensate = r.switch("compensate", args.compensate)?;
    let out = r.require_path("out", args.out.clone())?;
    let force = r.switch("force", args.force)?;
    echo("unwrap", &r.finish()?);

    let method = MethodSpec::parse(&method_raw)?;
    let split = parse_split(&split_raw)?;
    let dataset = Dataset::open(&data)?;
    let scene = match scene_flag {
        Some(s) => s,
        None => *dataset
            .scene_indices(split)
            .first()
            .ok_or_else(|| Error::MissingData {
                detail: format!("no scenes in split {split_raw}"),
            })?,
    };

    let model = match method {
        MethodSpec::DlTpu => {
            let path = checkpoint.ok_or_else(|| Error::MissingCheckpoint {
                path: PathBuf::from("--checkpoint not given"),
            })?;
            let model = phaseforge::dltpu::DlTpuModel::load(&path)?;
            if model.f_h() != f_h {
                return Err(Error::FrequencyMismatch {
                    expected: f_h,
                    actual: model.f_h(),
                    context: "checkpoint",
                });
            }
            Some(model)
        }
        _ => None,
    };

    let mut freqs = vec![1, f_h];
    if method == MethodSpec::MfTpu3f && f_mid != 1 && f_mid != f_h {
        freqs.push(f_mid);
    }
    let sample = dataset.load_sample(scene, &freqs)?;
    let inputs = measure(
        &sample.stacks,
        f_h,
        (method == MethodSpec::MfTpu3f).then_some(f_mid),
        threshold,
    )?;
    let (mut orders, phase) = run_method(method, &inputs, model.as_ref())?;
    if compensate {
        orders = compensate_orders(&orders);
    }

    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let k_path = out.join("k.pud");
    let phi_path = out.join("phi_abs.pud");
    let diag_path = out.join("diagnostics.txt");
    for p in [&k_path, &phi_path, &diag_path] {
        ensure_writable(p, force)?;
    }
    phaseforge::dataset::write_i32(&k_path, &orders.orders)?;
    phaseforge::dataset::write_f32(&phi_path, phase.values())?;

    let mut diag = String::new();
    diag.push_str(&format!("method={}\n", method.name()));
    diag.push_str(&format!("scene={scene}\n"));
    diag.push_str(&format!("f_h={f_h}\n"));
    diag.push_str(&format!("n_valid={}\n", inputs.mask.count_true()));
    if method != MethodSpec::DlTpu {
        let budget = error_budget(f_h, 1)?;
        diag.push_str(&format!("dphi_max={:.6}\n", budget.dphi_max));
        diag.push_str(&format!("dk_max={:.6}\n", budget.dk_max));
    }
    let (err, n) =
        phaseforge::eval::phase_order_error_rate(&phase, &sample.phi_abs[&f_h], &inputs.mask)?;
    let sigma = phaseforge::eval::sigma_dphi(&phase, &sample.phi_abs[&f_h], &inputs.mask)?;
    diag.push_str(&format!("error_rate={err:.6}\n"));
    diag.push_str(&format!("sigma_dphi={sigma:.6}\n"));
    diag.push_str(&format!("n_compared={n}\n"));
    std::fs::write(&diag_path, &diag).map_err(|e| Error::Io {
        path: diag_path.clone(),
        source: e,
    })?;
    print!("{diag}");
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<(), Error> {
    let mut r = Resolver::new(cli.config.as_deref())?;
    let data = r.require_path("data", args.data.clone())?;
    let f_h: u32 = r.require("fh", args.fh)?;
    let epochs = r.get("epochs", args.epochs, 10)?;
    let lr = r.get("lr", args.lr, 2e-3)?;
    let patch = r.get("patch", args.patch, 64)?;
    let threshold = r.get("threshold", args.threshold, 0.08)?;
    let seed = r.get("seed", args.seed, 1)?;
    let eval_scenes = r.optional("eval_scenes", args.eval_scenes)?;
    let out = r.require_path("out", args.out.clone())?;
    let default_log = PathBuf::from(format!("{}.log.csv", out.display()));
    let log = r.get_path("log", args.log.clone(), default_log)?;
    let force = r.switch("force", args.force)?;
    echo("train", &r.finish()?);

    ensure_writable(&out, force)?;
    ensure_writable(&log, force)?;
    create_parent(&out)?;
    create_parent(&log)?;

    let dataset = Dataset::open(&data)?;
    let cfg = TrainConfig {
        f_h,
        epochs,
        lr,
        seed,
        patch,
        modulation_threshold: threshold,
        eval_scenes,
    };
    let (mut model, report) = dltpu::train(&dataset, &cfg)?;
    for row in &report.epochs {
        println!(
            "epoch={} train_loss={:.6} test_error_rate={:.6}",
            row.epoch, row.train_loss, row.test_error_rate
        );
    }
    model.save(&out)?;
    std::fs::write(&log, report.to_csv()).map_err(|e| Error::Io {
        path: log.clone(),
        source: e,
    })?;
    println!("wrote checkpoint {} and log {}", out.display(), log.display());
    Ok(())
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> Result<(), Error> {
    let mut r = Resolver::new(cli.config.as_deref())?;
    let data = r.require_path("data", args.data.clone())?;
    let split_raw: String = r.get("split", args.split.clone(), "test".to_string())?;
    let method_raw: String = r.get("method", args.method.clone(), "mftpu".to_string())?;
    let f_h: u32 = r.require("fh", args.fh)?;
    let f_mid = r.get("fm", args.fm, 8)?;
    let checkpoint = r.optional_path("checkpoint", args.checkpoint.clone())?;
    let threshold = r.get("threshold", args.threshold, 0.08)?;
    let out = r.optional_path("out", args.out.clone())?;
    let force = r.switch("force", args.force)?;
    echo("eval", &r.finish()?);

    let dataset = Dataset::open(&data)?;
    let method = MethodSpec::parse(&method_raw)?;
    let opts = EvalOptions {
        f_mid,
        checkpoint,
        checkpoint_dir: None,
        modulation_threshold: threshold,
    };
    let record = evaluate_dataset(&dataset, parse_split(&split_raw)?, method, f_h, &opts)?;
    println!("method={}", record.method);
    println!("f_h={}", record.f_h);
    println!("error_rate={:.6}", record.error_rate);
    println!("sigma_dphi={:.6}", record.sigma_dphi);
    println!("n_valid={}", record.n_valid);
    if let Some(path) = out {
        ensure_writable(&path, force)?;
        create_parent(&path)?;
        std::fs::write(&path, metrics_to_csv(std::slice::from_ref(&record))).map_err(|e| {
            Error::Io {
                path: path.clone(),
                source: e,
            }
        })?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SweepArgs) -> Result<(), Error> {
    let mut r = Resolver::new(cli.config.as_deref())?;
    let data = r.require_path("data", args.data.clone())?;
    let kind_raw: String = r.require("kind", args.kind.clone())?;
    let methods_raw: String = r.get("methods", args.methods.clone(), "mftpu".to_string())?;
    let f_h = r.get("fh", args.fh, 32)?;
    let f_mid = r.get("fm", args.fm, 8)?;
    let checkpoints = r.optional_path("checkpoints", args.checkpoints.clone())?;
    let threshold = r.get("threshold", args.threshold, 0.08)?;
    let out = r.require_path("out", args.out.clone())?;
    let force = r.switch("force", args.force)?;
    echo("sweep", &r.finish()?);

    ensure_writable(&out, force)?;
    create_parent(&out)?;
    let kind = SweepKind::parse(&kind_raw)?;
    let methods = methods_raw
        .split(',')
        .map(|s| MethodSpec::parse(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(Error::Config {
            detail: "empty method list".into(),
        });
    }
    let dataset = Dataset::open(&data)?;
    let opts = SweepOptions {
        f_h,
        eval: EvalOptions {
            f_mid,
            checkpoint: None,
            checkpoint_dir: checkpoints,
            modulation_threshold: threshold,
        },
    };
    let records = run_sweep(&dataset, kind, &methods, &opts)?;
    write_metrics_csv(&out, &records)?;
    println!("{METRICS_CSV_HEADER}");
    for rec in &records {
        println!("{}", rec.to_csv_row());
    }
    println!("wrote {} rows to {}", records.len(), out.display());
    Ok(())
}
