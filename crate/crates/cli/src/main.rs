mod config;
mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use skelgest::ingest::{assign_folds, generate_synthetic, load_dataset, write_dataset, Dataset};
use skelgest::metrics::{confusion_csv, render_report, EvaluationReport, ReportFormat};
use skelgest::nn::{grad_check, Architecture, HeadKind, LstmSpec, TcnSpec};
use skelgest::pipeline::{
    cross_validate, evaluate_model_set, load_model_set, save_model_set, train_protocol, NetworkLearner,
    RunManifest,
};

use config::{AppConfig, WindowLengths};
use error::CliError;

const RESOLVED_CONFIG: &str = "resolved_config.toml";
const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Parser)]
#[command(name = "skelgest", version, about = "Skeletal hand-gesture classification")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, env = "SKELGEST_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Load and validate a dataset, print a summary.
    Ingest(IngestArgs),
    /// Train the protocol's models on the whole dataset and save checkpoints.
    Train(TrainArgs),
    /// Cross-validate, or evaluate saved checkpoints.
    Evaluate(EvaluateArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
    /// Render a saved report.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patients: Option<u32>,
    /// Inclusive frame-count range of static gestures, `lo,hi`.
    #[arg(long, value_parser = parse_pair::<usize>)]
    frames_static: Option<[usize; 2]>,
    #[arg(long, value_parser = parse_pair::<usize>)]
    frames_dynamic: Option<[usize; 2]>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    camera_offset_range: Option<f64>,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset root (manifest.csv and frames/).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Joint names in file order, comma separated.
    #[arg(long, value_delimiter = ',')]
    joints: Option<Vec<String>>,
    /// Name of the reference chin joint.
    #[arg(long)]
    chin: Option<String>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Fold boundaries `b1,b2`.
    #[arg(long, value_parser = parse_pair::<u32>)]
    folds: Option<[u32; 2]>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetArg {
    Lstm,
    Tcn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Multiclass,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Normalization method, 1 to 5.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    method: Option<u8>,
    /// Window length, or `short,long` for length routing.
    #[arg(long, alias = "window", value_delimiter = ',')]
    frames: Option<Vec<usize>>,
    /// Longest sequence routed to the short window.
    #[arg(long)]
    threshold: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, value_enum)]
    net: Option<NetArg>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    dilations: Option<Vec<usize>>,
    /// Oversample positives of one-vs-rest tasks.
    #[arg(long)]
    rebalance: bool,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Gradient clip norm; 0 disables clipping.
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    no_savgol: bool,
    #[arg(long)]
    savgol_m: Option<usize>,
    #[arg(long)]
    savgol_order: Option<usize>,
    #[arg(long)]
    include_confidence: bool,
    #[arg(long, value_parser = parse_pair::<u32>)]
    folds: Option<[u32; 2]>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Output directory for checkpoints and the run manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: PathBuf,
    /// Evaluate these saved checkpoints on the whole dataset instead of
    /// cross-validating.
    #[arg(long, conflicts_with = "run_manifest")]
    checkpoints: Option<PathBuf>,
    /// Repeat the cross-validation recorded in this run manifest.
    #[arg(long)]
    run_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `a,b`.
fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<[T; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts[..] {
        [a, b] => Ok([
            a.parse().map_err(|_| format!("bad value {a:?}"))?,
            b.parse().map_err(|_| format!("bad value {b:?}"))?,
        ]),
        _ => Err(format!("expected two comma-separated values, got {s:?}")),
    }
}

impl SynthArgs {
    fn overlay(&self) -> AppConfig {
        let mut c = AppConfig {
            seed: self.seed,
            ..AppConfig::default()
        };
        let s = &mut c.synth;
        s.patients = self.patients;
        s.frames_static = self.frames_static;
        s.frames_dynamic = self.frames_dynamic;
        s.noise_sigma = self.noise_sigma;
        s.camera_offset_range = self.camera_offset_range;
        c
    }
}

impl DataArgs {
    fn apply(&self, c: &mut AppConfig) {
        let mut over = AppConfig::default();
        over.dataset.root = self.data.clone();
        over.dataset.manifest = self.manifest.clone();
        over.joints.names = self.joints.clone();
        over.joints.chin = self.chin.clone();
        c.merge(&over);
    }
}

impl RunArgs {
    fn apply(&self, c: &mut AppConfig) {
        let mut o = AppConfig {
            seed: self.seed,
            ..AppConfig::default()
        };
        o.folds.boundaries = self.folds;
        let p = &mut o.preprocess;
        p.method = self.method;
        p.window = self.frames.as_ref().map(|f| match f[..] {
            [w] => WindowLengths::One(w),
            _ => WindowLengths::Many(f.clone()),
        });
        p.threshold = self.threshold;
        p.stride = self.stride;
        p.include_confidence = self.include_confidence.then_some(true);
        p.savgol.enabled = self.no_savgol.then_some(false);
        p.savgol.m = self.savgol_m;
        p.savgol.order = self.savgol_order;
        let m = &mut o.model;
        m.protocol = self.protocol.map(|p| match p {
            ProtocolArg::Multiclass => "multiclass".into(),
            ProtocolArg::Binary => "binary".into(),
        });
        m.net = self.net.map(|n| match n {
            NetArg::Lstm => "lstm".into(),
            NetArg::Tcn => "tcn".into(),
        });
        m.hidden = self.hidden;
        m.channels = self.channels;
        m.kernel = self.kernel;
        m.dilations = self.dilations.clone();
        m.rebalance = self.rebalance.then_some(true);
        let t = &mut o.train;
        t.learning_rate = self.learning_rate;
        t.epochs = self.epochs;
        t.batch_size = self.batch_size;
        t.optimizer = self.optimizer.map(|o| match o {
            OptimizerArg::Adam => "adam".into(),
            OptimizerArg::Sgd => "sgd".into(),
        });
        t.clip_norm = self.clip_norm;
        // A new window pair without a threshold falls back to the default
        // for that pair, not to a threshold from the file.
        if self.frames.is_some() && self.threshold.is_none() {
            c.preprocess.threshold = None;
        }
        c.merge(&o);
    }
}

fn base_config(path: Option<&Path>) -> Result<AppConfig, CliError> {
    match path {
        Some(p) => {
            log::info!("reading config {}", p.display());
            AppConfig::load(p)
        }
        None => Ok(AppConfig::default()),
    }
}

/// Logs the resolved config and, when given a directory, writes it there.
fn echo_config(cfg: &AppConfig, out: Option<&Path>) -> Result<(), CliError> {
    let text = cfg.to_toml();
    log::info!("resolved config:\n{text}");
    if let Some(dir) = out {
        write_file(&dir.join(RESOLVED_CONFIG), text.as_bytes())?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load(cfg: &AppConfig) -> Result<Dataset, CliError> {
    let (root, manifest) = cfg.dataset_paths()?;
    let ds = load_dataset(&root, &manifest, cfg.joint_map()?)?;
    log::info!("loaded {} gestures from {} patients", ds.sequences.len(), ds.patients().len());
    Ok(ds)
}

fn to_json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn cmd_synth(base: AppConfig, args: &SynthArgs) -> Result<(), CliError> {
    let mut cfg = base;
    cfg.merge(&args.overlay());
    let synth = cfg.synth_config()?;
    let resolved = AppConfig {
        seed: cfg.seed,
        synth: cfg.clone().with_defaults().synth,
        ..AppConfig::default()
    };
    let ds = generate_synthetic(&synth)?;
    let manifest = write_dataset(&ds, &args.out)?;
    echo_config(&resolved, Some(&args.out))?;
    log::info!("wrote {} gestures, manifest {}", ds.sequences.len(), manifest.display());
    Ok(())
}

fn cmd_ingest(base: AppConfig, args: &IngestArgs) -> Result<(), CliError> {
    let mut cfg = base;
    args.data.apply(&mut cfg);
    if let Some(b) = args.folds {
        cfg.folds.boundaries = Some(b);
    }
    let cfg = cfg.with_defaults();
    echo_config(&cfg, None)?;
    let ds = load(&cfg)?;
    let [b1, b2] = cfg.folds.boundaries.expect("filled");
    let split = assign_folds(&ds, (b1, b2));
    let mut per_fold = std::collections::BTreeMap::<u8, usize>::new();
    for s in &ds.sequences {
        if let Some(f) = split.fold(s.patient_id) {
            *per_fold.entry(f).or_default() += 1;
        }
    }
    let n_static = ds
        .sequences
        .iter()
        .filter(|s| s.label.kind() == skelgest::skeleton::GestureKind::Static)
        .count();
    let summary = serde_json::json!({
        "n_sequences": ds.sequences.len(),
        "n_static": n_static,
        "n_dynamic": ds.sequences.len() - n_static,
        "patients": ds.patients(),
        "sequences_per_fold": per_fold,
        "provenance": ds.provenance,
        "checksum": ds.checksum(),
    });
    print!("{}", String::from_utf8(to_json(&summary)).expect("utf-8"));
    Ok(())
}

fn cmd_train(base: AppConfig, args: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = base;
    args.data.apply(&mut cfg);
    args.run.apply(&mut cfg);
    let cfg = cfg.with_defaults();
    let run = cfg.run_config()?;
    echo_config(&cfg, Some(&args.out))?;
    let ds = load(&cfg)?;
    let all: Vec<_> = ds.sequences.iter().collect();
    let set = train_protocol(&all, &ds.joint_map, &run, &NetworkLearner::from_config(&run), run.seed)?;
    let paths = save_model_set(&set, &run, &args.out)?;
    write_file(&args.out.join(RUN_MANIFEST), &to_json(&RunManifest::new(&run, &ds)))?;
    log::info!("wrote {} checkpoints to {}", paths.len(), args.out.display());
    Ok(())
}

fn write_report(report: &EvaluationReport, out: &Path) -> Result<(), CliError> {
    write_file(&out.join("report.json"), &render_report(report, ReportFormat::Json))?;
    write_file(&out.join("summary.csv"), &render_report(report, ReportFormat::Csv))?;
    write_file(&out.join("confusion_static.csv"), confusion_csv(&report.confusion_static).as_bytes())?;
    write_file(&out.join("confusion_dynamic.csv"), confusion_csv(&report.confusion_dynamic).as_bytes())?;
    Ok(())
}

fn cmd_evaluate(base: AppConfig, args: &EvaluateArgs) -> Result<(), CliError> {
    let mut cfg = base;
    args.data.apply(&mut cfg);
    let (cfg, run, manifest) = match &args.run_manifest {
        Some(path) => {
            let manifest: RunManifest = serde_json::from_str(&read_file(path)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            cfg.merge(&AppConfig::from_run_config(&manifest.config));
            (cfg.with_defaults(), manifest.config.clone(), Some(manifest))
        }
        None => {
            args.run.apply(&mut cfg);
            let cfg = cfg.with_defaults();
            let run = cfg.run_config()?;
            (cfg, run, None)
        }
    };
    echo_config(&cfg, Some(&args.out))?;
    let ds = load(&cfg)?;
    if let Some(m) = &manifest {
        m.verify(&ds)?;
    }
    let report = match &args.checkpoints {
        Some(dir) => {
            let set = load_model_set(dir, &run, &ds.joint_map)?;
            log::info!("evaluating {} saved models on every gesture", set.n_models());
            let meta = serde_json::to_value(RunManifest::new(&run, &ds)).expect("serializable");
            evaluate_model_set(&set, &ds, meta)?
        }
        None => {
            write_file(&args.out.join(RUN_MANIFEST), &to_json(&RunManifest::new(&run, &ds)))?;
            cross_validate(&ds, &run)?
        }
    };
    write_report(&report, &args.out)?;
    print!("{}", String::from_utf8(render_report(&report, ReportFormat::Text)).expect("utf-8"));
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    let arches = [
        (
            "lstm",
            Architecture::Lstm(LstmSpec {
                input_dim: 3,
                hidden_dim: 4,
                n_classes: 2,
            }),
        ),
        (
            "tcn",
            Architecture::Tcn(TcnSpec {
                input_dim: 3,
                channels: 4,
                kernel: 3,
                dilations: vec![1, 2],
                n_classes: 2,
            }),
        ),
    ];
    let mut worst = 0.0f64;
    let mut failed = false;
    for (name, arch) in &arches {
        for head in [HeadKind::Softmax, HeadKind::Sigmoid] {
            let r = grad_check(arch.clone(), head, args.seed, args.tolerance)?;
            println!(
                "{name} {head:?}: {} parameters, max relative error {:.3e} -> {}",
                r.n_params,
                r.max_rel_error,
                if r.passed { "pass" } else { "FAIL" }
            );
            worst = worst.max(r.max_rel_error);
            failed |= !r.passed;
        }
    }
    if failed {
        return Err(CliError::Check(format!(
            "gradient check failed: max relative error {worst:.3e} is not below {:e}",
            args.tolerance
        )));
    }
    println!("gradient check passed: max relative error {worst:.3e} < {:e}", args.tolerance);
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let report: EvaluationReport = serde_json::from_str(&read_file(&args.input)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
    let format = match args.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Text => ReportFormat::Text,
        FormatArg::Csv => ReportFormat::Csv,
    };
    let bytes = render_report(&report, format);
    match &args.out {
        Some(path) => write_file(path, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let base = || base_config(cli.config.as_deref());
    match &cli.command {
        Command::Synth(a) => cmd_synth(base()?, a),
        Command::Ingest(a) => cmd_ingest(base()?, a),
        Command::Train(a) => cmd_train(base()?, a),
        Command::Evaluate(a) => cmd_evaluate(base()?, a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
