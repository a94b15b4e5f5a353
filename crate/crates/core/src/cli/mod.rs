//! Command-line entry point: `train`, `eval`, `audit`, `gradcam`, `metrics`
//! and `data-prepare`. Every run writes a resolved-config snapshot next to
//! its artifacts so it can be reproduced from the snapshot plus the seed.
//!
//! Exit codes: 0 success, 2 usage or configuration errors, 3 data/format
//! errors, 4 runtime failures.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::blocks::PathWiring;
use crate::data::{self, Sample, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, grad_cam, heatmap_to_png, information_density, pose_variance, GradCamTap};
use crate::model::{audit_parameters, load_weights, save_weights, LanmsffConfig, Model};
use crate::training::{build_training_pool, fit, kfold_split, ScheduleMode, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

const OUT_DIR_ENV: &str = "LANMSFF_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "lanmsff", version, about = "Lightweight attention CNN for facial expression recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the model and report exact parameter counts per layer.
    Audit(AuditArgs),
    /// Train on a dataset and write the best weights plus logs.
    Train(TrainArgs),
    /// Evaluate saved weights: accuracy, confusion matrices, per-pose tables.
    Eval(EvalArgs),
    /// Render Grad-CAM heatmaps for samples of a dataset.
    Gradcam(GradcamArgs),
    /// Compute information density and pose variance from supplied numbers.
    Metrics(MetricsArgs),
    /// Parse a raw dataset into the binary sample cache.
    DataPrepare(DataPrepareArgs),
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Output directory (default: $LANMSFF_OUT_DIR, then ./lanmsff-out)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl OutArgs {
    fn resolve(&self) -> Result<PathBuf> {
        let dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("lanmsff-out"));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 7)]
    num_classes: usize,
    #[arg(long, default_value_t = 1)]
    input_channels: usize,
    /// Four block widths, comma separated (default 66,72,78,84)
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    /// Ablation: drop the attention block
    #[arg(long)]
    no_massatt: bool,
    /// Ablation: fuse full-width taps without feature selection
    #[arg(long)]
    no_pwfs: bool,
    #[arg(long, default_value_t = 0.25)]
    dropout: f64,
    #[arg(long, default_value_t = 64)]
    input_size: usize,
    /// Cross-path feature sharing between the dual-path stages
    #[arg(long, value_enum, default_value_t = WiringArg::Shared)]
    path_wiring: WiringArg,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum WiringArg {
    Shared,
    Independent,
}

impl ModelArgs {
    fn to_config(&self) -> Result<LanmsffConfig> {
        let widths = self.widths.clone().unwrap_or_else(|| vec![66, 72, 78, 84]);
        if widths.len() != 4 {
            return Err(Error::InvalidConfig(format!("--widths needs exactly 4 values, got {}", widths.len())));
        }
        Ok(LanmsffConfig {
            input_channels: self.input_channels,
            num_classes: self.num_classes,
            block_widths: [widths[0], widths[1], widths[2], widths[3]],
            enable_massatt: !self.no_massatt,
            enable_pwfs: !self.no_pwfs,
            dropout_rate: self.dropout,
            input_size: self.input_size,
            path_wiring: match self.path_wiring {
                WiringArg::Shared => PathWiring::Shared,
                WiringArg::Independent => PathWiring::Independent,
            },
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DatasetKind {
    Fer2013,
    Ferplus,
    Kdef,
    Cache,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Dataset format of --data
    #[arg(long, value_enum)]
    dataset: DatasetKind,
    /// CSV file (fer2013/ferplus), image directory (kdef) or cache file
    #[arg(long)]
    data: PathBuf,
    /// FERPlus vote CSV (required with --dataset ferplus)
    #[arg(long)]
    votes: Option<PathBuf>,
    /// Keep only samples listed in this pose-index file (one id per line)
    #[arg(long)]
    pose_index: Option<PathBuf>,
}

fn load_samples(args: &DataArgs, grayscale: bool) -> Result<Vec<Sample>> {
    let mut samples = match args.dataset {
        DatasetKind::Fer2013 => {
            let file = fs::File::open(&args.data)
                .map_err(|e| Error::data(format!("cannot open `{}`: {e}", args.data.display())))?;
            data::fer2013::parse_fer2013(BufReader::new(file))?
        }
        DatasetKind::Ferplus => {
            let votes_path = args
                .votes
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("--dataset ferplus requires --votes".into()))?;
            let images = {
                let file = fs::File::open(&args.data)
                    .map_err(|e| Error::data(format!("cannot open `{}`: {e}", args.data.display())))?;
                data::fer2013::parse_fer2013(BufReader::new(file))?
            };
            let votes = {
                let file = fs::File::open(votes_path)
                    .map_err(|e| Error::data(format!("cannot open `{}`: {e}", votes_path.display())))?;
                data::ferplus::parse_votes(BufReader::new(file))?
            };
            data::ferplus::parse_ferplus(&votes, &images)?
        }
        DatasetKind::Kdef => {
            let parsed = data::kdef::parse_kdef(&args.data, grayscale)?;
            for (path, reason) in &parsed.skipped {
                eprintln!("kdef: skipped {path}: {reason}");
            }
            parsed.samples
        }
        DatasetKind::Cache => data::cache::read_cache(&args.data)?,
    };
    if let Some(index_path) = &args.pose_index {
        let file = fs::File::open(index_path)
            .map_err(|e| Error::data(format!("cannot open `{}`: {e}", index_path.display())))?;
        let ids = data::pose::read_index(BufReader::new(file))?;
        let subset = data::pose::pose_subset(&samples, &ids);
        for id in &subset.missing {
            eprintln!("pose-index: id `{id}` not found, skipped");
        }
        samples = subset.samples;
    }
    Ok(samples)
}

fn schema_for(kind: DatasetKind, num_classes: usize) -> data::LabelSchema {
    match (kind, num_classes) {
        (DatasetKind::Ferplus, _) | (DatasetKind::Cache, 8) => data::ferplus_schema(),
        (DatasetKind::Fer2013 | DatasetKind::Kdef, _) | (DatasetKind::Cache, 7) => data::fer2013_schema(),
        (DatasetKind::Cache, k) => data::generic_schema(k),
    }
}

fn write_snapshot(out_dir: &Path, command: &str, body: serde_json::Value) -> Result<()> {
    let snapshot = json!({ "command": command, "resolved": body });
    fs::write(out_dir.join("resolved_config.json"), serde_json::to_string_pretty(&snapshot)?)?;
    Ok(())
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run_audit(args: &AuditArgs) -> Result<()> {
    let config = args.model.to_config()?;
    let out_dir = args.out.resolve()?;
    let model = Model::build(&config, args.seed)?;
    let report = audit_parameters(&model);
    fs::write(out_dir.join("audit.txt"), report.to_text())?;
    fs::write(out_dir.join("audit.json"), serde_json::to_string_pretty(&report.to_json())?)?;
    write_snapshot(&out_dir, "audit", json!({ "model": config, "seed": args.seed }))?;
    print!("{}", report.to_text());
    println!("written: {}", out_dir.join("audit.json").display());
    Ok(())
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    patience: usize,
    #[arg(long, default_value_t = 0.5)]
    decay: f64,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check for improvement on a fixed 8-epoch grid instead of a sliding
    /// patience window
    #[arg(long)]
    fixed_interval_schedule: bool,
    /// Skip the 3x synthetic augmentation of the training split
    #[arg(long)]
    no_augment: bool,
    /// Fraction of the training split held out for validation when the
    /// dataset carries no validation split
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    /// Train on one fold of a seeded k-fold plan (0-based)
    #[arg(long)]
    fold: Option<usize>,
    /// Number of folds for --fold
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let config = args.model.to_config()?;
    config.validate()?;
    let out_dir = args.out.resolve()?;
    let train_cfg = TrainConfig {
        batch_size: args.batch_size,
        lr0: args.lr,
        patience_epochs: args.patience,
        decay_factor: args.decay,
        max_epochs: args.epochs,
        seed: args.seed,
        schedule_mode: if args.fixed_interval_schedule { ScheduleMode::FixedInterval } else { ScheduleMode::Patience },
        ..TrainConfig::default()
    };
    train_cfg.validate()?;

    let samples = load_samples(&args.data, config.input_channels == 1)?;
    if samples.is_empty() {
        return Err(Error::data("dataset contains no samples"));
    }

    let (train_set, val_set): (Vec<Sample>, Vec<Sample>) = if let Some(fold) = args.fold {
        let plan = kfold_split(samples.len(), args.folds, args.seed)?;
        if fold >= plan.k {
            return Err(Error::InvalidConfig(format!("--fold {fold} outside 0..{}", plan.k)));
        }
        let (tr, va) = plan.train_val(fold);
        (tr.iter().map(|&i| samples[i].clone()).collect(), va.iter().map(|&i| samples[i].clone()).collect())
    } else {
        let has_val = samples.iter().any(|s| s.split == Split::Val);
        if has_val {
            (
                samples.iter().filter(|s| s.split == Split::Train).cloned().collect(),
                samples.iter().filter(|s| s.split == Split::Val).cloned().collect(),
            )
        } else {
            if !(0.0..1.0).contains(&args.val_fraction) || args.val_fraction == 0.0 {
                return Err(Error::InvalidConfig(format!("--val-fraction {} must lie in (0,1)", args.val_fraction)));
            }
            let k = ((1.0 / args.val_fraction).round() as usize).max(2);
            let plan = kfold_split(samples.len(), k, args.seed)?;
            let (tr, va) = plan.train_val(0);
            (tr.iter().map(|&i| samples[i].clone()).collect(), va.iter().map(|&i| samples[i].clone()).collect())
        }
    };

    let train_pool = if args.no_augment { train_set.clone() } else { build_training_pool(&train_set, args.seed) };
    println!(
        "training on {} samples ({} originals), validating on {}",
        train_pool.len(),
        train_set.len(),
        val_set.len()
    );

    let model = Model::build(&config, args.seed)?;
    let outcome = fit(&model, &train_pool, &val_set, &train_cfg)?;

    let weights_path = out_dir.join("weights.lmw");
    save_weights(&model, &weights_path)?;
    fs::write(out_dir.join("log.csv"), outcome.log.to_csv())?;
    fs::write(out_dir.join("log.json"), serde_json::to_string_pretty(&outcome.log)?)?;
    write_snapshot(
        &out_dir,
        "train",
        json!({
            "model": config,
            "train": train_cfg,
            "dataset": format!("{:?}", args.data.dataset),
            "data_path": args.data.data,
            "augment": !args.no_augment,
            "fold": args.fold,
            "seed": args.seed,
        }),
    )?;
    println!(
        "best epoch {} (val acc {:.2}%); weights at {}",
        outcome.best_epoch,
        outcome.best_val_accuracy * 100.0,
        weights_path.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Weight file produced by `train`
    #[arg(long)]
    weights: PathBuf,
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let config = args.model.to_config()?;
    let out_dir = args.out.resolve()?;
    let model = load_weights(&args.weights, &config)?;
    let samples = load_samples(&args.data, config.input_channels == 1)?;
    let schema = schema_for(args.data.dataset, config.num_classes);
    let evaluation = evaluate(&model, &samples, &schema)?;

    fs::write(out_dir.join("metrics.json"), serde_json::to_string_pretty(&evaluation.report)?)?;
    let mut text = format!(
        "samples {}\noverall accuracy {:.2}%\ninformation density {:.1}\n",
        evaluation.report.sample_count, evaluation.report.overall_accuracy_pct, evaluation.report.information_density
    );
    if let Some(v) = evaluation.report.pose_variance {
        text.push_str(&format!("pose variance {v:.2}\n"));
    }
    for row in &evaluation.report.per_pose {
        text.push_str(&format!("pose {:>8}  n={:<6} acc {:.2}%\n", row.pose, row.support, row.accuracy_pct));
    }
    text.push('\n');
    text.push_str(&evaluation.confusion.to_text(&schema));
    for (pose, cm) in &evaluation.per_pose_confusion {
        text.push_str(&format!("\npose {pose}:\n"));
        text.push_str(&cm.to_text(&schema));
    }
    fs::write(out_dir.join("metrics.txt"), &text)?;
    write_snapshot(
        &out_dir,
        "eval",
        json!({ "model": config, "weights": args.weights, "dataset": format!("{:?}", args.data.dataset) }),
    )?;
    print!("{text}");
    Ok(())
}

#[derive(Args, Debug)]
struct GradcamArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    weights: PathBuf,
    /// Explain these sample ids (default: the first --count samples)
    #[arg(long, value_delimiter = ',')]
    sample_ids: Vec<String>,
    #[arg(long, default_value_t = 4)]
    count: usize,
    /// Target class (default: each sample's own label)
    #[arg(long)]
    class: Option<usize>,
    /// Feature map to read: block-4 before pooling (8x8 at the default
    /// geometry) or after (4x4)
    #[arg(long, value_enum, default_value_t = TapArg::Prepool)]
    tap: TapArg,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum TapArg {
    Prepool,
    Output,
}

fn run_gradcam(args: &GradcamArgs) -> Result<()> {
    let config = args.model.to_config()?;
    let out_dir = args.out.resolve()?;
    let model = load_weights(&args.weights, &config)?;
    let samples = load_samples(&args.data, config.input_channels == 1)?;
    let tap = match args.tap {
        TapArg::Prepool => GradCamTap::Block4PrePool,
        TapArg::Output => GradCamTap::Block4Output,
    };
    let chosen: Vec<&Sample> = if args.sample_ids.is_empty() {
        samples.iter().take(args.count).collect()
    } else {
        let mut found = Vec::new();
        for id in &args.sample_ids {
            let s = samples
                .iter()
                .find(|s| &s.id == id)
                .ok_or_else(|| Error::data(format!("sample id `{id}` not found in the dataset")))?;
            found.push(s);
        }
        found
    };
    if chosen.is_empty() {
        return Err(Error::data("no samples selected for grad-cam"));
    }
    let mut written = 0usize;
    for s in chosen {
        let class = args.class.unwrap_or(s.label);
        let hm = grad_cam(&model, s, class, tap)?;
        let stem = format!("heatmap_{}_{}", s.id.replace(['/', '\\'], "_"), class);
        let png = out_dir.join(format!("{stem}.png"));
        heatmap_to_png(&hm, &png)?;
        let sidecar = json!({
            "sample_id": hm.sample_id,
            "class_index": hm.class_index,
            "zero_gradient": hm.zero_gradient,
            "tap": format!("{tap:?}"),
            "png": png,
        });
        fs::write(out_dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?)?;
        if hm.zero_gradient {
            eprintln!("warning: zero gradient field for {} class {class}; flat map written", s.id);
        }
        println!("written: {}", png.display());
        written += 1;
    }
    write_snapshot(
        &out_dir,
        "gradcam",
        json!({ "model": config, "weights": args.weights, "tap": format!("{tap:?}"), "heatmaps": written }),
    )?;
    Ok(())
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    out: OutArgs,
    /// Accuracy in percent, for information density
    #[arg(long)]
    acc: Option<f64>,
    /// Parameter count, for information density
    #[arg(long)]
    params: Option<usize>,
    /// Per-pose accuracies (comma separated), for pose variance
    #[arg(long, value_delimiter = ',')]
    pose_acc: Vec<f64>,
    /// Overall accuracy, for pose variance
    #[arg(long)]
    overall: Option<f64>,
}

fn run_metrics(args: &MetricsArgs) -> Result<()> {
    let out_dir = args.out.resolve()?;
    let mut body = serde_json::Map::new();
    let mut printed = false;
    if let (Some(acc), Some(params)) = (args.acc, args.params) {
        let id = information_density(acc, params)?;
        println!("information density: {id:.1}");
        body.insert("information_density".into(), json!(id));
        body.insert("acc".into(), json!(acc));
        body.insert("params".into(), json!(params));
        printed = true;
    }
    if let Some(overall) = args.overall {
        if !args.pose_acc.is_empty() {
            let var = pose_variance(&args.pose_acc, overall)?;
            println!("pose variance: {var:.2}");
            body.insert("pose_variance".into(), json!(var));
            body.insert("pose_acc".into(), json!(args.pose_acc));
            body.insert("overall".into(), json!(overall));
            printed = true;
        }
    }
    if !printed {
        return Err(Error::InvalidConfig(
            "metrics needs --acc with --params (information density) and/or --pose-acc with --overall (pose variance)"
                .into(),
        ));
    }
    fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(body.clone()))?,
    )?;
    write_snapshot(&out_dir, "metrics", serde_json::Value::Object(body))?;
    Ok(())
}

#[derive(Args, Debug)]
struct DataPrepareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Convert images to a single grayscale channel
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    grayscale: bool,
}

fn run_data_prepare(args: &DataPrepareArgs) -> Result<()> {
    let out_dir = args.out.resolve()?;
    let samples = load_samples(&args.data, args.grayscale)?;
    if samples.is_empty() {
        return Err(Error::data("dataset contains no samples"));
    }
    let cache_path = out_dir.join("samples.bin");
    data::cache::write_cache(&samples, &cache_path)?;
    let n_train = samples.iter().filter(|s| s.split == Split::Train).count();
    let n_val = samples.iter().filter(|s| s.split == Split::Val).count();
    let n_test = samples.iter().filter(|s| s.split == Split::Test).count();
    println!(
        "cached {} samples ({} train / {} val / {} test) at {}",
        samples.len(),
        n_train,
        n_val,
        n_test,
        cache_path.display()
    );
    write_snapshot(
        &out_dir,
        "data-prepare",
        json!({
            "dataset": format!("{:?}", args.data.dataset),
            "data_path": args.data.data,
            "grayscale": args.grayscale,
            "samples": samples.len(),
            "train": n_train, "val": n_val, "test": n_test,
        }),
    )?;
    Ok(())
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) => EXIT_USAGE,
        Error::Data { .. }
        | Error::BadMagic
        | Error::UnsupportedVersion(_)
        | Error::ConfigHashMismatch { .. }
        | Error::TruncatedPayload(_)
        | Error::ChecksumMismatch { .. }
        | Error::Io(_)
        | Error::Json(_) => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Audit(a) => run_audit(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Gradcam(a) => run_gradcam(a),
        Command::Metrics(a) => run_metrics(a),
        Command::DataPrepare(a) => run_data_prepare(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
