use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use glyphrec::cli::{self, Settings};

#[derive(Parser)]
#[command(name = "glyphrec", version, about = "Isolated handwritten character recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every pipeline command. Flags override the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// Flat key=value config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    norm_size: Option<usize>,
    #[arg(long)]
    fill_threshold: Option<u8>,
    #[arg(long)]
    median_passes: Option<usize>,
    #[arg(long)]
    slant_clamp_deg: Option<f64>,
    /// Dilate before thinning for the end-point count
    #[arg(long)]
    dilate_endpoints: bool,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    sse_target: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
    /// Seed for the split, noisy copies and weight init
    #[arg(long)]
    seed: Option<u64>,
    /// Salt-and-pepper rate for one noisy copy per training image; 0 disables
    #[arg(long)]
    augment: Option<f64>,
    /// Train/valid/test weights, e.g. 198,67,67
    #[arg(long)]
    split: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize one image and write it as PGM
    Preprocess {
        input: PathBuf,
        output: PathBuf,
        /// Write every intermediate stage into this directory
        #[arg(long)]
        dump_stages: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Feature CSV (path,label,f0..f132) for a directory or manifest
    Features {
        data: PathBuf,
        /// Output file; stdout when absent
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on a directory or manifest
    Train {
        data: PathBuf,
        /// Model file to write
        #[arg(long, short)]
        out: PathBuf,
        /// Write train/valid/test manifests here
        #[arg(long)]
        splits_dir: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a model; prints the per-class table
    Eval {
        model: PathBuf,
        data: PathBuf,
        /// Write the confusion matrix as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Classify one image
    Predict {
        model: PathBuf,
        image: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate the procedural glyph corpus
    GenSynth {
        out: PathBuf,
        #[arg(long, default_value_t = 28)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn settings(common: &Common, flags: &TrainFlags) -> anyhow::Result<Settings> {
    let mut s = match &common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let mut set = |key: &str, value: Option<String>| -> anyhow::Result<()> {
        if let Some(v) = value {
            s.set(key, &v)?;
        }
        Ok(())
    };
    set("norm_size", common.norm_size.map(|v| v.to_string()))?;
    set("fill_threshold", common.fill_threshold.map(|v| v.to_string()))?;
    set("median_passes", common.median_passes.map(|v| v.to_string()))?;
    set("slant_clamp_deg", common.slant_clamp_deg.map(|v| v.to_string()))?;
    set("dilate_endpoints", common.dilate_endpoints.then(|| "true".to_string()))?;
    set("hidden", flags.hidden.map(|v| v.to_string()))?;
    set("max_epochs", flags.max_epochs.map(|v| v.to_string()))?;
    set("sse_target", flags.sse_target.map(|v| v.to_string()))?;
    set("patience", flags.patience.map(|v| v.to_string()))?;
    set("init_scale", flags.init_scale.map(|v| v.to_string()))?;
    set("seed", flags.seed.map(|v| v.to_string()))?;
    set("augment", flags.augment.map(|v| v.to_string()))?;
    set("split", flags.split.clone())?;
    s.validate()?;
    Ok(s)
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let none = TrainFlags::default();
    match cli.command {
        Command::Preprocess {
            input,
            output,
            dump_stages,
            common,
        } => {
            let s = settings(&common, &none)?;
            let img = cli::cmd_preprocess(&input, &output, &s.pre, dump_stages.as_deref())?;
            println!("{}: {}x{}", output.display(), img.width(), img.height());
        }
        Command::Features { data, out, common } => {
            let s = settings(&common, &none)?;
            write_out(out.as_deref(), &cli::cmd_features(&data, &s.pre)?)?;
        }
        Command::Train {
            data,
            out,
            splits_dir,
            flags,
            common,
        } => {
            let s = settings(&common, &flags)?;
            let o = cli::cmd_train(&data, &out, &s, splits_dir.as_deref())?;
            for skip in &o.skipped {
                eprintln!("skipped {}: {}", skip.path.display(), skip.error);
            }
            println!(
                "train {} ({} samples), valid {}, test {}",
                o.split.train.len(),
                o.train_samples,
                o.split.valid.len(),
                o.split.test.len()
            );
            println!("epochs: {}", o.report.epochs_run);
            println!("final sse: {:.6e}", o.report.final_sse);
            if let Some(v) = o.report.best_valid_sse {
                println!("best valid sse: {v:.6e}");
            }
            println!("stop: {}", o.report.stop_reason);
            println!("model: {}", out.display());
        }
        Command::Eval {
            model,
            data,
            csv,
            common,
        } => {
            let s = settings(&common, &none)?;
            let report = cli::cmd_eval(&model, &data, &s.pre)?;
            print!("{}", report.table());
            if let Some(path) = csv {
                write_out(Some(&path), &report.confusion_csv()?)?;
            }
        }
        Command::Predict { model, image, common } => {
            let s = settings(&common, &none)?;
            let r = cli::cmd_predict(&model, &image, &s.pre)?;
            println!("{}", r.prediction.label);
            for (label, score) in &r.scores {
                println!("{label}\t{score:.6}");
            }
        }
        Command::GenSynth {
            out,
            classes,
            per_class,
            seed,
        } => {
            let n = cli::cmd_gen_synthetic(&out, classes, per_class, seed)?;
            println!("wrote {n} images to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
