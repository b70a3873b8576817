//! Subcommand implementations behind the `glyphrec` binary.
//!
//! Each `cmd_*` function does the work and returns its result; printing is
//! left to the binary so the commands stay testable.

pub mod config;
pub mod report;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context};
use rayon::prelude::*;

use crate::components::{label_components, Connectivity};
use crate::dataset::{augment_noisy, load_source, split, DatasetManifest, SkippedFile, Split};
use crate::features::{extract, fit_minmax, ExtractOptions, FeatureVector, FEATURE_LEN};
use crate::imgio::{read_pgm, to_gray, write_pgm, BinaryImage, GrayImage, PgmMode};
use crate::mlp::{load_model, save_model, train_scg, Batch, MlpModel, Prediction, TrainReport};
use crate::preprocess::{preprocess, PreprocessConfig};

pub use config::Settings;
pub use report::EvalReport;

/// Records every image file a command opens.
#[derive(Debug, Default)]
pub struct AccessLog(Mutex<Vec<PathBuf>>);

impl AccessLog {
    fn record(&self, path: &Path) {
        self.0.lock().expect("log poisoned").push(path.to_path_buf());
    }

    /// Paths read so far, sorted.
    pub fn paths(&self) -> Vec<PathBuf> {
        let mut v = self.0.lock().expect("log poisoned").clone();
        v.sort();
        v
    }
}

pub fn read_image(path: &Path) -> anyhow::Result<GrayImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_pgm(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn read_logged(path: &Path, log: &AccessLog) -> anyhow::Result<GrayImage> {
    log.record(path);
    read_image(path)
}

/// Full preprocessing and feature extraction of one grayscale image.
pub fn image_features(img: &GrayImage, cfg: &PreprocessConfig) -> anyhow::Result<FeatureVector> {
    let stages = preprocess(img, cfg).context("preprocess")?;
    let cs = label_components(&stages.normalized, Connectivity::Eight);
    let opts = ExtractOptions {
        dilate_endpoints: cfg.dilate_endpoints,
    };
    extract(&stages.deslanted, &stages.normalized, &cs, opts).context("extract")
}

pub fn cmd_preprocess(
    input: &Path,
    output: &Path,
    cfg: &PreprocessConfig,
    dump_stages: Option<&Path>,
) -> anyhow::Result<BinaryImage> {
    let img = read_image(input)?;
    let stages = preprocess(&img, cfg).context("preprocess")?;
    if let Some(dir) = dump_stages {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut all = vec![("1_median", stages.median.clone())];
        all.extend(stages.named_binary().map(|(name, b)| (name, to_gray(b))));
        for (name, g) in all {
            let path = dir.join(format!("{name}.pgm"));
            fs::write(&path, write_pgm(&g, PgmMode::Binary))
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    fs::write(output, write_pgm(&to_gray(&stages.normalized), PgmMode::Binary))
        .with_context(|| format!("writing {}", output.display()))?;
    Ok(stages.normalized)
}

fn features_of(entries: &DatasetManifest, cfg: &PreprocessConfig, log: &AccessLog) -> anyhow::Result<Vec<FeatureVector>> {
    entries
        .entries()
        .par_iter()
        .map(|e| {
            let img = read_logged(&e.path, log)?;
            image_features(&img, cfg).with_context(|| e.path.display().to_string())
        })
        .collect()
}

/// One CSV row per image: `path,label,f0,…,f132`.
pub fn cmd_features(data: &Path, cfg: &PreprocessConfig) -> anyhow::Result<Vec<u8>> {
    let scan = load_source(data).context("scan")?;
    let vectors = features_of(&scan.manifest, cfg, &AccessLog::default())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["path".to_string(), "label".to_string()];
    header.extend((0..FEATURE_LEN).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for (e, v) in scan.manifest.entries().iter().zip(&vectors) {
        let mut row = vec![e.path.display().to_string(), e.label.clone()];
        row.extend(v.as_slice().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub report: TrainReport,
    pub split: Split,
    /// Rows in the training batch, noisy copies included.
    pub train_samples: usize,
    pub skipped: Vec<SkippedFile>,
    /// Every image opened after the split, sorted.
    pub files_read: Vec<PathBuf>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// scan → split → ideal + noisy train features → min-max fit on train →
/// SCG with validation early stopping → model file.
pub fn cmd_train(
    data: &Path,
    out_model: &Path,
    settings: &Settings,
    splits_dir: Option<&Path>,
) -> anyhow::Result<TrainOutcome> {
    settings.validate().context("config")?;
    let scan = load_source(data).context("scan")?;
    let parts = split(&scan.manifest, &settings.split_spec()?).context("split")?;
    if parts.train.is_empty() {
        bail!("split: training set is empty");
    }
    if let Some(dir) = splits_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, m) in [("train", &parts.train), ("valid", &parts.valid), ("test", &parts.test)] {
            let path = dir.join(format!("{name}.csv"));
            fs::write(&path, m.to_csv()?).with_context(|| format!("writing {}", path.display()))?;
        }
    }

    let log = AccessLog::default();
    let cfg = &settings.pre;
    let classes = scan.manifest.class_names().to_vec();
    let train_entries = parts.train.entries();
    let per_image: Vec<Vec<(FeatureVector, usize)>> = train_entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let class = scan.manifest.class_index(&e.label).expect("label from manifest");
            let img = read_logged(&e.path, &log)?;
            let ctx = || e.path.display().to_string();
            let mut out = vec![(image_features(&img, cfg).with_context(ctx)?, class)];
            if settings.augment > 0.0 {
                let seed = splitmix64(settings.seed ^ splitmix64(i as u64));
                let noisy = augment_noisy(&img, settings.augment, seed).context("augment")?;
                out.push((image_features(&noisy, cfg).with_context(|| format!("noisy copy of {}", ctx()))?, class));
            }
            Ok(out)
        })
        .collect::<anyhow::Result<_>>()?;
    let train_rows: Vec<(FeatureVector, usize)> = per_image.into_iter().flatten().collect();
    let valid_vecs = features_of(&parts.valid, cfg, &log)?;

    let norm = fit_minmax(train_rows.iter().map(|(v, _)| v.as_slice())).context("normalize")?;
    let mut train = Batch::new(FEATURE_LEN, classes.len());
    for (v, class) in &train_rows {
        train.push_class(&norm.apply(v.as_slice())?, *class)?;
    }
    let mut valid = Batch::new(FEATURE_LEN, classes.len());
    for (v, e) in valid_vecs.iter().zip(parts.valid.entries()) {
        let class = scan.manifest.class_index(&e.label).expect("label from manifest");
        valid.push_class(&norm.apply(v.as_slice())?, class)?;
    }

    let mlp_cfg = settings.mlp_config(classes.len());
    let (net, report) = train_scg(&mlp_cfg, &train, (!valid.is_empty()).then_some(&valid)).context("train")?;
    let model = MlpModel::new(net, classes, norm).context("train")?;
    fs::write(out_model, save_model(&model)).with_context(|| format!("save: writing {}", out_model.display()))?;
    Ok(TrainOutcome {
        model,
        report,
        split: parts,
        train_samples: train.len(),
        skipped: scan.skipped,
        files_read: log.paths(),
    })
}

pub fn load_model_file(path: &Path) -> anyhow::Result<MlpModel> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_model(&bytes).with_context(|| format!("loading model {}", path.display()))
}

pub fn cmd_eval(model_path: &Path, data: &Path, cfg: &PreprocessConfig) -> anyhow::Result<EvalReport> {
    let model = load_model_file(model_path)?;
    let scan = load_source(data).context("scan")?;
    let unknown: Vec<&str> = scan
        .manifest
        .class_names()
        .iter()
        .filter(|l| model.index_of(l).is_none())
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        bail!("labels not known to the model: {}", unknown.join(", "));
    }
    let vectors = features_of(&scan.manifest, cfg, &AccessLog::default())?;
    let pairs = scan
        .manifest
        .entries()
        .iter()
        .zip(&vectors)
        .map(|(e, v)| {
            let p = model.predict(v.as_slice(), false)?;
            Ok((model.index_of(&e.label).expect("checked above"), p.index))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(EvalReport::from_pairs(model.labels.clone(), pairs)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub prediction: Prediction,
    /// `(label, score)` pairs, best first; equal scores keep label order.
    pub scores: Vec<(String, f64)>,
}

pub fn cmd_predict(model_path: &Path, image: &Path, cfg: &PreprocessConfig) -> anyhow::Result<Ranked> {
    let model = load_model_file(model_path)?;
    let img = read_image(image)?;
    let v = image_features(&img, cfg)?;
    let prediction = model.predict(v.as_slice(), false)?;
    let mut scores: Vec<(String, f64)> = model.labels.iter().cloned().zip(prediction.scores.iter().copied()).collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(Ranked { prediction, scores })
}

pub fn cmd_gen_synthetic(out: &Path, classes: usize, per_class: usize, seed: u64) -> anyhow::Result<usize> {
    Ok(synth::generate(out, classes, per_class, seed)?)
}
