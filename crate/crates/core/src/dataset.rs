//! Labeled sample manifests, stratified splits and noisy augmentation.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgio::{read_pgm, GrayImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub path: PathBuf,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<Entry>,
    class_names: Vec<String>,
}

impl DatasetManifest {
    /// Checks that paths are unique and every label is a listed class.
    pub fn new(entries: Vec<Entry>, class_names: Vec<String>) -> Result<Self> {
        let classes: HashSet<&str> = class_names.iter().map(String::as_str).collect();
        if classes.len() != class_names.len() {
            return Err(Error::Dataset("duplicate class name".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !classes.contains(e.label.as_str()) {
                return Err(Error::Dataset(format!(
                    "{}: label {} is not a known class",
                    e.path.display(),
                    e.label
                )));
            }
            if !seen.insert(&e.path) {
                return Err(Error::Dataset(format!("duplicate path {}", e.path.display())));
            }
        }
        Ok(Self {
            entries,
            class_names,
        })
    }

    /// Manifest whose classes are the sorted distinct labels of `entries`.
    pub fn from_entries(entries: Vec<Entry>) -> Result<Self> {
        let classes: BTreeSet<String> = entries.iter().map(|e| e.label.clone()).collect();
        Self::new(entries, classes.into_iter().collect())
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == label)
    }

    /// `path,label` CSV with a header line.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "label"])
            .map_err(|e| Error::Dataset(e.to_string()))?;
        for e in &self.entries {
            w.write_record([e.path.to_string_lossy().as_ref(), e.label.as_str()])
                .map_err(|e| Error::Dataset(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Dataset(e.to_string()))
    }
}

#[derive(Debug)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub error: Error,
}

#[derive(Debug)]
pub struct ScanResult {
    pub manifest: DatasetManifest,
    pub skipped: Vec<SkippedFile>,
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|d| d.map(|d| d.path()).map_err(|e| Error::io(path, e)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Scans `<root>/<label>/<file>.pgm`. Files that do not parse as PGM are
/// skipped and reported.
pub fn scan_directory(root: &Path) -> Result<ScanResult> {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for dir in sorted_dir(root)? {
        if !dir.is_dir() {
            continue;
        }
        let Some(label) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        for file in sorted_dir(&dir)? {
            if !file.is_file() || !is_pgm(&file) {
                continue;
            }
            let parsed = fs::read(&file)
                .map_err(|e| Error::io(&file, e))
                .and_then(|b| read_pgm(&b));
            match parsed {
                Ok(_) => entries.push(Entry {
                    path: file,
                    label: label.clone(),
                }),
                Err(error) => skipped.push(SkippedFile { path: file, error }),
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Dataset(format!(
            "no PGM samples under {}",
            root.display()
        )));
    }
    Ok(ScanResult {
        manifest: DatasetManifest::from_entries(entries)?,
        skipped,
    })
}

/// Reads a `path,label` CSV manifest. Relative paths resolve against the
/// manifest's directory.
pub fn read_csv_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "label" {
        return Err(Error::Dataset(format!(
            "{}: header must be `path,label`",
            path.display()
        )));
    }
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        let p = PathBuf::from(&rec[0]);
        entries.push(Entry {
            path: if p.is_relative() { base.join(p) } else { p },
            label: rec[1].to_string(),
        });
    }
    if entries.is_empty() {
        return Err(Error::Dataset(format!("{}: empty manifest", path.display())));
    }
    DatasetManifest::from_entries(entries)
}

/// A directory root is scanned; anything else is read as a CSV manifest.
pub fn load_source(path: &Path) -> Result<ScanResult> {
    if path.is_dir() {
        scan_directory(path)
    } else {
        Ok(ScanResult {
            manifest: read_csv_manifest(path)?,
            skipped: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 198.0 / 332.0,
            valid_frac: 67.0 / 332.0,
            test_frac: 67.0 / 332.0,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.valid_frac, self.test_frac];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidConfig("split fractions must lie in [0, 1]".into()));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// Parses `a,b,c` as relative weights, e.g. `198,67,67` or `0.8,0,0.2`.
    pub fn parse_weights(text: &str, seed: u64) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidConfig(format!("split {text}: {e}")))?;
        if parts.len() != 3 || parts.iter().any(|p| p.is_nan() || *p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "split {text}: expected three non-negative numbers"
            )));
        }
        let total: f64 = parts.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidConfig(format!("split {text}: weights sum to zero")));
        }
        let spec = Self {
            train_frac: parts[0] / total,
            valid_frac: parts[1] / total,
            test_frac: parts[2] / total,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: DatasetManifest,
    pub valid: DatasetManifest,
    pub test: DatasetManifest,
}

pub const MIN_PER_CLASS: usize = 3;

/// Stratified split: each class is shuffled with the seeded generator and
/// cut at `round(n·train)` and `round(n·(train + valid))`.
pub fn split(m: &DatasetManifest, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut train, mut valid, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for class in m.class_names() {
        let mut members: Vec<&Entry> = m.entries.iter().filter(|e| &e.label == class).collect();
        let n = members.len();
        if n < MIN_PER_CLASS {
            return Err(Error::Dataset(format!(
                "class {class} has {n} samples, need at least {MIN_PER_CLASS}"
            )));
        }
        members.shuffle(&mut rng);
        let a = ((n as f64 * spec.train_frac).round() as usize).min(n);
        let b = ((n as f64 * (spec.train_frac + spec.valid_frac)).round() as usize).clamp(a, n);
        train.extend(members[..a].iter().map(|&e| e.clone()));
        valid.extend(members[a..b].iter().map(|&e| e.clone()));
        test.extend(members[b..].iter().map(|&e| e.clone()));
    }
    let names = m.class_names().to_vec();
    Ok(Split {
        train: DatasetManifest::new(train, names.clone())?,
        valid: DatasetManifest::new(valid, names.clone())?,
        test: DatasetManifest::new(test, names)?,
    })
}

/// Salt-and-pepper noise: each pixel independently becomes 0 or 255 (even
/// odds) with probability `rate`.
pub fn augment_noisy(img: &GrayImage, rate: f64, seed: u64) -> Result<GrayImage> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("noise rate {rate} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    for r in 0..img.height() {
        for c in 0..img.width() {
            if rng.random_bool(rate) {
                out.set(r, c, if rng.random_bool(0.5) { 255 } else { 0 });
            }
        }
    }
    Ok(out)
}
