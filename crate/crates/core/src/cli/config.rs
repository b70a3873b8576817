//! Flat `key=value` run configuration shared by all subcommands.

use std::path::Path;

use crate::dataset::SplitSpec;
use crate::error::{Error, Result};
use crate::mlp::MlpConfig;
use crate::preprocess::PreprocessConfig;

pub const DEFAULT_AUGMENT: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub pre: PreprocessConfig,
    pub mlp: MlpConfig,
    /// Salt-and-pepper rate for the noisy copy of each training image; 0 disables.
    pub augment: f64,
    /// `a,b,c` split weights.
    pub split: String,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            pre: PreprocessConfig::default(),
            mlp: MlpConfig::default(),
            augment: DEFAULT_AUGMENT,
            split: "198,67,67".into(),
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{key}={value}: {e}")))
}

impl Settings {
    /// Keys beyond the preprocessing ones.
    pub const KEYS: &'static [&'static str] = &[
        "hidden",
        "max_epochs",
        "sse_target",
        "init_scale",
        "patience",
        "augment",
        "split",
        "seed",
    ];

    pub fn from_kv(text: &str) -> Result<Self> {
        let (pre, rest) = PreprocessConfig::from_kv(text)?;
        let mut s = Self { pre, ..Self::default() };
        for (key, value) in &rest {
            s.set(key, value)?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "hidden" => self.mlp.n_hidden = parse(key, value)?,
            "max_epochs" => self.mlp.max_epochs = parse(key, value)?,
            "sse_target" => self.mlp.sse_target = parse(key, value)?,
            "init_scale" => self.mlp.init_scale = parse(key, value)?,
            "patience" => self.mlp.patience = parse(key, value)?,
            "augment" => self.augment = parse(key, value)?,
            "split" => self.split = value.to_string(),
            "seed" => self.seed = parse(key, value)?,
            k if PreprocessConfig::KEYS.contains(&k) => self.pre.set(k, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::parse_weights(&self.split, self.seed)
    }

    /// Training config with the run seed and the given class count.
    pub fn mlp_config(&self, n_out: usize) -> MlpConfig {
        MlpConfig {
            n_out,
            seed: self.seed,
            ..self.mlp.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pre.validate()?;
        self.mlp.validate()?;
        self.split_spec()?;
        if !(0.0..=1.0).contains(&self.augment) {
            return Err(Error::InvalidConfig(format!(
                "augment must be in [0, 1], got {}",
                self.augment
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let s = Settings::from_kv("norm_size=30\nhidden=12 # small\n\nseed=9\nsplit=8,1,1\n").unwrap();
        assert_eq!(s.pre.norm_size, 30);
        assert_eq!(s.mlp.n_hidden, 12);
        assert_eq!(s.seed, 9);
        assert_eq!(s.mlp.max_epochs, MlpConfig::default().max_epochs);
        assert!((s.split_spec().unwrap().train_frac - 0.8).abs() < 1e-12);
        assert_eq!(s.mlp_config(5).n_out, 5);
        assert_eq!(s.mlp_config(5).seed, 9);
    }

    #[test]
    fn unknown_and_malformed_keys_fail() {
        assert!(Settings::from_kv("colour=red").is_err());
        assert!(Settings::from_kv("hidden=many").is_err());
        assert!(Settings::from_kv("fill_threshold=9").is_err());
    }

    #[test]
    fn defaults_validate() {
        Settings::default().validate().unwrap();
        let s = Settings {
            augment: 1.5,
            ..Settings::default()
        };
        assert!(s.validate().is_err());
    }
}
