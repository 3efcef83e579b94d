//! Flat `key = value` run configuration.
//!
//! Resolution order, highest first: command-line flags, the config file,
//! the `MWAD_OUT_DIR` environment variable (output directory only), and the
//! built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnRoles, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, TargetMode, WindowMode};
use crate::scoring::ThresholdPolicy;
use crate::training::{OptimizerKind, TrainConfig};
use crate::wgat::{self, Activation};
use crate::wlae;

pub const OUT_DIR_ENV: &str = "MWAD_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub timestamp_column: String,
    pub label_column: String,
    /// Feature columns removed before training.
    pub exclude: Vec<String>,
    pub train_ratio: f64,
    pub w1: usize,
    pub w2: usize,
    pub hidden: usize,
    pub leaky_slope: f64,
    pub activation: Activation,
    pub window_mode: WindowMode,
    pub target_mode: TargetMode,
    pub detach_target: bool,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub gradient_clip: f64,
    pub shuffle: bool,
    pub threshold_policy: ThresholdPolicy,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: None,
            timestamp_column: "timestamp".into(),
            label_column: "label".into(),
            exclude: Vec::new(),
            train_ratio: SplitSpec::default().train_ratio,
            w1: wgat::DEFAULT_W1,
            w2: wlae::DEFAULT_W2,
            hidden: wlae::DEFAULT_HIDDEN,
            leaky_slope: wgat::DEFAULT_LEAKY_SLOPE,
            activation: Activation::Sigmoid,
            window_mode: WindowMode::Adaptive,
            target_mode: t.target_mode,
            detach_target: t.detach_target,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            optimizer: t.optimizer,
            gradient_clip: t.gradient_clip,
            shuffle: t.shuffle,
            threshold_policy: ThresholdPolicy::Mean,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Every accepted key, in the order [`RunConfig::to_kv`] writes them.
pub const KEYS: [&str; 23] = [
    "data",
    "timestamp_column",
    "label_column",
    "exclude",
    "train_ratio",
    "w1",
    "w2",
    "hidden",
    "leaky_slope",
    "activation",
    "window_mode",
    "target_mode",
    "detach_target",
    "learning_rate",
    "epochs",
    "batch_size",
    "seed",
    "optimizer",
    "gradient_clip",
    "shuffle",
    "threshold_policy",
    "out_dir",
    "format_version",
];

/// Version stamped into every artifact's embedded config.
pub const FORMAT_VERSION: u32 = 1;

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for `{key}`"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "data" => self.data = if v.is_empty() { None } else { Some(v.into()) },
            "timestamp_column" => self.timestamp_column = v.into(),
            "label_column" => self.label_column = v.into(),
            "exclude" => {
                self.exclude = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "train_ratio" => self.train_ratio = parse(&key, v)?,
            "w1" => self.w1 = parse(&key, v)?,
            "w2" => self.w2 = parse(&key, v)?,
            "hidden" => self.hidden = parse(&key, v)?,
            "leaky_slope" => self.leaky_slope = parse(&key, v)?,
            "activation" => {
                self.activation = match v {
                    "sigmoid" => Activation::Sigmoid,
                    "identity" => Activation::Identity,
                    _ => return Err(Error::Config(format!("bad value `{v}` for `activation`"))),
                }
            }
            "window_mode" => self.window_mode = v.parse()?,
            "target_mode" => self.target_mode = v.parse()?,
            "detach_target" => self.detach_target = parse_bool(&key, v)?,
            "learning_rate" | "lr" => self.learning_rate = parse(&key, v)?,
            "epochs" => self.epochs = parse(&key, v)?,
            "batch_size" => self.batch_size = parse(&key, v)?,
            "seed" => self.seed = parse(&key, v)?,
            "optimizer" => self.optimizer = v.parse()?,
            "gradient_clip" => self.gradient_clip = parse(&key, v)?,
            "shuffle" => self.shuffle = parse_bool(&key, v)?,
            "threshold_policy" => self.threshold_policy = v.parse()?,
            "out_dir" => self.out_dir = v.into(),
            "format_version" => {
                let found: u32 = parse(&key, v)?;
                if found != FORMAT_VERSION {
                    return Err(Error::Incompatible {
                        found,
                        expected: FORMAT_VERSION,
                    });
                }
            }
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            out.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in Self::parse_kv(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Layers defaults, the output-directory environment variable, an
    /// optional file and explicit overrides, lowest precedence first.
    pub fn resolve(
        env_out_dir: Option<&str>,
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(dir) = env_out_dir.filter(|d| !d.is_empty()) {
            cfg.out_dir = dir.into();
        }
        if let Some(f) = file {
            cfg.apply_file(f)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config(format!("train_ratio {} outside (0, 1)", self.train_ratio)));
        }
        if self.w1 == 0 || self.w2 == 0 || self.hidden == 0 {
            return Err(Error::Config("w1, w2 and hidden must be at least 1".into()));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::Config("leaky_slope must be finite".into()));
        }
        self.train_config().validate()
    }

    pub fn roles(&self) -> ColumnRoles {
        ColumnRoles {
            timestamp: self.timestamp_column.clone(),
            label: self.label_column.clone(),
        }
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            train_ratio: self.train_ratio,
            preserve_order: true,
        }
    }

    pub fn model_spec(&self, n: usize) -> ModelSpec {
        ModelSpec {
            n,
            w1: self.w1,
            w2: self.w2,
            hidden: self.hidden,
            leaky_slope: self.leaky_slope,
            activation: self.activation,
            mode: self.window_mode,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            optimizer: self.optimizer,
            gradient_clip: self.gradient_clip,
            shuffle: self.shuffle,
            target_mode: self.target_mode,
            detach_target: self.detach_target,
        }
    }

    /// Canonical `key = value` text; parsing it back gives an equal config.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        put("data", self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("timestamp_column", self.timestamp_column.clone());
        put("label_column", self.label_column.clone());
        put("exclude", self.exclude.join(","));
        put("train_ratio", format!("{:?}", self.train_ratio));
        put("w1", self.w1.to_string());
        put("w2", self.w2.to_string());
        put("hidden", self.hidden.to_string());
        put("leaky_slope", format!("{:?}", self.leaky_slope));
        put(
            "activation",
            match self.activation {
                Activation::Sigmoid => "sigmoid",
                Activation::Identity => "identity",
            }
            .into(),
        );
        put("window_mode", self.window_mode.as_str().into());
        put("target_mode", self.target_mode.as_str().into());
        put("detach_target", self.detach_target.to_string());
        put("learning_rate", format!("{:?}", self.learning_rate));
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("seed", self.seed.to_string());
        put("optimizer", self.optimizer.as_str().into());
        put("gradient_clip", format!("{:?}", self.gradient_clip));
        put("shuffle", self.shuffle.to_string());
        put("threshold_policy", self.threshold_policy.as_str().into());
        put("out_dir", self.out_dir.display().to_string());
        put("format_version", FORMAT_VERSION.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.w1, c.w2, c.epochs), (15, 11, 10));
        assert_eq!((c.learning_rate, c.train_ratio), (1e-2, 0.7));
    }

    #[test]
    fn kv_round_trip() {
        let mut c = RunConfig::default();
        c.exclude = vec!["a".into(), "b".into()];
        c.window_mode = WindowMode::Manual;
        c.learning_rate = 0.003;
        c.data = Some("x.csv".into());
        let mut back = RunConfig::default();
        back.apply_text(&c.to_kv()).unwrap();
        assert_eq!(back, c);
        for k in KEYS {
            assert!(c.to_kv().contains(&format!("{k} = ")), "{k}");
        }
    }

    #[test]
    fn bad_keys_and_values() {
        let mut c = RunConfig::default();
        assert!(matches!(c.set("nope", "1"), Err(Error::Config(_))));
        assert!(matches!(c.set("w1", "x"), Err(Error::Config(_))));
        assert!(c.set("lr", "0.5").is_ok());
        assert!(c.set("window-mode", "none").is_ok());
        assert_eq!(c.window_mode, WindowMode::None);
    }
}
