//! Run configuration file.
//!
//! A flat TOML table; every key is optional except `algo`, and unknown keys
//! are rejected.
//!
//! ```toml
//! algo = "onnc"          # onnc | onnr
//! k = 1
//! n = 10
//! l = 100
//! epochs = 10
//! lr = 0.01
//! alpha = 0.1
//! hidden = [64]
//! activation = "tanh"    # tanh | relu
//! ratio_head = "linear"  # linear | softplus (onnr only)
//! seed = 0
//! threshold = "noise_floor:2"   # noise_floor:F | mean_std:F | absolute:V
//! min_distance = 100     # defaults to l
//! margin = 50
//! series = "data/series_000.csv"
//! annotation = "data/series_000.cps"
//! scores = "out/scores.csv"
//! report = "out/report.txt"
//! plot = "out/plot.svg"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use nncpd_core::detect::{Algorithm, Threshold};
use nncpd_core::metrics::DEFAULT_MARGIN;
use nncpd_core::nn::{Activation, Architecture};
use nncpd_core::{DetectorConfig, Head};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algo: String,
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default = "defaults::n")]
    pub n: usize,
    #[serde(default = "defaults::l")]
    pub l: usize,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::lr")]
    pub lr: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "defaults::activation")]
    pub activation: String,
    #[serde(default = "defaults::ratio_head")]
    pub ratio_head: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::threshold")]
    pub threshold: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<usize>,
    #[serde(default = "defaults::margin")]
    pub margin: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PathBuf>,
}

mod defaults {
    use nncpd_core::DetectorConfig;

    fn base() -> DetectorConfig {
        DetectorConfig::default()
    }
    pub fn k() -> usize {
        base().k
    }
    pub fn n() -> usize {
        base().n
    }
    pub fn l() -> usize {
        base().l
    }
    pub fn epochs() -> usize {
        base().n_epochs
    }
    pub fn lr() -> f64 {
        base().lr
    }
    pub fn alpha() -> f64 {
        base().alpha
    }
    pub fn hidden() -> Vec<usize> {
        base().arch.hidden
    }
    pub fn activation() -> String {
        "tanh".into()
    }
    pub fn ratio_head() -> String {
        "linear".into()
    }
    pub fn threshold() -> String {
        super::format_threshold(base().peaks.threshold)
    }
    pub fn margin() -> usize {
        nncpd_core::metrics::DEFAULT_MARGIN
    }
}

impl RunConfig {
    /// Defaults for everything but the algorithm.
    pub fn new(algo: Algorithm) -> Self {
        Self {
            algo: algo.name().into(),
            k: defaults::k(),
            n: defaults::n(),
            l: defaults::l(),
            epochs: defaults::epochs(),
            lr: defaults::lr(),
            alpha: defaults::alpha(),
            hidden: defaults::hidden(),
            activation: defaults::activation(),
            ratio_head: defaults::ratio_head(),
            seed: 0,
            threshold: defaults::threshold(),
            min_distance: None,
            margin: DEFAULT_MARGIN,
            series: None,
            annotation: None,
            scores: None,
            report: None,
            plot: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Format {
            path: path.into(),
            msg: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Ok(self.algo.parse()?)
    }

    /// Validated detector configuration.
    pub fn detector_config(&self) -> Result<DetectorConfig> {
        let activation = match self.activation.as_str() {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            other => return Err(Error::Config(format!("unknown activation `{other}` (tanh or relu)"))),
        };
        let ratio_head = match self.ratio_head.as_str() {
            "linear" => Head::Linear,
            "softplus" => Head::Softplus,
            other => return Err(Error::Config(format!("unknown ratio_head `{other}` (linear or softplus)"))),
        };
        let mut cfg = DetectorConfig {
            k: self.k,
            n: self.n,
            l: self.l,
            n_epochs: self.epochs,
            lr: self.lr,
            alpha: self.alpha,
            arch: Architecture {
                hidden: self.hidden.clone(),
                activation,
            },
            ratio_head,
            seed: self.seed,
            ..DetectorConfig::default()
        };
        cfg.peaks.threshold = parse_threshold(&self.threshold)?;
        cfg.peaks.min_distance = self.min_distance;
        cfg.validate()?;
        if self.margin == 0 {
            return Err(Error::Config("margin must be >= 1".into()));
        }
        Ok(cfg)
    }
}

/// Parses `noise_floor:F`, `mean_std:F` or `absolute:V`.
pub fn parse_threshold(spec: &str) -> Result<Threshold> {
    let (rule, value) = spec
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("threshold `{spec}` must look like rule:value")))?;
    let value: f64 = value
        .trim()
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| Error::Config(format!("threshold value in `{spec}` is not a finite number")))?;
    match rule.trim() {
        "noise_floor" => Ok(Threshold::NoiseFloor(value)),
        "mean_std" => Ok(Threshold::MeanPlusStd(value)),
        "absolute" => Ok(Threshold::Absolute(value)),
        other => Err(Error::Config(format!(
            "unknown threshold rule `{other}` (noise_floor, mean_std or absolute)"
        ))),
    }
}

pub fn format_threshold(t: Threshold) -> String {
    match t {
        Threshold::NoiseFloor(f) => format!("noise_floor:{f}"),
        Threshold::MeanPlusStd(f) => format!("mean_std:{f}"),
        Threshold::Absolute(v) => format!("absolute:{v}"),
    }
}
