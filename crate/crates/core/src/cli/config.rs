//! Experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Combinatorial,
    Antivoter,
    Binarycode,
    Curieweiss,
    Independent,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Combinatorial => "combinatorial",
            ModelKind::Antivoter => "antivoter",
            ModelKind::Binarycode => "binarycode",
            ModelKind::Curieweiss => "curieweiss",
            ModelKind::Independent => "independent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Upper end of the grid: a number or `"auto"` for the model's range cap.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum XMax {
    #[default]
    Auto,
    Value(f64),
}

impl Serialize for XMax {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            XMax::Auto => s.serialize_str("auto"),
            XMax::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for XMax {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(XMax::Value(v)),
            Raw::Word(w) if w == "auto" => Ok(XMax::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "x_max must be a number or \"auto\", got {w:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub x_max: XMax,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    41
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_max: XMax::Auto,
            points: default_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub seed: u64,
    pub samples: usize,
    #[serde(default)]
    pub burnin: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default = "empty_params")]
    pub model_params: serde_json::Value,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub mc: Option<McSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Sampling workers; part of the config so runs are reproducible.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Directory relative paths in `model_params` are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::domain(format!("config: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| Error::domain(format!("config: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::domain(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.points < 2 {
            return Err(Error::domain(format!(
                "grid.points must be >= 2, got {}",
                self.grid.points
            )));
        }
        if let XMax::Value(v) = self.grid.x_max {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("grid.x_max must be positive, got {v}")));
            }
        }
        if let Some(mc) = &self.mc {
            if mc.samples < 1 {
                return Err(Error::domain("mc.samples must be >= 1"));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::domain("workers must be >= 1"));
        }
        if !self.model_params.is_object() {
            return Err(Error::domain("model_params must be a table"));
        }
        Ok(())
    }

    /// Typed view of `model_params`.
    pub fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.model_params.clone())
            .map_err(|e| Error::domain(format!("model_params for {}: {e}", self.model.name())))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
