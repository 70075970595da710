use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "cnn")]
    Cnn,
    #[serde(rename = "bilstm")]
    BiLstm,
    #[serde(rename = "cnn-bilstm")]
    CnnBiLstm,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Cnn, Architecture::BiLstm, Architecture::CnnBiLstm];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Cnn => "cnn",
            Architecture::BiLstm => "bilstm",
            Architecture::CnnBiLstm => "cnn-bilstm",
        }
    }

    /// 2 for CNN; 4 for the recurrent models.
    pub fn dropout_sites(self) -> usize {
        match self {
            Architecture::Cnn => 2,
            Architecture::BiLstm | Architecture::CnnBiLstm => 4,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "cnn" => Ok(Architecture::Cnn),
            "bilstm" => Ok(Architecture::BiLstm),
            "cnn-bilstm" => Ok(Architecture::CnnBiLstm),
            _ => Err(Error::InvalidConfig(format!(
                "unknown architecture {s:?} (expected cnn, bilstm or cnn-bilstm)"
            ))),
        }
    }
}

/// The three protocols: gold/gold, automatic/automatic, automatic/gold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    E1,
    E2,
    E3,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::E1, Experiment::E2, Experiment::E3];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::E1 => "E1",
            Experiment::E2 => "E2",
            Experiment::E3 => "E3",
        }
    }

    pub fn learning_rate(self) -> f64 {
        match self {
            Experiment::E1 => 0.0001,
            Experiment::E2 | Experiment::E3 => 0.001,
        }
    }

    /// Rates in site order. CNN: spatial, after the dense-ReLU layer.
    /// Recurrent models: spatial, LSTM input, after the BiLSTM, after the
    /// dense-ReLU layer.
    pub fn dropout(self, arch: Architecture) -> Vec<f64> {
        match (arch, self) {
            (Architecture::Cnn, Experiment::E1) => vec![0.2, 0.2],
            (Architecture::Cnn, Experiment::E2) => vec![0.4, 0.5],
            (Architecture::Cnn, Experiment::E3) => vec![0.3, 0.5],
            (_, Experiment::E1) => vec![0.3, 0.3, 0.3, 0.4],
            (_, Experiment::E2) => vec![0.2, 0.2, 0.2, 0.5],
            (_, Experiment::E3) => vec![0.3, 0.3, 0.3, 0.5],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E1" => Ok(Experiment::E1),
            "E2" => Ok(Experiment::E2),
            "E3" => Ok(Experiment::E3),
            _ => Err(Error::InvalidConfig(format!(
                "unknown experiment {s:?} (expected e1, e2 or e3)"
            ))),
        }
    }
}

/// Layer widths. The defaults are the published ones; tests shrink them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub lstm_units: usize,
    pub dense_units: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            conv_filters: 64,
            kernel_size: 5,
            lstm_units: 64,
            dense_units: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: Vec<f64>,
    pub seed: u64,
    pub max_len: usize,
    pub dims: ModelDims,
}

impl Default for TrainConfig {
    /// BiLSTM under the second protocol.
    fn default() -> Self {
        TrainConfig::for_experiment(Architecture::BiLstm, Experiment::E2)
    }
}

impl TrainConfig {
    pub fn for_experiment(arch: Architecture, exp: Experiment) -> Self {
        TrainConfig {
            learning_rate: exp.learning_rate(),
            batch_size: 100,
            epochs: 10,
            dropout: exp.dropout(arch),
            seed: 42,
            max_len: 30,
            dims: ModelDims::default(),
        }
    }

    pub fn validate(&self, arch: Architecture) -> Result<()> {
        if self.dropout.len() != arch.dropout_sites() {
            return Err(Error::BadDropoutScheduleLength {
                arch: arch.to_string(),
                expected: arch.dropout_sites(),
                found: self.dropout.len(),
            });
        }
        if let Some(r) = self.dropout.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::InvalidConfig(format!("dropout rate {r} outside [0, 1)")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_len == 0 {
            return Err(Error::InvalidConfig("batch_size and max_len must be at least 1".into()));
        }
        let d = &self.dims;
        if d.conv_filters == 0 || d.kernel_size == 0 || d.lstm_units == 0 || d.dense_units == 0 {
            return Err(Error::InvalidConfig("layer sizes must be at least 1".into()));
        }
        if arch != Architecture::BiLstm && self.max_len < d.kernel_size {
            return Err(Error::InvalidConfig(format!(
                "max_len {} shorter than kernel size {}",
                self.max_len, d.kernel_size
            )));
        }
        Ok(())
    }

    /// Sets one field from its textual form. Keys are the field names, with
    /// the layer sizes at top level.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}")))
        }
        match key.trim() {
            "learning_rate" | "lr" => self.learning_rate = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            "conv_filters" => self.dims.conv_filters = num(key, value)?,
            "kernel_size" => self.dims.kernel_size = num(key, value)?,
            "lstm_units" => self.dims.lstm_units = num(key, value)?,
            "dense_units" => self.dims.dense_units = num(key, value)?,
            "dropout" => {
                self.dropout = value
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num(key, s))
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::InvalidConfig(format!("unknown training key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines or a flat JSON object on top of `self`.
    /// Keys it does not know are returned instead of rejected, so a
    /// larger config file can carry them.
    pub fn apply_text(&mut self, text: &str) -> Result<Vec<(String, String)>> {
        let mut rest = Vec::new();
        for (k, v) in parse_pairs(text)? {
            match self.set(&k, &v) {
                Err(Error::InvalidConfig(msg)) if msg.starts_with("unknown training key") => rest.push((k, v)),
                other => other?,
            }
        }
        Ok(rest)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<Vec<(String, String)>> {
        self.apply_text(&data::read_to_string(path)?)
    }
}

/// Flattens `key=value` lines (with `#` comments) or a JSON object into
/// string pairs, in file order. JSON arrays become comma lists; nested
/// objects are flattened one level (`dims.kernel_size` becomes `kernel_size`).
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(trimmed)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidConfig("config JSON must be an object".into()))?;
        let mut out = Vec::new();
        for (k, v) in obj {
            match v {
                serde_json::Value::Object(inner) => {
                    for (k2, v2) in inner {
                        out.push((k2.clone(), json_scalar(v2)));
                    }
                }
                _ => out.push((k.clone(), json_scalar(v))),
            }
        }
        return Ok(out);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected key=value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn json_scalar(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Array(items) => items.iter().map(json_scalar).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}
