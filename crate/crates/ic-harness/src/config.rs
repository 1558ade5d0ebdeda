use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AdversarySpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config field `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
    #[error("config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Challenge-response over UPEF.
    Cr,
    /// Iterative scheme over mUPEF.
    Iter,
    /// Iterative scheme over UF through the five-bit code.
    IterUf,
    /// Challenge-response compiled to UF with AMD codes.
    UfCompiled,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Cr => "cr",
            SchemeKind::Iter => "iter",
            SchemeKind::IterUf => "iter_uf",
            SchemeKind::UfCompiled => "uf_compiled",
        }
    }

    pub fn is_cr(self) -> bool {
        matches!(self, SchemeKind::Cr | SchemeKind::UfCompiled)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: SchemeKind,
    /// Length of the inner protocol.
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t_values: Vec<usize>,
    #[serde(default)]
    pub adversary: AdversarySpec,
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Round horizon of the UF compiler; defaults to the iteration ceiling's
    /// wire length.
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Repetition factor of the toy inner wrappers.
    #[serde(default = "default_repetition")]
    pub repetition: usize,
    /// Alphabet of the random inner protocol; the iterative schemes need 2.
    #[serde(default)]
    pub alphabet: Option<u32>,
    /// Flip-schedule constant `C`, `1/297` by default.
    #[serde(default)]
    pub schedule_c: Option<f64>,
    /// Run the trace checks on challenge-response traces.
    #[serde(default = "default_true")]
    pub check_lemmas: bool,
    #[serde(default)]
    pub relaxed_termination: bool,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_repetition() -> usize {
    3
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
            .unwrap_or(if self.scheme.is_cr() { 4 } else { 2 })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(invalid("N", "must be positive"));
        }
        if self.t_values.is_empty() {
            return Err(invalid("T", "needs at least one value"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be positive"));
        }
        if self.repetition == 0 {
            return Err(invalid("repetition", "must be positive"));
        }
        let a = self.alphabet();
        if a < 2 {
            return Err(invalid("alphabet", "must be at least 2"));
        }
        if !self.scheme.is_cr() && a != 2 {
            return Err(invalid(
                "alphabet",
                "the iterative schemes run binary protocols",
            ));
        }
        if let Some(c) = self.schedule_c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid("schedule_c", "must be a positive number"));
            }
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be positive"));
        }
        self.adversary
            .validate(self.scheme)
            .map_err(|msg| invalid("adversary", msg))
    }
}
