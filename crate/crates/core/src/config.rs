//! Run configuration from command-line flags and an optional TOML file.
//!
//! Precedence is flag, then file key, then built-in default. Every
//! rejection names the offending key.

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::ProtocolConfig;
use crate::qnd::DeviceParams;
use crate::states::FidelityVector;

pub const DEFAULT_PAIRS: usize = 1000;
pub const DEFAULT_FIDELITIES: [f64; 4] = [0.7, 0.1, 0.1, 0.1];
pub const DEFAULT_THETA: f64 = FRAC_PI_4;
pub const DEFAULT_ALPHA: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("expected `json` or `csv`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub pairs: usize,
    pub fidelities: FidelityVector,
    pub theta: f64,
    pub alpha: f64,
    pub dephase_p: f64,
    pub homodyne_error: f64,
    pub evil_bob_flip_p: f64,
    pub seed: u64,
    pub format: OutputFormat,
    pub emit_transcript: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let [f, f1, f2, f3] = DEFAULT_FIDELITIES;
        Self {
            pairs: DEFAULT_PAIRS,
            fidelities: FidelityVector::new(f, f1, f2, f3).expect("default fidelities are valid"),
            theta: DEFAULT_THETA,
            alpha: DEFAULT_ALPHA,
            dephase_p: 0.0,
            homodyne_error: 0.0,
            evil_bob_flip_p: 0.0,
            seed: 0,
            format: OutputFormat::Json,
            emit_transcript: false,
        }
    }
}

impl RunConfig {
    pub fn device(&self) -> DeviceParams {
        DeviceParams {
            theta: self.theta,
            alpha: self.alpha,
            homodyne_error: self.homodyne_error,
        }
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            pairs: self.pairs,
            fidelities: self.fidelities,
            device: self.device(),
            dephase_p: self.dephase_p,
            evil_bob_flip_p: self.evil_bob_flip_p,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pairs == 0 {
            return Err(ConfigError::invalid("pairs", "must be at least 1"));
        }
        if !(self.theta > 0.0 && self.theta <= std::f64::consts::PI) {
            return Err(ConfigError::invalid(
                "theta",
                format!("{} is not in (0, pi]", self.theta),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ConfigError::invalid(
                "alpha",
                format!("{} must be positive", self.alpha),
            ));
        }
        for (key, p) in [("dephase_p", self.dephase_p), ("evil_bob_flip_p", self.evil_bob_flip_p)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::invalid(key, format!("{p} is not in [0, 1]")));
            }
        }
        if !(0.0..0.5).contains(&self.homodyne_error) {
            return Err(ConfigError::invalid(
                "homodyne_error",
                format!("{} is not in [0, 0.5)", self.homodyne_error),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("config file {path}: {reason}")]
    File { path: String, reason: String },

    #[error(transparent)]
    Cli(#[from] clap::Error),
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hyperdistill",
    version,
    about = "Seeded simulation of hyperentanglement-assisted distillation for double-server blind QC"
)]
struct Cli {
    /// TOML file with default values for any of the options below
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Number of source pairs
    #[arg(long, value_name = "INT")]
    pairs: Option<usize>,
    /// Mixture weights F,F1,F2,F3 of Φ⁺,Φ⁻,Ψ⁺,Ψ⁻
    #[arg(long, value_name = "F,F1,F2,F3")]
    fidelities: Option<String>,
    /// Kerr phase per photon, radians
    #[arg(long, value_name = "RADIANS", allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Probe coherent amplitude (recorded only)
    #[arg(long, value_name = "REAL", allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Probability of a collective spatial phase flip per pair
    #[arg(long, value_name = "PROB", allow_hyphen_values = true)]
    dephase_p: Option<f64>,
    /// Probability each server misreads its probe
    #[arg(long, value_name = "PROB", allow_hyphen_values = true)]
    homodyne_error: Option<f64>,
    /// Probability Bob1 reports the opposite of his readout
    #[arg(long, value_name = "PROB", allow_hyphen_values = true)]
    evil_bob_flip_p: Option<f64>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Draw the seed from OS entropy and print it
    #[arg(long, conflicts_with = "seed")]
    entropy: bool,
    #[arg(long, value_name = "json|csv")]
    format: Option<OutputFormat>,
    /// Report destination (stdout when absent)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the message transcript here
    #[arg(long, value_name = "PATH")]
    transcript: Option<PathBuf>,
    /// Run this many consecutive seeds in parallel and report aggregate statistics
    #[arg(long, value_name = "N_SEEDS")]
    sweep: Option<usize>,
    /// Exit 0 even when the transcript audit fails
    #[arg(long)]
    allow_audit_fail: bool,
    /// Include wall-clock duration in the report
    #[arg(long)]
    timing: bool,
}

/// Keys accepted in a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    pairs: Option<usize>,
    fidelities: Option<Vec<f64>>,
    theta: Option<f64>,
    alpha: Option<f64>,
    dephase_p: Option<f64>,
    homodyne_error: Option<f64>,
    evil_bob_flip_p: Option<f64>,
    seed: Option<u64>,
    format: Option<OutputFormat>,
    out: Option<PathBuf>,
    transcript: Option<PathBuf>,
    sweep: Option<usize>,
    allow_audit_fail: Option<bool>,
    timing: Option<bool>,
}

/// A fully resolved invocation of the command-line tool.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub run: RunConfig,
    pub out: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
    pub sweep: Option<usize>,
    pub allow_audit_fail: bool,
    pub timing: bool,
    /// Set when the seed came from OS entropy.
    pub entropy_seed: bool,
}

fn parse_fidelity_list(key: &str, values: &[f64]) -> Result<FidelityVector, ConfigError> {
    let [f, f1, f2, f3] = <[f64; 4]>::try_from(values)
        .map_err(|_| ConfigError::invalid(key, format!("expected 4 values, got {}", values.len())))?;
    FidelityVector::from_input(f, f1, f2, f3).map_err(|e| ConfigError::invalid(key, e.to_string()))
}

fn parse_fidelity_text(text: &str) -> Result<FidelityVector, ConfigError> {
    let values = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ConfigError::invalid("fidelities", format!("`{text}`: {e}")))?;
    parse_fidelity_list("fidelities", &values)
}

fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let file_err = |reason: String| ConfigError::File {
        path: path.display().to_string(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
    toml::from_str(&text).map_err(|e| file_err(e.to_string()))
}

/// Parses command-line tokens (including the program name) and the
/// optional `--config` file into an [`Invocation`].
pub fn parse_config<I, T>(args: I) -> Result<Invocation, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let file = match &cli.config {
        Some(path) => read_file(path)?,
        None => FileConfig::default(),
    };
    let defaults = RunConfig::default();

    let fidelities = match (&cli.fidelities, &file.fidelities) {
        (Some(text), _) => parse_fidelity_text(text)?,
        (None, Some(values)) => parse_fidelity_list("fidelities", values)?,
        (None, None) => defaults.fidelities,
    };
    let (seed, entropy_seed) = if cli.entropy {
        (rand::random::<u64>(), true)
    } else {
        (cli.seed.or(file.seed).unwrap_or(defaults.seed), false)
    };
    let transcript = cli.transcript.or(file.transcript);
    let run = RunConfig {
        pairs: cli.pairs.or(file.pairs).unwrap_or(defaults.pairs),
        fidelities,
        theta: cli.theta.or(file.theta).unwrap_or(defaults.theta),
        alpha: cli.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        dephase_p: cli.dephase_p.or(file.dephase_p).unwrap_or(defaults.dephase_p),
        homodyne_error: cli
            .homodyne_error
            .or(file.homodyne_error)
            .unwrap_or(defaults.homodyne_error),
        evil_bob_flip_p: cli
            .evil_bob_flip_p
            .or(file.evil_bob_flip_p)
            .unwrap_or(defaults.evil_bob_flip_p),
        seed,
        format: cli.format.or(file.format).unwrap_or(defaults.format),
        emit_transcript: transcript.is_some(),
    };
    run.validate()?;
    let sweep = cli.sweep.or(file.sweep);
    if sweep == Some(0) {
        return Err(ConfigError::invalid("sweep", "must be at least 1"));
    }
    Ok(Invocation {
        run,
        out: cli.out.or(file.out),
        transcript,
        sweep,
        allow_audit_fail: cli.allow_audit_fail || file.allow_audit_fail.unwrap_or(false),
        timing: cli.timing || file.timing.unwrap_or(false),
        entropy_seed,
    })
}
