use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bootperc::{ModelParams, ScalingFamily, SequenceSpec};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Flags shared by every subcommand. A `--config` JSON file may supply any
/// of them under the same names; explicit flags win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Opts {
    /// Number of vertices (scientific notation accepted)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    /// Edge probability
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Activation threshold
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    /// Number of seeds
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<u64>,
    /// Supercriticality ratio a/a_c
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Sequence spec JSON file
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    /// Scaling family as tag:constants, e.g. asym_bc:1 or between_acnp_n:lin/0.5
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Output file; stdout when absent
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Stop the exact DP at this time and report P(T <= tau)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncate: Option<u64>,
    /// Comma-separated n values
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    /// JSON file whose keys mirror the flags above
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! fill {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.take(); } )*
    };
}

impl Opts {
    /// Merges the config file, if any, under the explicit flags.
    pub fn resolve(mut self) -> Result<Opts> {
        if let Some(path) = self.config.take() {
            let text = read(&path)?;
            let mut file: Opts =
                serde_json::from_str(&text).with_context(|| format!("bad config file {}", path.display()))?;
            fill!(
                self, file, n, p, r, a, alpha, spec, family, eps, replicates, seed, format, out, truncate, ladder,
                suite
            );
        }
        Ok(self)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn n_u64(&self) -> Result<u64> {
        let n = need(self.n, "n")?;
        if !(n >= 1.0 && n.fract() == 0.0 && n <= 9_007_199_254_740_992.0) {
            bail!("--n {n} must be a positive integer below 2^53");
        }
        Ok(n as u64)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let r = need(self.r, "r")?;
        Ok(ModelParams::with_degenerate(self.n_u64()?, need(self.p, "p")?, r, need(self.a, "a")?)?)
    }

    pub fn sequence(&self) -> Result<SequenceSpec> {
        let path = self.spec.as_ref().ok_or_else(|| anyhow!("--spec is required"))?;
        Ok(SequenceSpec::from_json(&read(path)?)?)
    }

    pub fn family(&self) -> Result<ScalingFamily> {
        Ok(self.family.as_deref().ok_or_else(|| anyhow!("--family is required"))?.parse()?)
    }
}

pub fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("--{flag} is required"))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}
