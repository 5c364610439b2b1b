//! Experiment parameters from flags and an optional JSON config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

macro_rules! experiment_config {
    ($( $(#[$meta:meta])* $name:ident : $ty:ty ),* $(,)?) => {
        /// Every field is optional; flags take precedence over the config file.
        #[derive(clap::Args, Deserialize, Debug, Clone, Default)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        pub struct Config {
            $( $(#[$meta])* pub $name: Option<$ty>, )*
        }

        impl Config {
            /// `self` wins wherever both are set.
            pub fn over(self, base: Config) -> Config {
                Config { $( $name: self.$name.or(base.$name), )* }
            }
        }
    };
}

experiment_config! {
    /// Built-in fixture: moving-average, fourier, f1, random, diag-linear, rademacher.
    #[arg(long)]
    fixture: String,
    /// Piecewise-constant frame in JSON.
    #[arg(long)]
    frame: PathBuf,
    /// Dimension of the fixture.
    #[arg(long)]
    d: usize,
    /// Number of cells of a sampled or random fixture.
    #[arg(long)]
    cells: usize,
    /// Use the continuous generator instead of its midpoint samples.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    generator: bool,
    /// Weight: one, zero, const:<x>, linear, indicator:<a>-<b>,..., file:<path>.
    #[arg(long)]
    tau: String,
    /// Target accuracy ε.
    #[arg(long)]
    eps: f64,
    /// Constant weight τ₀ ∈ (0, 1) for bisection.
    #[arg(long)]
    tau0: f64,
    /// Sweep τ₀ ∈ {0.1, …, 0.9} (bisect) or max ‖φ_i‖² (aw).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    sweep: bool,
    /// Number of vectors (aw).
    #[arg(long)]
    n: usize,
    /// Largest squared norm before Bessel normalization (aw).
    #[arg(long)]
    max_norm_sq: f64,
    #[arg(long)]
    seed: u64,
    /// greedy, local_search or randomized_rounding.
    #[arg(long)]
    strategy: String,
    /// Also run exhaustive enumeration and compare (aw).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    oracle: bool,
    /// Number of uniform cells, a power of two (rademacher).
    #[arg(long)]
    resolution: usize,
    /// Number of random dyadic unions to evaluate (rademacher).
    #[arg(long)]
    search_budget: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: PathBuf,
    /// Write the command's CSV table here.
    #[arg(long)]
    csv: PathBuf,
    /// Omit the timestamp so identical runs give identical bytes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    deterministic: bool,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("invalid config {}: {e}", path.display())))
    }

    pub fn flag(v: Option<bool>) -> bool {
        v.unwrap_or(false)
    }

    pub fn eps_or(&self, default: f64) -> Result<f64, CliError> {
        let eps = self.eps.unwrap_or(default);
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(CliError::validation(format!("--eps must be a positive finite number, got {eps}")));
        }
        Ok(eps)
    }

    pub fn tau0(&self) -> Result<f64, CliError> {
        let tau0 = self.tau0.ok_or_else(|| CliError::validation("--tau0 is required"))?;
        if !(tau0 > 0.0 && tau0 < 1.0) {
            return Err(CliError::validation(format!("--tau0 must lie in the open interval (0, 1), got {tau0}")));
        }
        Ok(tau0)
    }

    pub fn positive(value: Option<usize>, default: usize, flag: &str) -> Result<usize, CliError> {
        let v = value.unwrap_or(default);
        if v == 0 {
            return Err(CliError::validation(format!("--{flag} must be at least 1")));
        }
        Ok(v)
    }
}
