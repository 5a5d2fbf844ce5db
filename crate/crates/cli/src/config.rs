//! Experiment configuration: TOML file, flag overrides and validation.
//!
//! Precedence, lowest first: built-in defaults, the config file, the
//! `SCHRO_ULA_OUT` environment variable (output root only), command-line
//! flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the default output root.
pub const OUT_ENV: &str = "SCHRO_ULA_OUT";

const DEFAULT_OUT: &str = "schro-ula-out";

#[derive(Debug, Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ParameterMode {
    /// `ε, K, γ_max, η` from the asymptotic formulas.
    PaperAsymptotic,
    /// `η = 1/log N`, `K` from the measured curvature, `γ` from the
    /// preconditioned stiffness.
    Practical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Domain dimension `d` (1 or 2).
    pub dim: usize,
    #[serde(rename = "D")]
    pub dsz: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub k_min: f64,
    /// Constant boundary value `g`.
    pub g: f64,
    pub n_interior: usize,
    pub mode: ParameterMode,
    pub gamma: Option<f64>,
    /// Target accuracy; sets `γ` through the `γ_ε` formula when `gamma` is
    /// not given.
    pub epsilon_target: Option<f64>,
    #[serde(rename = "J_in")]
    pub j_in: usize,
    #[serde(rename = "J")]
    pub j: usize,
    /// Root seed, split per stage.
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub truth: TruthConfig,
    pub surrogate: SurrogateConfig,
    pub initializer: InitConfig,
    pub map: MapSettings,
    pub checks: CheckConfig,
    pub curvature: CurvatureConfig,
    /// Keep every `thin`-th chain sample in the chain CSV.
    pub thin: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            dsz: 4,
            n: 200,
            alpha: 2.0,
            k_min: 0.0,
            g: 100.0,
            n_interior: 255,
            mode: ParameterMode::Practical,
            gamma: None,
            epsilon_target: None,
            j_in: 1000,
            j: 2000,
            seed: 0,
            output: None,
            truth: TruthConfig::default(),
            surrogate: SurrogateConfig::default(),
            initializer: InitConfig::default(),
            map: MapSettings::default(),
            checks: CheckConfig::default(),
            curvature: CurvatureConfig::default(),
            thin: 1,
        }
    }
}

/// Ground truth `θ₀`: explicit coefficients, or
/// `θ₀,k = amplitude·(−1)^{k−1}/k^{decay}` for `k ≤ D0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthConfig {
    pub theta0: Option<Vec<f64>>,
    pub amplitude: f64,
    pub decay: f64,
    #[serde(rename = "D0")]
    pub d0: Option<usize>,
    pub noise: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self { theta0: None, amplitude: 0.5, decay: 2.0, d0: None, noise: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    /// Practical-mode radius; `1/log N` when absent.
    pub eta: Option<f64>,
    /// Overrides the `K` lower bound.
    #[serde(rename = "K")]
    pub k: Option<f64>,
    /// Calibration constant of the `K` lower bound.
    pub k_constant: f64,
    pub n_probe: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { eta: None, k: None, k_constant: 8.0, n_probe: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    /// Smoothness of the ridge penalty `δ²λ_k^α`. Larger values shrink the
    /// low modes and bias `θ_init` at moderate `N`, hence the default 1.
    pub alpha: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSettings {
    pub max_iters: usize,
    pub rel_tolerance: f64,
}

impl Default for MapSettings {
    fn default() -> Self {
        Self { max_iters: 20_000, rel_tolerance: 1e-8 }
    }
}

/// Constants of the dimension conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// `D ≤ c0 · N^{d/(2α+d)}`.
    pub c0: f64,
    /// `‖𝒢(θ₀,D) − 𝒢(θ₀)‖ ≤ c0_prime · N^{−α/(2α+d)}`.
    pub c0_prime: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { c0: 1.0, c0_prime: 1.0, c1: 1.0, c2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvatureConfig {
    #[serde(rename = "D_values")]
    pub d_values: Vec<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_probe: usize,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self { d_values: vec![4, 8, 16, 32], n: 20_000, n_probe: 0 }
    }
}

/// Command-line overrides; `None` keeps the file value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML experiment file.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the file and SCHRO_ULA_OUT).
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "n-obs", global = true)]
    pub n: Option<usize>,
    /// Number of coefficients `D`.
    #[arg(long = "dsize", global = true)]
    pub dsz: Option<usize>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long = "j-in", global = true)]
    pub j_in: Option<usize>,
    #[arg(long = "j", global = true)]
    pub j: Option<usize>,
    #[arg(long, global = true)]
    pub mode: Option<ParameterMode>,
    #[arg(long = "n-interior", global = true)]
    pub n_interior: Option<usize>,
}

impl ExperimentConfig {
    /// Loads the file named in `ov` (if any) and applies the overrides.
    pub fn resolve(ov: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match &ov.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = ov.$field.clone() { cfg.$field = v; })* };
        }
        set!(seed, n, dsz, dim, alpha, j_in, j, mode, n_interior);
        if ov.gamma.is_some() {
            cfg.gamma = ov.gamma;
        }
        cfg.output = Some(match (&ov.out, &cfg.output) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => p.clone(),
            (None, None) => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUT.into()),
        });
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::Error::new(e).context(format!("reading config {}", path.display())))?;
        toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())).into())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| DEFAULT_OUT.into())
    }

    pub fn init_alpha(&self) -> f64 {
        self.initializer.alpha
    }

    /// Checks every hard constraint before any computation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !matches!(self.dim, 1 | 2) {
            return Err(bad(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if self.dsz == 0 {
            return Err(bad("D must be positive"));
        }
        if self.n < 3 {
            return Err(bad(format!("N must be at least 3 (log N > 1), got {}", self.n)));
        }
        let positive = [
            ("alpha", self.alpha),
            ("g", self.g),
            ("surrogate.k_constant", self.surrogate.k_constant),
            ("initializer.alpha", self.initializer.alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(bad(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.k_min >= 0.0) || !self.k_min.is_finite() {
            return Err(bad(format!("k_min must be nonnegative, got {}", self.k_min)));
        }
        if self.n_interior < 3 {
            return Err(bad("n_interior must be at least 3"));
        }
        let modes = if self.dim == 1 { self.n_interior } else { self.n_interior * self.n_interior };
        if self.dsz > modes / 2 {
            return Err(bad(format!("D = {} is too large for a grid with {modes} interior nodes", self.dsz)));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("epsilon_target", self.epsilon_target),
            ("surrogate.eta", self.surrogate.eta),
            ("surrogate.K", self.surrogate.k),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(bad(format!("{name} must be positive and finite, got {v}")));
                }
            }
        }
        if self.j == 0 {
            return Err(bad("J must be positive"));
        }
        if self.thin == 0 {
            return Err(bad("thin must be positive"));
        }
        if self.surrogate.n_probe == 0 {
            return Err(bad("surrogate.n_probe must be positive"));
        }
        if !(self.truth.noise >= 0.0) {
            return Err(bad("truth.noise must be nonnegative"));
        }
        if let Some(t) = &self.truth.theta0 {
            if t.is_empty() || t.iter().any(|v| !v.is_finite()) {
                return Err(bad("truth.theta0 must be a nonempty list of finite numbers"));
            }
        }
        if self.curvature.d_values.iter().any(|&d| d == 0 || d > modes / 2) {
            return Err(bad("curvature.D_values must lie in 1..=n_modes/2"));
        }
        if self.curvature.n < 3 {
            return Err(bad("curvature.N must be at least 3"));
        }
        Ok(())
    }

    /// Soft conditions, reported as warnings.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let d = self.dim as f64;
        let cap = self.checks.c0 * (self.n as f64).powf(d / (2.0 * self.alpha + d));
        if self.dsz as f64 > cap {
            out.push(format!(
                "D = {} exceeds c0·N^(d/(2α+d)) = {cap:.3}; the dimension condition for the contraction theory is violated",
                self.dsz
            ));
        }
        out
    }

    /// The truth coefficients `θ₀` (length `D0`).
    pub fn theta0(&self) -> Vec<f64> {
        if let Some(t) = &self.truth.theta0 {
            return t.clone();
        }
        let d0 = self.truth.d0.unwrap_or(self.dsz);
        (1..=d0)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * self.truth.amplitude / (k as f64).powf(self.truth.decay)
            })
            .collect()
    }
}
