//! Unadjusted Langevin chains, ergodic averages and the burn-in and step
//! size formulas.
//!
//! One step is `ϑ' = ϑ + γ∇log π(ϑ) + √(2γ)ξ` with `ξ ~ N(0, I)`. With a
//! diagonal preconditioner `A` the chain runs in `ψ`-coordinates,
//! `ϑ = θ_init + Aψ`, so `ψ' = ψ + γA∇log π(ϑ) + √(2γ)ξ`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::likelihood::LogDensity;

/// Name of the random generator, recorded in run manifests.
pub const GENERATOR: &str = "ChaCha20Rng (rand_chacha 0.9) + ziggurat StandardNormal (rand_distr 0.5)";

/// Largest `J · D` kept as a full sample matrix under [`Storage::Auto`].
pub const FULL_STORAGE_LIMIT: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    #[default]
    Auto,
    Full,
    /// Keep running moments and every `thin`-th sample only.
    Streaming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub gamma: f64,
    pub burn_in: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Independent stream index, used to split replicate chains.
    #[serde(default)]
    pub stream: u64,
    /// Diagonal of the preconditioner `A`.
    #[serde(default)]
    pub precondition: Option<Vec<f64>>,
    #[serde(default)]
    pub storage: Storage,
    /// Thinning interval for streaming storage.
    #[serde(default = "default_thin")]
    pub thin: usize,
}

fn default_thin() -> usize {
    1
}

impl ChainConfig {
    pub fn new(gamma: f64, burn_in: usize, n_samples: usize, seed: u64) -> Self {
        Self { gamma, burn_in, n_samples, seed, stream: 0, precondition: None, storage: Storage::Auto, thin: 1 }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step size must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thinning interval must be positive".into()));
        }
        if let Some(a) = &self.precondition {
            check_dim(dim, a.len())?;
            if a.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument("preconditioner entries must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Running sums for the posterior mean and diagonal second moment.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub count: usize,
    pub sum: DVector<f64>,
    pub sum_sq: DVector<f64>,
}

impl Accumulator {
    pub fn new(dim: usize) -> Self {
        Self { count: 0, sum: DVector::zeros(dim), sum_sq: DVector::zeros(dim) }
    }

    pub fn push(&mut self, x: &DVector<f64>) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x.component_mul(x);
    }

    pub fn mean(&self) -> Result<DVector<f64>> {
        if self.count == 0 {
            return Err(Error::EmptyWindow);
        }
        Ok(&self.sum / self.count as f64)
    }

    pub fn variance(&self) -> Result<DVector<f64>> {
        let m = self.mean()?;
        Ok((&self.sum_sq / self.count as f64 - m.component_mul(&m)).map(|v| v.max(0.0)))
    }
}

/// Current iterate, random state and bookkeeping of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    /// Current iterate `ϑ_k`.
    pub theta: DVector<f64>,
    /// Preconditioned coordinate `ψ_k`; equal to `ϑ_k` without preconditioning.
    pub psi: DVector<f64>,
    pub k: usize,
    origin: DVector<f64>,
    scale: Option<DVector<f64>>,
    rng: ChaCha20Rng,
}

impl ChainState {
    pub fn new(theta_init: DVector<f64>, seed: u64, stream: u64, scale: Option<DVector<f64>>) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let psi = if scale.is_some() { DVector::zeros(theta_init.len()) } else { theta_init.clone() };
        Self { psi, origin: theta_init.clone(), theta: theta_init, k: 0, scale, rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

/// Advances the chain by one Langevin step.
pub fn ula_step(state: &mut ChainState, target: &impl LogDensity, gamma: f64) -> Result<()> {
    let grad = target.gradient(&state.theta)?;
    let drift = match &state.scale {
        Some(a) => grad.component_mul(a),
        None => grad,
    };
    let noise = (2.0 * gamma).sqrt();
    let dim = state.psi.len();
    for i in 0..dim {
        let xi: f64 = state.rng.sample(StandardNormal);
        state.psi[i] += gamma * drift[i] + noise * xi;
    }
    state.k += 1;
    state.theta = match &state.scale {
        Some(a) => &state.origin + state.psi.component_mul(a),
        None => state.psi.clone(),
    };
    if state.theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteIterate { step: state.k });
    }
    Ok(())
}

/// Ball used to report how often the chain leaves the localization region.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        (x - &self.center).norm() <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChainStatus {
    Completed,
    /// Aborted at the given step; outputs hold everything before it.
    Diverged {
        step: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Stored post-burn-in samples, one per row.
    pub samples: DMatrix<f64>,
    /// Spacing between stored samples.
    pub thin: usize,
    pub moments: Accumulator,
    /// Fraction of all iterates outside the ball, if one was given.
    pub exit_fraction: Option<f64>,
    pub status: ChainStatus,
    pub state: ChainState,
}

impl ChainOutput {
    pub fn mean(&self) -> Result<DVector<f64>> {
        self.moments.mean()
    }
}

/// Runs `burn_in + n_samples` steps from `theta_init` and averages the last
/// `n_samples` iterates.
pub fn run_chain(
    target: &impl LogDensity,
    theta_init: &DVector<f64>,
    config: &ChainConfig,
    ball: Option<&Ball>,
) -> Result<ChainOutput> {
    let dim = target.dim();
    check_dim(dim, theta_init.len())?;
    config.validate(dim)?;
    let scale = config.precondition.as_ref().map(|a| DVector::from_column_slice(a));
    let mut state = ChainState::new(theta_init.clone(), config.seed, config.stream, scale);
    let full = match config.storage {
        Storage::Full => true,
        Storage::Streaming => false,
        Storage::Auto => config.n_samples.saturating_mul(dim) <= FULL_STORAGE_LIMIT,
    };
    let thin = if full { 1 } else { config.thin };
    let mut stored: Vec<f64> = Vec::with_capacity(config.n_samples.div_ceil(thin) * dim);
    let mut moments = Accumulator::new(dim);
    let mut exits = 0usize;
    let total = config.burn_in + config.n_samples;
    let mut status = ChainStatus::Completed;
    for step in 0..total {
        match ula_step(&mut state, target, config.gamma) {
            Ok(()) => {}
            Err(Error::NonFiniteIterate { step }) => {
                status = ChainStatus::Diverged { step };
                break;
            }
            Err(e) => return Err(e),
        }
        if let Some(b) = ball {
            if !b.contains(&state.theta) {
                exits += 1;
            }
        }
        if step >= config.burn_in {
            moments.push(&state.theta);
            if (step - config.burn_in).is_multiple_of(thin) {
                stored.extend(state.theta.iter());
            }
        }
    }
    let rows = stored.len() / dim.max(1);
    Ok(ChainOutput {
        samples: DMatrix::from_row_slice(rows, dim, &stored),
        thin,
        moments,
        exit_fraction: ball.map(|_| if state.k == 0 { 0.0 } else { exits as f64 / state.k as f64 }),
        status,
        state,
    })
}

/// Runs independent replicas on separate streams of the same seed.
pub fn run_replicates<T: LogDensity>(
    target: &T,
    theta_init: &DVector<f64>,
    config: &ChainConfig,
    replicas: usize,
) -> Result<Vec<ChainOutput>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let cfg = ChainConfig { stream: config.stream + r as u64, ..config.clone() };
            run_chain(target, theta_init, &cfg, None)
        })
        .collect()
}

fn window(samples: &DMatrix<f64>, j_in: usize, j: usize) -> Result<std::ops::Range<usize>> {
    if j == 0 {
        return Err(Error::EmptyWindow);
    }
    if j_in + j > samples.nrows() {
        return Err(Error::InvalidArgument(format!(
            "window {}..{} exceeds {} stored samples",
            j_in,
            j_in + j,
            samples.nrows()
        )));
    }
    Ok(j_in..j_in + j)
}

/// `(1/J) Σ_{k=J_in}^{J_in+J−1} H(ϑ_k)` over the rows of `samples`.
pub fn ergodic_average(samples: &DMatrix<f64>, h: impl Fn(&DVector<f64>) -> f64, j_in: usize, j: usize) -> Result<f64> {
    let range = window(samples, j_in, j)?;
    let total: f64 = range.map(|r| h(&samples.row(r).transpose())).sum();
    Ok(total / j as f64)
}

/// Coordinate-wise ergodic average.
pub fn posterior_mean_estimate(samples: &DMatrix<f64>, j_in: usize, j: usize) -> Result<DVector<f64>> {
    let range = window(samples, j_in, j)?;
    let mut sum = DVector::zeros(samples.ncols());
    for r in range {
        sum += samples.row(r).transpose();
    }
    Ok(sum / j as f64)
}

/// `⌈log N / (γ N D^{−4/d}) · log(D + 1/B)⌉`.
pub fn burn_in_lower_bound(n: usize, dsz: usize, d: usize, gamma: f64, b_gamma: f64) -> Result<u64> {
    if n < 2 || dsz == 0 || !(gamma > 0.0) || !(b_gamma > 0.0) {
        return Err(Error::InvalidArgument("burn-in bound needs N ≥ 2, D ≥ 1, γ > 0 and B > 0".into()));
    }
    let nf = n as f64;
    let dd = dsz as f64;
    let rate = gamma * nf * dd.powf(-4.0 / d as f64);
    Ok((nf.ln() / rate * (dd + 1.0 / b_gamma).ln()).ceil() as u64)
}

/// `min(ε²/D^{(d+24)/d}, ε/(√N D^{(22+d/2)/d}), 1/(N D^{8/d})) · (log N)^{−7}`.
pub fn gamma_epsilon(n: usize, dsz: usize, d: usize, epsilon: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::DegenerateN(n));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("target accuracy must be positive, got {epsilon}")));
    }
    let nf = n as f64;
    let dd = dsz as f64;
    let df = d as f64;
    let a = epsilon * epsilon / dd.powf((df + 24.0) / df);
    let b = epsilon / (nf.sqrt() * dd.powf((22.0 + df / 2.0) / df));
    let c = 1.0 / (nf * dd.powf(8.0 / df));
    Ok(a.min(b).min(c) * nf.ln().powi(-7))
}
