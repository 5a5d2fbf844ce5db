//! Pipeline stages shared by the subcommands.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use schrodinger_ula::diagnostics::{
    bound_certificate, estimate_curvature, least_squares_slope, w2_1d, BoundCertificate, CertificateInput,
    CurvatureReport,
};
use schrodinger_ula::io::{read_dataset, read_json, write_dataset, write_json, write_matrix_csv};
use schrodinger_ula::optim::{DescentStatus, InitResult};
use schrodinger_ula::sampler::{burn_in_lower_bound, gamma_epsilon, Ball, ChainStatus, Storage};
use schrodinger_ula::surrogate::{
    condition_23_params, k_lower_bound_with, practical_eta, step_limit, surrogate_stiffness, AsymptoticParams,
    SurrogateRecord,
};
use schrodinger_ula::{
    compute_map, generate_dataset_with_noise, initialize, run_chain, Basis, BoundaryData, ChainConfig,
    CoefficientVector, Dataset, EllipsoidNorm, ForwardModel, GaussianPrior, Grid, GridFunction, InitializerConfig,
    LinkFunction, LogDensity, LogLikelihood, MapConfig, Posterior, PriorSpec, SchrodingerLikelihood,
    SurrogateLikelihood, SurrogatePosterior, SurrogateSpec,
};

use crate::config::{ExperimentConfig, ParameterMode};
use crate::manifest::Recorder;

/// Independent seed streams derived from the root seed.
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Generate = 1,
    Surrogate = 2,
    Sample = 3,
    Curvature = 4,
}

pub fn stage_seed(root: u64, stage: Stage) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(root);
    rng.set_stream(stage as u64);
    rng.next_u64()
}

pub fn model(cfg: &ExperimentConfig, dsz: usize) -> Result<ForwardModel> {
    let grid = Grid::new(cfg.dim, cfg.n_interior)?;
    let basis = Basis::new(grid, dsz)?;
    Ok(ForwardModel::new(basis, LinkFunction::new(cfg.k_min)?, BoundaryData::Constant(cfg.g))?)
}

fn prior(cfg: &ExperimentConfig, model: &ForwardModel) -> Result<GaussianPrior> {
    Ok(PriorSpec { alpha: cfg.alpha, n_ref: cfg.n as f64, dim: cfg.dim }.build(model.basis())?)
}

/// `θ₀` truncated or zero-padded to `D` coefficients.
pub fn truth_in(theta0: &[f64], dsz: usize) -> DVector<f64> {
    DVector::from_fn(dsz, |k, _| theta0.get(k).copied().unwrap_or(0.0))
}

pub fn generate(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<Dataset> {
    let theta0 = cfg.theta0();
    let truth_model = model(cfg, theta0.len())?;
    let seed = stage_seed(cfg.seed, Stage::Generate);
    let mut data = generate_dataset_with_noise(&truth_model, &DVector::from_vec(theta0), cfg.n, seed, cfg.truth.noise)?;
    data.alpha = Some(cfg.alpha);
    let path = rec.path("dataset.csv");
    write_dataset(&path, &data)?;
    rec.wrote(path.clone());
    rec.wrote(schrodinger_ula::io::sidecar_path(&path));
    Ok(data)
}

/// Reads `--data` if given, otherwise generates from the config.
pub fn load_or_generate(cfg: &ExperimentConfig, rec: &mut Recorder, data: Option<&Path>) -> Result<Dataset> {
    match data {
        Some(p) => {
            rec.read_input(p);
            let d = read_dataset(p)?;
            if d.dim != cfg.dim {
                return Err(crate::config::ConfigError(format!(
                    "dataset {} has dimension {}, config has {}",
                    p.display(),
                    d.dim,
                    cfg.dim
                ))
                .into());
            }
            Ok(d)
        }
        None => rec.stage("generate", |r| generate(cfg, r)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitRecord {
    pub theta_init: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub correction: [f64; 2],
    pub n_basis: usize,
    pub delta_n: f64,
    pub alpha: f64,
    pub u_init_min: f64,
    pub f_init_min: f64,
    pub f_init_max: f64,
    /// `‖θ_init − θ₀,D‖` when the truth is known.
    pub error_to_truth: Option<f64>,
}

pub fn init(cfg: &ExperimentConfig, model: &ForwardModel, data: &Dataset, rec: &mut Recorder) -> Result<InitRecord> {
    let icfg = InitializerConfig::for_sample_size(data.len(), cfg.dim, cfg.init_alpha(), cfg.dsz);
    let res: InitResult = initialize(model, data, &icfg)?;
    let theta = res.theta_init.values.clone();
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, s: f64| v.iter().copied().fold(s, f);
    let record = InitRecord {
        theta_init: theta.iter().copied().collect(),
        lambda_hat: res.lambda_hat.iter().copied().collect(),
        correction: res.correction,
        n_basis: icfg.n_basis,
        delta_n: icfg.delta_n,
        alpha: icfg.alpha,
        u_init_min: fold(&res.u_init.values, f64::min, f64::INFINITY),
        f_init_min: fold(&res.f_init.values, f64::min, f64::INFINITY),
        f_init_max: fold(&res.f_init.values, f64::max, f64::NEG_INFINITY),
        error_to_truth: (!data.theta0.is_empty()).then(|| (&theta - truth_in(&data.theta0, cfg.dsz)).norm()),
    };
    let path = rec.path("init.json");
    write_json(&path, &record)?;
    rec.wrote(path);
    Ok(record)
}

pub fn load_or_init(
    cfg: &ExperimentConfig,
    model: &ForwardModel,
    data: &Dataset,
    rec: &mut Recorder,
    init_path: Option<&Path>,
) -> Result<DVector<f64>> {
    let theta = match init_path {
        Some(p) => {
            rec.read_input(p);
            read_json::<InitRecord>(p)?.theta_init
        }
        None => rec.stage("initialize", |r| init(cfg, model, data, r))?.theta_init,
    };
    if theta.len() != cfg.dsz {
        return Err(crate::config::ConfigError(format!("θ_init has {} entries, D = {}", theta.len(), cfg.dsz)).into());
    }
    Ok(DVector::from_vec(theta))
}

/// Resolved surrogate and step-size parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tuning {
    pub mode: ParameterMode,
    pub surrogate: SurrogateRecord,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
    /// Largest stable step, `1/Λ` in the coordinates the chain runs in.
    pub gamma_limit: f64,
    /// Diagonal preconditioner `A` (prior standard deviations), if used.
    pub precondition: Option<Vec<f64>>,
    pub curvature: CurvatureReport,
    pub asymptotic: Option<AsymptoticParams>,
    pub calibration: String,
}

pub fn tune(
    cfg: &ExperimentConfig,
    lik: &SchrodingerLikelihood,
    prior: &GaussianPrior,
    theta_init: &DVector<f64>,
    rec: &mut Recorder,
) -> Result<Tuning> {
    let n = lik.n_obs();
    let norm = EllipsoidNorm::identity(cfg.dsz);
    let asymptotic = condition_23_params(n, cfg.dsz, cfg.dim)?;
    let eta = match cfg.mode {
        ParameterMode::PaperAsymptotic => asymptotic.eta,
        ParameterMode::Practical => cfg.surrogate.eta.map_or_else(|| practical_eta(n), Ok)?,
    };
    let seed = stage_seed(cfg.seed, Stage::Surrogate);
    let curvature = estimate_curvature(lik, theta_init, eta, cfg.surrogate.n_probe, seed)?;
    let k = match (cfg.surrogate.k, cfg.mode) {
        (Some(k), _) => k,
        (None, ParameterMode::PaperAsymptotic) => asymptotic.k,
        (None, ParameterMode::Practical) => {
            k_lower_bound_with(cfg.surrogate.k_constant, curvature.c_max_hat, n, eta, &norm)
        }
    };
    let stiffness = surrogate_stiffness(k, &norm, n, curvature.c_max_hat);
    let precondition = match cfg.mode {
        ParameterMode::PaperAsymptotic => None,
        ParameterMode::Practical => Some(prior.std_dev().iter().copied().collect::<Vec<_>>()),
    };
    let gamma_limit = step_limit(stiffness, prior, precondition.is_some());
    let gamma = match (cfg.gamma, cfg.epsilon_target, cfg.mode) {
        (Some(g), _, _) => g,
        (None, Some(eps), _) => gamma_epsilon(n, cfg.dsz, cfg.dim, eps)?,
        (None, None, ParameterMode::PaperAsymptotic) => asymptotic.gamma_max,
        (None, None, ParameterMode::Practical) => gamma_limit,
    };
    if gamma > gamma_limit {
        rec.warn(format!("γ = {gamma:e} exceeds the stability limit 1/Λ = {gamma_limit:e}; the chain may diverge"));
    }
    let spec = SurrogateSpec::new(theta_init.clone(), eta, k, norm)?;
    let tuning = Tuning {
        mode: cfg.mode,
        surrogate: spec.to_record(),
        eta,
        k,
        gamma,
        gamma_limit,
        precondition,
        curvature,
        asymptotic: Some(asymptotic),
        calibration: format!(
            "k_constant = {} in the K lower bound is a calibration constant, not a value from the theory",
            cfg.surrogate.k_constant
        ),
    };
    let path = rec.path("surrogate.json");
    write_json(&path, &tuning)?;
    rec.wrote(path);
    Ok(tuning)
}

pub fn surrogate_posterior(
    cfg: &ExperimentConfig,
    lik: SchrodingerLikelihood,
    tuning: &Tuning,
) -> Result<SurrogatePosterior> {
    let spec = SurrogateSpec::from_record(&tuning.surrogate)?;
    let prior = prior(cfg, lik.model())?;
    Ok(Posterior::new(SurrogateLikelihood::new(lik, spec)?, prior)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainManifest {
    pub seed: u64,
    pub gamma: f64,
    #[serde(rename = "J_in")]
    pub j_in: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub exit_fraction: f64,
    pub wall_time: f64,
    pub parameter_mode: ParameterMode,
    pub thin: usize,
    pub preconditioned: bool,
    /// Burn-in suggested by the theory for this `γ`, with `B(γ) = 1`.
    pub burn_in_theory: Option<u64>,
    pub posterior_mean: Vec<f64>,
}

pub struct ChainSummary {
    pub mean: DVector<f64>,
    pub samples: DMatrix<f64>,
    pub manifest: ChainManifest,
}

pub fn sample(
    cfg: &ExperimentConfig,
    post: &SurrogatePosterior,
    theta_init: &DVector<f64>,
    tuning: &Tuning,
    rec: &mut Recorder,
) -> Result<ChainSummary> {
    let seed = stage_seed(cfg.seed, Stage::Sample);
    let mut ccfg = ChainConfig::new(tuning.gamma, cfg.j_in, cfg.j, seed);
    ccfg.precondition = tuning.precondition.clone();
    ccfg.storage = Storage::Streaming;
    ccfg.thin = cfg.thin;
    let ball = Ball { center: theta_init.clone(), radius: tuning.eta / 2.0 };
    let start = Instant::now();
    let out = run_chain(post, theta_init, &ccfg, Some(&ball))?;
    let wall_time = start.elapsed().as_secs_f64();
    if let ChainStatus::Diverged { step } = out.status {
        return Err(schrodinger_ula::Error::NonFiniteIterate { step }).context("Langevin chain diverged; lower gamma");
    }
    let mean = out.mean()?;
    let exit_fraction = out.exit_fraction.unwrap_or(0.0);
    if exit_fraction > 0.5 {
        rec.warn(format!(
            "the chain spent {:.0}% of its iterates outside the ball of radius η/2 around θ_init; the initializer is likely poor",
            100.0 * exit_fraction
        ));
    }
    let manifest = ChainManifest {
        seed,
        gamma: tuning.gamma,
        j_in: cfg.j_in,
        j: cfg.j,
        exit_fraction,
        wall_time,
        parameter_mode: cfg.mode,
        thin: out.thin,
        preconditioned: tuning.precondition.is_some(),
        burn_in_theory: burn_in_lower_bound(post.likelihood.inner.n_obs(), cfg.dsz, cfg.dim, tuning.gamma, 1.0).ok(),
        posterior_mean: mean.iter().copied().collect(),
    };
    let chain_csv = rec.path("chain.csv");
    write_matrix_csv(&chain_csv, &out.samples, "theta")?;
    let mean_csv = rec.path("posterior_mean.csv");
    write_matrix_csv(&mean_csv, &DMatrix::from_row_slice(1, mean.len(), mean.as_slice()), "theta")?;
    let chain_json = rec.path("chain.json");
    write_json(&chain_json, &manifest)?;
    for p in [chain_csv, mean_csv, chain_json] {
        rec.wrote(p);
    }
    Ok(ChainSummary { mean, samples: out.samples, manifest })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapRecord {
    pub theta_map: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub final_gradient_norm: f64,
    pub step: f64,
}

/// Preconditioned gradient ascent from `θ_init`, with the Jacobi scaling
/// of the Hessian at the start.
pub fn map(
    cfg: &ExperimentConfig,
    post: &SurrogatePosterior,
    theta_init: &DVector<f64>,
    rec: &mut Recorder,
) -> Result<MapRecord> {
    let h = -post.hessian(theta_init)?;
    let scale: Vec<f64> = (0..h.nrows())
        .map(|k| if h[(k, k)] > 0.0 { 1.0 / h[(k, k)].sqrt() } else { post.prior.std_dev()[k] })
        .collect();
    let a = DVector::from_column_slice(&scale);
    let scaled = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| a[i] * h[(i, j)] * a[j]);
    let lmax = SymmetricEigen::new(scaled).eigenvalues.max();
    let step = if lmax > 0.0 { 1.0 / lmax } else { 1.0 };
    let mut mcfg = MapConfig {
        step,
        max_iters: cfg.map.max_iters,
        rel_tolerance: cfg.map.rel_tolerance,
        precondition: Some(scale),
    };
    // the step fits the curvature at θ_init; halve it if the iteration
    // escapes into the stiffer penalty region
    let res = loop {
        match compute_map(post, theta_init, &mcfg) {
            Err(schrodinger_ula::Error::NonFiniteIterate { .. }) if mcfg.step > step * 1e-12 => mcfg.step /= 2.0,
            other => break other?,
        }
    };
    let record = MapRecord {
        theta_map: res.theta.iter().copied().collect(),
        iters: res.iters,
        converged: res.status == DescentStatus::Converged,
        final_gradient_norm: post.gradient(&res.theta)?.norm(),
        step: mcfg.step,
    };
    if !record.converged {
        rec.warn(format!("MAP iteration stopped after {} iterations without reaching the tolerance", res.iters));
    }
    let path = rec.path("map.json");
    write_json(&path, &record)?;
    rec.wrote(path);
    Ok(record)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub mode: ParameterMode,
    pub condition_23: AsymptoticParams,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: f64,
    pub c_max_hat: f64,
    pub c_min_hat: f64,
    pub certificate: BoundCertificate,
    /// `ρ` is far below floating point range; reported as `exp(log_rho)`.
    pub rho: String,
    pub notes: Vec<String>,
}

pub fn bounds(
    cfg: &ExperimentConfig,
    tuning: &Tuning,
    theta_init: &DVector<f64>,
    rec: &mut Recorder,
) -> Result<BoundsReport> {
    let cur = &tuning.curvature;
    let input = CertificateInput {
        n: cur.n,
        dsz: cfg.dsz,
        d: cfg.dim,
        alpha: cfg.alpha,
        k: tuning.k,
        lambda_min_m: 1.0,
        lambda_max_m: 1.0,
        gamma: tuning.gamma,
        c_min: cur.c_min_hat.max(0.0),
        eta: tuning.eta,
        r: theta_init.norm(),
        log_rho: None,
        c1: cfg.checks.c1,
        c2: cfg.checks.c2,
    };
    let certificate = bound_certificate(&input)?;
    let mut notes = vec![
        certificate.calibration.clone(),
        tuning.calibration.clone(),
        "R is taken as ‖θ_init‖; c_min is the measured c_min_hat clipped at 0".into(),
    ];
    if tuning.precondition.is_some() {
        notes.push("the chain runs in prior-whitened coordinates; γ is the step in those coordinates".into());
    }
    let report = BoundsReport {
        mode: cfg.mode,
        condition_23: tuning.asymptotic.context("asymptotic parameters missing")?,
        eta: tuning.eta,
        k: tuning.k,
        gamma: tuning.gamma,
        c_max_hat: cur.c_max_hat,
        c_min_hat: cur.c_min_hat,
        rho: format!("exp({:e})", certificate.log_rho),
        certificate,
        notes,
    };
    let path = rec.path("certificate.json");
    write_json(&path, &report)?;
    rec.wrote(path);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureStudy {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D_values")]
    pub d_values: Vec<usize>,
    pub lambda_min_hat: Vec<f64>,
    pub slope: f64,
    pub target_slope: f64,
}

/// `λ_min(−∇²ℓ_N)` at `θ₀` on noiseless data, over `D`.
pub fn curvature(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<CurvatureStudy> {
    let n = cfg.curvature.n;
    let theta0 = cfg.theta0();
    let truth_model = model(cfg, theta0.len())?;
    let seed = stage_seed(cfg.seed, Stage::Curvature);
    let data = generate_dataset_with_noise(&truth_model, &DVector::from_vec(theta0.clone()), n, seed, 0.0)?;
    let mut lams = Vec::new();
    for &dsz in &cfg.curvature.d_values {
        let lik = SchrodingerLikelihood::new(model(cfg, dsz)?, &data)?;
        let center = truth_in(&theta0, dsz);
        let lam = if cfg.curvature.n_probe == 0 {
            SymmetricEigen::new(-lik.hessian(&center)?).eigenvalues.min()
        } else {
            estimate_curvature(&lik, &center, practical_eta(n)?, cfg.curvature.n_probe, seed)?.lambda_min_hat
        };
        if !(lam > 0.0) {
            rec.warn(format!("λ_min = {lam:e} at D = {dsz} is not positive"));
        }
        lams.push(lam);
    }
    let xs: Vec<f64> = cfg.curvature.d_values.iter().map(|&d| (d as f64).ln()).collect();
    let ys: Vec<f64> = lams.iter().map(|l| l.abs().ln()).collect();
    let study = CurvatureStudy {
        n,
        d_values: cfg.curvature.d_values.clone(),
        slope: if xs.len() >= 2 { least_squares_slope(&xs, &ys) } else { f64::NAN },
        target_slope: -4.0 / cfg.dim as f64,
        lambda_min_hat: lams,
    };
    let csv_path = rec.path("curvature.csv");
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    w.write_record(["D", "lambda_min_hat"])?;
    for (d, l) in study.d_values.iter().zip(&study.lambda_min_hat) {
        w.write_record([d.to_string(), l.to_string()])?;
    }
    w.flush().with_context(|| format!("writing {}", csv_path.display()))?;
    let json_path = rec.path("curvature.json");
    write_json(&json_path, &study)?;
    rec.wrote(csv_path);
    rec.wrote(json_path);
    Ok(study)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionBias {
    /// `‖u(θ₀,D) − u(θ₀)‖_{L²}` on the grid.
    pub value: f64,
    /// `c0′ N^{−α/(2α+d)}`.
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub theta0_d: Vec<f64>,
    pub theta_init: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    pub theta_map: Vec<f64>,
    pub error_init: f64,
    pub error_mean: f64,
    pub error_map: f64,
    pub exit_fraction: f64,
    /// Per-coordinate 1D W₂ between the first and second half of the
    /// stored chain; small values indicate a settled chain.
    pub w2_half_split: Vec<f64>,
    pub dimension_bias: Option<DimensionBias>,
}

pub struct ReportInputs<'a> {
    pub data: &'a Dataset,
    pub theta_init: &'a DVector<f64>,
    pub chain: &'a ChainSummary,
    pub map: &'a MapRecord,
}

pub fn report(cfg: &ExperimentConfig, inp: ReportInputs<'_>, rec: &mut Recorder) -> Result<Report> {
    let truth = truth_in(&inp.data.theta0, cfg.dsz);
    let map = DVector::from_column_slice(&inp.map.theta_map);
    let s = &inp.chain.samples;
    let half = s.nrows() / 2;
    let w2_half_split = if half == 0 {
        Vec::new()
    } else {
        (0..s.ncols())
            .map(|k| {
                let col: Vec<f64> = s.column(k).iter().copied().collect();
                w2_1d(&col[..half], &col[half..2 * half])
            })
            .collect::<schrodinger_ula::Result<_>>()?
    };
    let dimension_bias = if inp.data.theta0.is_empty() {
        None
    } else {
        let full = model(cfg, inp.data.theta0.len())?.forward(&coeffs(cfg, &inp.data.theta0)?)?;
        let trunc = model(cfg, cfg.dsz)?.forward(&coeffs(cfg, truth.as_slice())?)?;
        let diff: Vec<f64> = full.values.iter().zip(&trunc.values).map(|(a, b)| a - b).collect();
        let value = GridFunction::new(full.grid, diff, BoundaryData::zero())?.l2_norm();
        let d = cfg.dim as f64;
        let bound = cfg.checks.c0_prime * (inp.data.len() as f64).powf(-cfg.alpha / (2.0 * cfg.alpha + d));
        if value > bound {
            rec.warn(format!("truncation bias {value:e} exceeds c0′N^(−α/(2α+d)) = {bound:e}"));
        }
        Some(DimensionBias { value, bound, within_bound: value <= bound })
    };
    let report = Report {
        theta0_d: truth.iter().copied().collect(),
        theta_init: inp.theta_init.iter().copied().collect(),
        posterior_mean: inp.chain.mean.iter().copied().collect(),
        theta_map: inp.map.theta_map.clone(),
        error_init: (inp.theta_init - &truth).norm(),
        error_mean: (&inp.chain.mean - &truth).norm(),
        error_map: (&map - &truth).norm(),
        exit_fraction: inp.chain.manifest.exit_fraction,
        w2_half_split,
        dimension_bias,
    };
    let path = rec.path("report.json");
    write_json(&path, &report)?;
    rec.wrote(path);
    Ok(report)
}

fn coeffs(cfg: &ExperimentConfig, values: &[f64]) -> Result<CoefficientVector> {
    let basis = model(cfg, values.len())?.basis().clone();
    Ok(CoefficientVector::new(DVector::from_column_slice(values), basis)?)
}

/// Everything downstream of the dataset: likelihood, prior and `θ_init`.
pub struct Prepared {
    pub lik: SchrodingerLikelihood,
    pub prior: GaussianPrior,
    pub theta_init: DVector<f64>,
}

pub fn prepare(
    cfg: &ExperimentConfig,
    data: &Dataset,
    rec: &mut Recorder,
    init_path: Option<&Path>,
) -> Result<Prepared> {
    let m = model(cfg, cfg.dsz)?;
    let theta_init = load_or_init(cfg, &m, data, rec, init_path)?;
    let prior = prior(cfg, &m)?;
    let lik = SchrodingerLikelihood::new(m, data)?;
    Ok(Prepared { lik, prior, theta_init })
}
