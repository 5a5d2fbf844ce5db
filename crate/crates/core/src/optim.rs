//! Gradient descent, MAP computation and the spectral ridge initializer.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::forward::ForwardModel;
use crate::likelihood::{Dataset, LogDensity};
use crate::pde::{BoundaryData, GridFunction};
use crate::spectral::{eigenfunction, Basis, CoefficientVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub step: f64,
    pub max_iters: usize,
    pub grad_tolerance: f64,
    /// Keep every iterate in [`DescentResult::path`].
    #[serde(default)]
    pub record_path: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentStatus {
    Converged,
    MaxItersExceeded,
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    /// Final iterate, or the one with the smallest gradient if the
    /// iteration budget ran out.
    pub theta: DVector<f64>,
    /// Gradient norm at every iterate, starting point included.
    pub trace: Vec<f64>,
    pub path: Vec<DVector<f64>>,
    pub iters: usize,
    pub status: DescentStatus,
}

/// Minimizes `U` by `ϑ_{k+1} = ϑ_k − step · ∇U(ϑ_k)`.
pub fn gradient_descent(
    mut grad_u: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    theta0: &DVector<f64>,
    config: &DescentConfig,
) -> Result<DescentResult> {
    if !(config.step > 0.0) || !(config.grad_tolerance >= 0.0) {
        return Err(Error::InvalidArgument("descent needs a positive step and a nonnegative tolerance".into()));
    }
    let mut theta = theta0.clone();
    let mut trace = Vec::new();
    let mut path = Vec::new();
    let mut best = (f64::INFINITY, theta.clone());
    for k in 0..=config.max_iters {
        let g = grad_u(&theta)?;
        let gn = g.norm();
        if !gn.is_finite() {
            return Err(Error::NonFiniteIterate { step: k });
        }
        trace.push(gn);
        if config.record_path {
            path.push(theta.clone());
        }
        if gn < best.0 {
            best = (gn, theta.clone());
        }
        if gn <= config.grad_tolerance {
            return Ok(DescentResult { theta, trace, path, iters: k, status: DescentStatus::Converged });
        }
        if k == config.max_iters {
            break;
        }
        theta.axpy(-config.step, &g, 1.0);
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate { step: k + 1 });
        }
    }
    Ok(DescentResult { theta: best.1, trace, path, iters: config.max_iters, status: DescentStatus::MaxItersExceeded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub step: f64,
    pub max_iters: usize,
    /// Relative stopping tolerance on the gradient norm.
    pub rel_tolerance: f64,
    /// Diagonal preconditioner `A`; the update becomes `ϑ + step·A²∇`.
    #[serde(default)]
    pub precondition: Option<Vec<f64>>,
}

impl MapConfig {
    pub fn new(step: f64, max_iters: usize) -> Self {
        Self { step, max_iters, rel_tolerance: 1e-8, precondition: None }
    }
}

/// Gradient ascent on a log-density, stopped when
/// `‖∇‖ ≤ rel_tolerance · max(1, ‖∇ at start‖)`.
pub fn compute_map(target: &impl LogDensity, start: &DVector<f64>, config: &MapConfig) -> Result<DescentResult> {
    let dim = target.dim();
    check_dim(dim, start.len())?;
    let a2 = match &config.precondition {
        Some(a) => {
            check_dim(dim, a.len())?;
            DVector::from_iterator(dim, a.iter().map(|v| v * v))
        }
        None => DVector::from_element(dim, 1.0),
    };
    let tol = config.rel_tolerance * target.gradient(start)?.norm().max(1.0);
    let mut theta = start.clone();
    let mut trace = Vec::new();
    let mut best = (f64::INFINITY, theta.clone());
    for k in 0..=config.max_iters {
        let g = target.gradient(&theta)?;
        let gn = g.norm();
        if !gn.is_finite() {
            return Err(Error::NonFiniteIterate { step: k });
        }
        trace.push(gn);
        if gn < best.0 {
            best = (gn, theta.clone());
        }
        if gn <= tol {
            return Ok(DescentResult { theta, trace, path: Vec::new(), iters: k, status: DescentStatus::Converged });
        }
        if k == config.max_iters {
            break;
        }
        theta += g.component_mul(&a2) * config.step;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIterate { step: k + 1 });
        }
    }
    Ok(DescentResult {
        theta: best.1,
        trace,
        path: Vec::new(),
        iters: config.max_iters,
        status: DescentStatus::MaxItersExceeded,
    })
}

/// How the ridge normal equations are solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RidgeSolver {
    #[default]
    Direct,
    /// Jacobi-preconditioned gradient descent.
    GradientDescent { max_iters: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitializerConfig {
    /// Ridge dictionary size `n_J`.
    pub n_basis: usize,
    /// Penalty scale `δ_N`.
    pub delta_n: f64,
    pub alpha: f64,
    /// Dimension of the returned `θ_init`.
    pub d_out: usize,
    /// `f_init` is clipped to `K_min + clip` before inverting the link.
    pub clip: f64,
    /// Smallest admissible value of the fitted `u_init`.
    pub u_floor: f64,
    /// Add two unpenalized polynomial columns in 1D so the fit can match
    /// the boundary curvature of `u`.
    pub boundary_correction: bool,
    #[serde(default)]
    pub solver: RidgeSolver,
}

impl InitializerConfig {
    /// Defaults for `N` observations: `n_J = N^{d/(2α+d)}` rounded up to a
    /// power of two and `δ_N = N^{−α/(2α+d)}`.
    pub fn for_sample_size(n: usize, d: usize, alpha: f64, d_out: usize) -> Self {
        let nf = n as f64;
        let df = d as f64;
        let raw = nf.powf(df / (2.0 * alpha + df)).ceil().max(1.0) as usize;
        Self {
            n_basis: raw.next_power_of_two().max(d_out),
            delta_n: nf.powf(-alpha / (2.0 * alpha + df)),
            alpha,
            d_out,
            clip: 1e-3,
            u_floor: 1e-3,
            boundary_correction: true,
            solver: RidgeSolver::Direct,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InitResult {
    pub theta_init: CoefficientVector,
    /// Ridge coefficients on the first `n_J` modes.
    pub lambda_hat: DVector<f64>,
    /// Coefficients of the polynomial boundary columns (zero if unused).
    pub correction: [f64; 2],
    /// Fitted `u_init` and `f_init` on the grid.
    pub u_init: GridFunction,
    pub f_init: GridFunction,
}

// p₀ = x(1−x)², p₁ = x²(1−x) and their second derivatives
fn corrector(x: f64) -> [f64; 2] {
    [x * (1.0 - x) * (1.0 - x), x * x * (1.0 - x)]
}

fn corrector_d2(x: f64) -> [f64; 2] {
    [-4.0 + 6.0 * x, 2.0 - 6.0 * x]
}

/// Solves `(GᵀG/N + diag(penalty)) λ = Gᵀr/N`; columns with a zero penalty
/// entry are unpenalized.
pub fn ridge_fit(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    penalty: &DVector<f64>,
    solver: RidgeSolver,
) -> Result<DVector<f64>> {
    check_dim(design.nrows(), target.len())?;
    check_dim(design.ncols(), penalty.len())?;
    let n = design.nrows() as f64;
    let mut a = design.transpose() * design / n;
    for k in 0..penalty.len() {
        a[(k, k)] += penalty[k];
    }
    let b = design.transpose() * target / n;
    match solver {
        RidgeSolver::Direct => {
            let chol = Cholesky::new(a.clone()).ok_or(Error::SingularSystem { row: 0, pivot: f64::NAN })?;
            Ok(chol.solve(&b))
        }
        RidgeSolver::GradientDescent { max_iters } => {
            let p = a.diagonal().map(|v| v.sqrt().recip());
            let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * p[i] * p[j]);
            let top = SymmetricEigen::new(scaled.clone()).eigenvalues.max();
            let rhs = b.component_mul(&p);
            let tol = 1e-12 * rhs.norm().max(1e-300);
            let res = gradient_descent(
                |z| Ok(&scaled * z - &rhs),
                &DVector::zeros(a.nrows()),
                &DescentConfig { step: 1.0 / top, max_iters, grad_tolerance: tol, record_path: false },
            )?;
            Ok(res.theta.component_mul(&p))
        }
    }
}

/// Spectral initializer: ridge fit of `u`, then `f = Δu/(2u)`, then the
/// first `d_out` coefficients of `Φ⁻¹∘f`.
pub fn initialize(model: &ForwardModel, data: &Dataset, cfg: &InitializerConfig) -> Result<InitResult> {
    data.validate()?;
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(cfg.delta_n > 0.0) || cfg.n_basis == 0 || cfg.d_out == 0 {
        return Err(Error::InvalidArgument("initializer needs δ_N > 0, n_J ≥ 1 and D_out ≥ 1".into()));
    }
    let grid = *model.grid();
    let dict = Basis::new(grid, cfg.n_basis)?;
    let correct = cfg.boundary_correction && grid.dim() == 1;
    let extra = if correct { 2 } else { 0 };
    let nj = cfg.n_basis;
    let boundary = model.boundary();
    let design = DMatrix::from_fn(data.len(), nj + extra, |i, k| {
        let x = &data.points[i];
        if k < nj {
            eigenfunction(dict.modes()[k], x)
        } else {
            corrector(x[0])[k - nj]
        }
    });
    let target =
        DVector::from_iterator(data.len(), data.points.iter().zip(&data.y).map(|(x, y)| y - boundary.harmonic_lift(x)));
    let mut penalty = DVector::zeros(nj + extra);
    let lam = dict.lambda_alpha(cfg.alpha);
    for k in 0..nj {
        penalty[k] = cfg.delta_n * cfg.delta_n * lam[k];
    }
    let coef = ridge_fit(&design, &target, &penalty, cfg.solver)?;
    let lambda_hat = coef.rows(0, nj).into_owned();
    let correction = if correct { [coef[nj], coef[nj + 1]] } else { [0.0; 2] };

    let series = dict.synthesize_values(&lambda_hat);
    let laplacian = dict.synthesize_values(&lambda_hat.component_mul(&dict.eigenvalues().map(|l| -2.0 * l)));
    let mut u = Vec::with_capacity(grid.len());
    let mut lap = Vec::with_capacity(grid.len());
    for (i, node) in grid.nodes().enumerate() {
        let x = &node[..grid.dim()];
        let p = corrector(x[0]);
        let p2 = corrector_d2(x[0]);
        u.push(boundary.harmonic_lift(x) + series[i] + correction[0] * p[0] + correction[1] * p[1]);
        lap.push(laplacian[i] + correction[0] * p2[0] + correction[1] * p2[1]);
    }
    let u_min = u.iter().copied().fold(f64::INFINITY, f64::min);
    if !(u_min > cfg.u_floor) {
        return Err(Error::NonPositiveU { min: u_min, floor: cfg.u_floor });
    }
    let link = model.link();
    let floor = link.k_min + cfg.clip;
    let f: Vec<f64> = u.iter().zip(&lap).map(|(u, l)| (l / (2.0 * u)).max(floor)).collect();
    let big_f = f.iter().map(|&v| link.inverse(v)).collect::<Result<Vec<_>>>()?;
    let out_basis: Arc<Basis> =
        if model.basis().size() == cfg.d_out { model.basis().clone() } else { Basis::new(grid, cfg.d_out)? };
    let theta = out_basis.project_values(&big_f);
    Ok(InitResult {
        theta_init: CoefficientVector::new(theta, out_basis)?,
        lambda_hat,
        correction,
        u_init: GridFunction::new(grid, u, boundary.clone())?,
        f_init: GridFunction::new(grid, f, BoundaryData::zero())?,
    })
}
