//! Synthetic data, the Gaussian log-likelihood `ℓ_N`, the spectral prior and
//! the unnormalized posterior.
//!
//! The gradient uses the adjoint identity
//!
//! ```text
//!   ∂ₖℓ_N = Σᵢ rᵢ ∂ₖu(Xᵢ) = −⟨z, u Φ'(F) eₖ⟩,   S z = Pᵀ r,
//! ```
//!
//! with `r = Y − P u` the residuals and `P` the point-evaluation operator, so
//! one gradient costs two solves with a single factorization. The direct
//! `D`-solve assembly is kept as [`SchrodingerLikelihood::gradient_direct`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::forward::{ForwardModel, ForwardState};
use crate::pde::{ObservationOperator, SparseSymmetric};
use crate::spectral::Basis;

/// Observations `(X_i, Y_i)` with the ground truth that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub theta0: Vec<f64>,
    pub seed: u64,
    pub alpha: Option<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Checks shapes and that every point lies strictly inside the domain.
    pub fn validate(&self) -> Result<()> {
        check_dim(self.points.len(), self.y.len())?;
        for x in &self.points {
            check_dim(self.dim, x.len())?;
            if x.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
                return Err(Error::OutOfDomain(x.clone()));
            }
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("responses contain non-finite values".into()));
        }
        Ok(())
    }
}

/// Draws `N` uniform design points and responses `Y = 𝒢(θ₀)(X) + ε`,
/// `ε ~ N(0, 1)`.
pub fn generate_dataset(model: &ForwardModel, theta0: &DVector<f64>, n: usize, seed: u64) -> Result<Dataset> {
    generate_dataset_with_noise(model, theta0, n, seed, 1.0)
}

/// As [`generate_dataset`] with a configurable noise scale. Only the unit
/// scale is the statistical model; zero gives noiseless data for tests.
pub fn generate_dataset_with_noise(
    model: &ForwardModel,
    theta0: &DVector<f64>,
    n: usize,
    seed: u64,
    noise_scale: f64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let d = model.grid().dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                })
                .collect()
        })
        .collect();
    let state = model.state(theta0)?;
    let obs = ObservationOperator::new(*model.grid(), &points)?;
    let mean = obs.apply(state.u(), model.boundary());
    let y = mean
        .into_iter()
        .map(|m| {
            let e: f64 = rng.sample(StandardNormal);
            m + noise_scale * e
        })
        .collect();
    Ok(Dataset { dim: d, points, y, theta0: theta0.iter().copied().collect(), seed, alpha: None })
}

/// A log-likelihood in coefficient space.
pub trait LogLikelihood: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of observations `N`.
    fn n_obs(&self) -> usize;

    fn value(&self, theta: &DVector<f64>) -> Result<f64>;

    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)>;

    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.value_and_gradient(theta)?.1)
    }
}

impl<T: LogLikelihood + ?Sized> LogLikelihood for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn n_obs(&self) -> usize {
        (**self).n_obs()
    }
    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        (**self).value(theta)
    }
    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        (**self).value_and_gradient(theta)
    }
    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).hessian(theta)
    }
    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).gradient(theta)
    }
}

/// `ℓ_N(θ) = −½ Σ (Y_i − 𝒢(θ)(X_i))²` for the Schrödinger forward map.
#[derive(Debug, Clone)]
pub struct SchrodingerLikelihood {
    model: ForwardModel,
    obs: ObservationOperator,
    y: DVector<f64>,
    // normal equations for gradient-only calls: Pᵀr = Pᵀ(y − b) − PᵀP u
    gram: SparseSymmetric,
    projected: Vec<f64>,
}

impl SchrodingerLikelihood {
    pub fn new(model: ForwardModel, data: &Dataset) -> Result<Self> {
        data.validate()?;
        check_dim(model.grid().dim(), data.dim)?;
        let obs = ObservationOperator::new(*model.grid(), &data.points)?;
        Ok(Self::assemble(model, obs, DVector::from_column_slice(&data.y)))
    }

    fn assemble(model: ForwardModel, obs: ObservationOperator, y: DVector<f64>) -> Self {
        let offsets = obs.apply(&vec![0.0; model.grid().len()], model.boundary());
        let shifted: Vec<f64> = y.iter().zip(&offsets).map(|(a, b)| a - b).collect();
        let projected = obs.transpose_apply(&shifted);
        let gram = obs.gram();
        Self { model, obs, y, gram, projected }
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.y
    }

    /// Replaces the responses, keeping the design.
    pub fn with_observations(&self, y: DVector<f64>) -> Result<Self> {
        check_dim(self.y.len(), y.len())?;
        Ok(Self::assemble(self.model.clone(), self.obs.clone(), y))
    }

    /// Model predictions `𝒢(θ)(X_i)`.
    pub fn predictions(&self, state: &ForwardState) -> DVector<f64> {
        DVector::from_vec(self.obs.apply(state.u(), self.model.boundary()))
    }

    fn residuals(&self, state: &ForwardState) -> DVector<f64> {
        &self.y - self.predictions(state)
    }

    /// Forward sensitivities: the `N × D` Jacobian of the predictions and
    /// the `D × n_nodes` directional fields `∂ₖu` on the grid.
    pub fn jacobian(&self, state: &ForwardState) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let basis = self.model.basis();
        let dsz = basis.size();
        let fields: Vec<Vec<f64>> = (0..dsz)
            .into_par_iter()
            .map(|k| {
                let row: Vec<f64> = basis.samples().row(k).iter().copied().collect();
                state.direction_of_field(&row)
            })
            .collect::<Result<_>>()?;
        let n_nodes = self.model.grid().len();
        let mut w = DMatrix::zeros(dsz, n_nodes);
        let mut j = DMatrix::zeros(self.obs.len(), dsz);
        for (k, field) in fields.iter().enumerate() {
            for (i, v) in field.iter().enumerate() {
                w[(k, i)] = *v;
            }
            for (i, v) in self.obs.apply_interior(field).into_iter().enumerate() {
                j[(i, k)] = v;
            }
        }
        Ok((j, w))
    }

    /// Gradient assembled from `D` sensitivity solves; the oracle for the
    /// adjoint path.
    pub fn gradient_direct(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let state = self.model.state(theta)?;
        let (j, _) = self.jacobian(&state)?;
        Ok(j.transpose() * self.residuals(&state))
    }

    fn adjoint(&self, state: &ForwardState, r: &DVector<f64>) -> Result<Vec<f64>> {
        state.operator().solve_spd(&self.obs.transpose_apply(r.as_slice()))
    }

    fn gradient_from_adjoint(&self, state: &ForwardState, z: &[f64]) -> DVector<f64> {
        let (u, d1) = (state.u(), state.link_d1());
        let weights = DVector::from_iterator(z.len(), (0..z.len()).map(|i| -z[i] * u[i] * d1[i]));
        self.model.basis().samples() * weights
    }
}

impl LogLikelihood for SchrodingerLikelihood {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        let state = self.model.state(theta)?;
        Ok(-0.5 * self.residuals(&state).norm_squared())
    }

    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let state = self.model.state(theta)?;
        let r = self.residuals(&state);
        let z = self.adjoint(&state, &r)?;
        Ok((-0.5 * r.norm_squared(), self.gradient_from_adjoint(&state, &z)))
    }

    /// Cost independent of `N`: the residual is never formed.
    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let state = self.model.state(theta)?;
        let pu = self.gram.apply(state.u());
        let rhs: Vec<f64> = self.projected.iter().zip(&pu).map(|(a, b)| a - b).collect();
        let z = state.operator().solve_spd(&rhs)?;
        Ok(self.gradient_from_adjoint(&state, &z))
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let state = self.model.state(theta)?;
        let r = self.residuals(&state);
        let z = self.adjoint(&state, &r)?;
        let (j, w) = self.jacobian(&state)?;
        let e = self.model.basis().samples();
        let (u, d1, d2) = (state.u(), state.link_d1(), state.link_d2());
        let n = z.len();
        let a = DVector::from_iterator(n, (0..n).map(|i| z[i] * u[i] * d2[i]));
        let b = DVector::from_iterator(n, (0..n).map(|i| z[i] * d1[i]));
        let mut ea = e.clone();
        let mut eb = e.clone();
        for i in 0..n {
            ea.column_mut(i).scale_mut(a[i]);
            eb.column_mut(i).scale_mut(b[i]);
        }
        let cross = &eb * w.transpose();
        let second = &ea * e.transpose() + &cross + cross.transpose();
        let h = -(j.transpose() * &j) - second;
        Ok((&h + h.transpose()) * 0.5)
    }
}

/// Linear Gaussian regression `Y = Φθ + ε`, used as a test target with a
/// closed-form posterior.
#[derive(Debug, Clone)]
pub struct LinearRegressionLikelihood {
    design: DMatrix<f64>,
    y: DVector<f64>,
}

impl LinearRegressionLikelihood {
    pub fn new(design: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        check_dim(design.nrows(), y.len())?;
        Ok(Self { design, y })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.y
    }
}

impl LogLikelihood for LinearRegressionLikelihood {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(-0.5 * (&self.y - &self.design * theta).norm_squared())
    }

    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_dim(self.dim(), theta.len())?;
        let r = &self.y - &self.design * theta;
        Ok((-0.5 * r.norm_squared(), self.design.transpose() * r))
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), theta.len())?;
        Ok(-(self.design.transpose() * &self.design))
    }
}

/// Parameters of the rescaled spectral prior `N(0, N^{−d/(2α+d)} Λ_α^{−1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub alpha: f64,
    pub n_ref: f64,
    pub dim: usize,
}

impl PriorSpec {
    /// The precision scale `N^{d/(2α+d)}`.
    pub fn scale(&self) -> f64 {
        let d = self.dim as f64;
        self.n_ref.powf(d / (2.0 * self.alpha + d))
    }

    /// `δ_N = N^{−α/(2α+d)}`.
    pub fn delta(&self) -> f64 {
        let d = self.dim as f64;
        self.n_ref.powf(-self.alpha / (2.0 * self.alpha + d))
    }

    pub fn build(&self, basis: &Basis) -> Result<GaussianPrior> {
        if !(self.alpha >= 0.0) || !(self.n_ref > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior needs alpha ≥ 0 and N_ref > 0, got {} and {}",
                self.alpha, self.n_ref
            )));
        }
        check_dim(basis.dim(), self.dim)?;
        GaussianPrior::new(basis.lambda_alpha(self.alpha) * self.scale())
    }
}

/// Centered Gaussian prior with diagonal precision `Σ⁻¹`. The normalizing
/// constant is dropped from the log-density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    precision: DVector<f64>,
}

impl GaussianPrior {
    pub fn new(precision: DVector<f64>) -> Result<Self> {
        if precision.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("prior precision must be positive and finite".into()));
        }
        Ok(Self { precision })
    }

    pub fn dim(&self) -> usize {
        self.precision.len()
    }

    /// Diagonal of `Σ⁻¹`.
    pub fn precision(&self) -> &DVector<f64> {
        &self.precision
    }

    /// Prior standard deviations `√Σ_kk`.
    pub fn std_dev(&self) -> DVector<f64> {
        self.precision.map(|p| p.sqrt().recip())
    }

    pub fn log_density(&self, theta: &DVector<f64>) -> f64 {
        -0.5 * theta.iter().zip(self.precision.iter()).map(|(t, p)| p * t * t).sum::<f64>()
    }

    /// `−Σ⁻¹θ`.
    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        -theta.component_mul(&self.precision)
    }

    pub fn precision_min(&self) -> f64 {
        self.precision.min()
    }

    pub fn precision_max(&self) -> f64 {
        self.precision.max()
    }
}

/// A differentiable log-density, the input of the samplers and optimizers.
pub trait LogDensity: Send + Sync {
    fn dim(&self) -> usize;

    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)>;

    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        Ok(self.value_and_gradient(theta)?.0)
    }

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.value_and_gradient(theta)?.1)
    }
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        (**self).value_and_gradient(theta)
    }
    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        (**self).value(theta)
    }
    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).gradient(theta)
    }
}

/// Unnormalized log-posterior `ℓ(θ) + log π(θ)`.
#[derive(Debug, Clone)]
pub struct Posterior<L> {
    pub likelihood: L,
    pub prior: GaussianPrior,
}

impl<L: LogLikelihood> Posterior<L> {
    pub fn new(likelihood: L, prior: GaussianPrior) -> Result<Self> {
        check_dim(likelihood.dim(), prior.dim())?;
        Ok(Self { likelihood, prior })
    }

    /// Hessian of the log-posterior.
    pub fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut h = self.likelihood.hessian(theta)?;
        for k in 0..self.dim() {
            h[(k, k)] -= self.prior.precision[k];
        }
        Ok(h)
    }
}

impl<L: LogLikelihood> LogDensity for Posterior<L> {
    fn dim(&self) -> usize {
        self.likelihood.dim()
    }

    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        Ok(self.likelihood.value(theta)? + self.prior.log_density(theta))
    }

    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (v, g) = self.likelihood.value_and_gradient(theta)?;
        Ok((v + self.prior.log_density(theta), g + self.prior.gradient(theta)))
    }

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.likelihood.gradient(theta)? + self.prior.gradient(theta))
    }
}

/// Gaussian log-density `−½(θ−μ)ᵀP(θ−μ)` with dense precision `P`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), precision.nrows())?;
        check_dim(mean.len(), precision.ncols())?;
        Ok(Self { mean, precision })
    }
}

impl LogDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_dim(self.dim(), theta.len())?;
        let delta = theta - &self.mean;
        let pd = &self.precision * &delta;
        Ok((-0.5 * delta.dot(&pd), -pd))
    }
}
