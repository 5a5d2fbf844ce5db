//! Globally concave surrogate of the log-likelihood.
//!
//! ```text
//!   ℓ̃(θ) = α_η(θ) ℓ(θ) − K γ_η(|θ − θ_init|₁),    |v|₁² = vᵀMv
//! ```
//!
//! The penalty `γ_η = φ_{η/8} ∗ (t − 5η/8)₊²` is the mollified squared hinge.
//! Writing `c = 8t/η − 5` and `M_p(c) = ∫_{−1}^{c} xᵖ φ(x) dx` for the
//! normalized bump `φ`, the convolution has the closed form
//!
//! ```text
//!   γ_η(t)   = (η/8)² [c² M₀ − 2c M₁ + M₂](c)
//!   γ_η'(t)  = (η/4)  [c M₀ − M₁](c)
//!   γ_η''(t) = 2 M₀(c)
//! ```
//!
//! which vanishes for `t ≤ η/2` and reduces to `(t − 5η/8)² + (η/8)² m₂`
//! for `t ≥ 3η/4`. The three moment functions are tabulated once.
//!
//! The cutoff `α_η(θ) = α(|θ−θ_init|₁/η)` is a quintic smoothstep falling
//! from 1 at `3/4` to 0 at `7/8`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::likelihood::{GaussianPrior, LogLikelihood};

/// Default for the unspecified constant in the lower bound on `K`.
pub const DEFAULT_K_CONSTANT: f64 = 8.0;

/// The ellipsoidal norm `|v|₁ = √(vᵀMv)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidNorm {
    matrix: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
    identity: bool,
}

impl EllipsoidNorm {
    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim), lambda_min: 1.0, lambda_max: 1.0, identity: true }
    }

    pub fn diagonal(diag: &DVector<f64>) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(diag))
    }

    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("ellipsoid matrix must be square".into()));
        }
        if (&matrix - matrix.transpose()).amax() > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::InvalidArgument("ellipsoid matrix must be symmetric".into()));
        }
        let eig = SymmetricEigen::new(matrix.clone()).eigenvalues;
        let (lambda_min, lambda_max) = (eig.min(), eig.max());
        if !(lambda_min > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ellipsoid matrix must be positive definite, smallest eigenvalue {lambda_min}"
            )));
        }
        let identity = matrix == DMatrix::identity(matrix.nrows(), matrix.ncols());
        Ok(Self { matrix, lambda_min, lambda_max, identity })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `Mv`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.identity {
            v.clone()
        } else {
            &self.matrix * v
        }
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.apply(v)).max(0.0).sqrt()
    }
}

const TABLE_INTERVALS: usize = 4096;

// 5-point Gauss–Legendre rule on [−1, 1]
const GL_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Cumulative moments of the normalized bump on a uniform grid over
/// `[−1, 1]`, interpolated by cubic Hermite polynomials with the exact
/// derivatives `cᵖφ(c)`.
#[derive(Debug)]
struct MomentTable {
    norm: f64,
    moments: [Vec<f64>; 3],
    second_moment: f64,
}

fn raw_bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

impl MomentTable {
    fn build() -> Self {
        let h = 2.0 / TABLE_INTERVALS as f64;
        let mut moments =
            [vec![0.0; TABLE_INTERVALS + 1], vec![0.0; TABLE_INTERVALS + 1], vec![0.0; TABLE_INTERVALS + 1]];
        for i in 0..TABLE_INTERVALS {
            let a = -1.0 + i as f64 * h;
            let mut panel = [0.0; 3];
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let s = a + 0.5 * h * (1.0 + x);
                let b = raw_bump(s) * w * 0.5 * h;
                panel[0] += b;
                panel[1] += b * s;
                panel[2] += b * s * s;
            }
            for p in 0..3 {
                moments[p][i + 1] = moments[p][i] + panel[p];
            }
        }
        let norm = moments[0][TABLE_INTERVALS];
        for m in moments.iter_mut() {
            m.iter_mut().for_each(|v| *v /= norm);
        }
        // first moment vanishes by symmetry
        let second_moment = moments[2][TABLE_INTERVALS];
        Self { norm, moments, second_moment }
    }

    fn get() -> &'static Self {
        static TABLE: OnceLock<MomentTable> = OnceLock::new();
        TABLE.get_or_init(Self::build)
    }

    fn density(&self, c: f64) -> f64 {
        raw_bump(c) / self.norm
    }

    /// `(M₀, M₁, M₂)(c)` for `c ∈ [−1, 1]`.
    fn eval(&self, c: f64) -> [f64; 3] {
        if c <= -1.0 {
            return [0.0; 3];
        }
        if c >= 1.0 {
            return [1.0, 0.0, self.second_moment];
        }
        let h = 2.0 / TABLE_INTERVALS as f64;
        let s = (c + 1.0) / h;
        let i = (s.floor() as usize).min(TABLE_INTERVALS - 1);
        let t = s - i as f64;
        let (x0, x1) = (-1.0 + i as f64 * h, -1.0 + (i + 1) as f64 * h);
        let (p0, p1) = (self.density(x0), self.density(x1));
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let mut out = [0.0; 3];
        for p in 0..3 {
            let d0 = p0 * x0.powi(p as i32);
            let d1 = p1 * x1.powi(p as i32);
            out[p] = h00 * self.moments[p][i] + h10 * h * d0 + h01 * self.moments[p][i + 1] + h11 * h * d1;
        }
        out
    }
}

/// `∫ x² φ(x) dx` for the normalized bump.
pub fn bump_second_moment() -> f64 {
    MomentTable::get().second_moment
}

/// `γ_η(t)`, `γ_η'(t)` and `γ_η''(t)`.
pub fn gamma_eta_all(eta: f64, t: f64) -> (f64, f64, f64) {
    if t <= 0.5 * eta {
        return (0.0, 0.0, 0.0);
    }
    let h = eta / 8.0;
    if t >= 0.75 * eta {
        let s = t - 5.0 * h;
        return (s * s + h * h * bump_second_moment(), 2.0 * s, 2.0);
    }
    let c = t / h - 5.0;
    let [m0, m1, m2] = MomentTable::get().eval(c);
    (h * h * (c * c * m0 - 2.0 * c * m1 + m2), 2.0 * h * (c * m0 - m1), 2.0 * m0)
}

pub fn gamma_eta(eta: f64, t: f64) -> f64 {
    gamma_eta_all(eta, t).0
}

pub fn gamma_eta_d1(eta: f64, t: f64) -> f64 {
    gamma_eta_all(eta, t).1
}

/// Cutoff profile `α(s)` with its first two derivatives.
pub fn cutoff(s: f64) -> (f64, f64, f64) {
    if s <= 0.75 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 0.875 {
        return (0.0, 0.0, 0.0);
    }
    let z = 8.0 * (s - 0.75);
    let step = z * z * z * (10.0 + z * (-15.0 + 6.0 * z));
    let d1 = 30.0 * z * z * (1.0 - z) * (1.0 - z);
    let d2 = 60.0 * z * (1.0 - z) * (1.0 - 2.0 * z);
    (1.0 - step, -8.0 * d1, -64.0 * d2)
}

/// Everything defining the surrogate around a center `θ_init`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSpec {
    pub theta_init: DVector<f64>,
    pub eta: f64,
    pub k: f64,
    pub norm: EllipsoidNorm,
}

impl SurrogateSpec {
    pub fn new(theta_init: DVector<f64>, eta: f64, k: f64, norm: EllipsoidNorm) -> Result<Self> {
        check_dim(theta_init.len(), norm.dim())?;
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("K must be positive, got {k}")));
        }
        if theta_init.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("theta_init has non-finite entries".into()));
        }
        // make sure the shared mollifier table exists before any hot loop
        MomentTable::get();
        Ok(Self { theta_init, eta, k, norm })
    }

    pub fn dim(&self) -> usize {
        self.theta_init.len()
    }

    pub fn gamma(&self, t: f64) -> f64 {
        gamma_eta(self.eta, t)
    }

    pub fn gamma_d1(&self, t: f64) -> f64 {
        gamma_eta_d1(self.eta, t)
    }

    /// `|θ − θ_init|₁`.
    pub fn distance(&self, theta: &DVector<f64>) -> f64 {
        self.norm.norm(&(theta - &self.theta_init))
    }

    /// Euclidean distance from the center.
    pub fn euclidean_distance(&self, theta: &DVector<f64>) -> f64 {
        (theta - &self.theta_init).norm()
    }

    /// Whether `θ` lies in the localization ball `‖θ − θ_init‖ ≤ η/2`.
    pub fn in_ball(&self, theta: &DVector<f64>) -> bool {
        self.euclidean_distance(theta) <= 0.5 * self.eta
    }

    /// `α_η(θ)` and its gradient.
    pub fn cutoff_alpha(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let delta = theta - &self.theta_init;
        let md = self.norm.apply(&delta);
        let n = delta.dot(&md).max(0.0).sqrt();
        let (a, a1, _) = cutoff(n / self.eta);
        if a1 == 0.0 {
            return (a, DVector::zeros(theta.len()));
        }
        (a, md * (a1 / (self.eta * n)))
    }

    pub fn to_record(&self) -> SurrogateRecord {
        SurrogateRecord {
            theta_init: self.theta_init.iter().copied().collect(),
            eta: self.eta,
            k: self.k,
            m: if self.norm.is_identity() {
                MatrixRecord::Named("identity".into())
            } else {
                MatrixRecord::Dense(self.norm.matrix().row_iter().map(|r| r.iter().copied().collect()).collect())
            },
        }
    }

    pub fn from_record(rec: &SurrogateRecord) -> Result<Self> {
        let d = rec.theta_init.len();
        let norm = match &rec.m {
            MatrixRecord::Named(s) if s == "identity" => EllipsoidNorm::identity(d),
            MatrixRecord::Named(s) => {
                return Err(Error::InvalidArgument(format!("unknown matrix name {s}")));
            }
            MatrixRecord::Dense(rows) => {
                check_dim(d, rows.len())?;
                for r in rows {
                    check_dim(d, r.len())?;
                }
                EllipsoidNorm::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))?
            }
        };
        Self::new(DVector::from_column_slice(&rec.theta_init), rec.eta, rec.k, norm)
    }
}

/// Serialized form of a [`SurrogateSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateRecord {
    pub theta_init: Vec<f64>,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m: MatrixRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRecord {
    Named(String),
    Dense(Vec<Vec<f64>>),
}

/// `ℓ̃ = α_η ℓ − K γ_η(|θ − θ_init|₁)` wrapped around any log-likelihood.
#[derive(Debug, Clone)]
pub struct SurrogateLikelihood<L> {
    pub inner: L,
    pub spec: SurrogateSpec,
}

impl<L: LogLikelihood> SurrogateLikelihood<L> {
    pub fn new(inner: L, spec: SurrogateSpec) -> Result<Self> {
        check_dim(inner.dim(), spec.dim())?;
        Ok(Self { inner, spec })
    }

    fn geometry(&self, theta: &DVector<f64>) -> (DVector<f64>, DVector<f64>, f64) {
        let delta = theta - &self.spec.theta_init;
        let md = self.spec.norm.apply(&delta);
        let n = delta.dot(&md).max(0.0).sqrt();
        (delta, md, n)
    }
}

impl<L: LogLikelihood> LogLikelihood for SurrogateLikelihood<L> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn n_obs(&self) -> usize {
        self.inner.n_obs()
    }

    fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        let n = self.spec.distance(theta);
        if n <= 0.5 * self.spec.eta {
            return self.inner.value(theta);
        }
        let (a, _, _) = cutoff(n / self.spec.eta);
        let pen = self.spec.k * self.spec.gamma(n);
        if a == 0.0 {
            return Ok(-pen);
        }
        Ok(a * self.inner.value(theta)? - pen)
    }

    fn value_and_gradient(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_dim(self.dim(), theta.len())?;
        let (_, md, n) = self.geometry(theta);
        let eta = self.spec.eta;
        if n <= 0.5 * eta {
            return self.inner.value_and_gradient(theta);
        }
        let grad_n = md / n;
        let (a, a1, _) = cutoff(n / eta);
        let (g, g1, _) = gamma_eta_all(eta, n);
        let k = self.spec.k;
        if a == 0.0 {
            return Ok((-k * g, grad_n * (-k * g1)));
        }
        let (l, dl) = self.inner.value_and_gradient(theta)?;
        let value = a * l - k * g;
        let grad = dl * a + grad_n * (l * a1 / eta - k * g1);
        Ok((value, grad))
    }

    fn gradient(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), theta.len())?;
        let (_, _, n) = self.geometry(theta);
        if n <= 0.5 * self.spec.eta {
            return self.inner.gradient(theta);
        }
        Ok(self.value_and_gradient(theta)?.1)
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), theta.len())?;
        let (_, md, n) = self.geometry(theta);
        let eta = self.spec.eta;
        if n <= 0.5 * eta {
            return self.inner.hessian(theta);
        }
        let d = self.dim();
        let grad_n = &md / n;
        // ∇²|δ|₁ = (M − Mδ δᵀM / n²) / n
        let hess_n = (self.spec.norm.matrix() - &md * md.transpose() / (n * n)) / n;
        let (a, a1, a2) = cutoff(n / eta);
        let (_, g1, g2) = gamma_eta_all(eta, n);
        let k = self.spec.k;
        let outer_n = &grad_n * grad_n.transpose();
        let mut h = -(&outer_n * (k * g2) + &hess_n * (k * g1));
        if a != 0.0 {
            let (l, dl) = self.inner.value_and_gradient(theta)?;
            let hl = self.inner.hessian(theta)?;
            let cross = &grad_n * dl.transpose();
            h += hl * a
                + (&cross + cross.transpose()) * (a1 / eta)
                + (outer_n * (a2 / (eta * eta)) + hess_n * (a1 / eta)) * l;
        }
        debug_assert_eq!(h.nrows(), d);
        Ok(h)
    }
}

/// The three asymptotic tuning constants of the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub epsilon: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma_max: f64,
    pub eta: f64,
}

/// `ε = 1/log N`, `K = N D^{8/d} (log N)³`, `γ_max = 1/(N D^{8/d} (log N)⁴)`
/// and `η = ε D^{−4/d}`.
pub fn condition_23_params(n: usize, dsz: usize, d: usize) -> Result<AsymptoticParams> {
    if n < 3 {
        return Err(Error::DegenerateN(n));
    }
    let ln = (n as f64).ln();
    let nf = n as f64;
    let dd = dsz as f64;
    let dim = d as f64;
    let d8 = dd.powf(8.0 / dim);
    let epsilon = 1.0 / ln;
    Ok(AsymptoticParams {
        epsilon,
        k: nf * d8 * ln.powi(3),
        gamma_max: 1.0 / (nf * d8 * ln.powi(4)),
        eta: epsilon * dd.powf(-4.0 / dim),
    })
}

/// Radius used in practical mode, `1/log N`.
pub fn practical_eta(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::DegenerateN(n));
    }
    Ok(1.0 / (n as f64).ln())
}

/// `C N (c_max + 1)(1 + λ_max(M)/η²)/λ_min(M)` with `C = 8`.
pub fn k_lower_bound(c_max_hat: f64, n: usize, eta: f64, norm: &EllipsoidNorm) -> f64 {
    k_lower_bound_with(DEFAULT_K_CONSTANT, c_max_hat, n, eta, norm)
}

pub fn k_lower_bound_with(c: f64, c_max_hat: f64, n: usize, eta: f64, norm: &EllipsoidNorm) -> f64 {
    c * n as f64 * (c_max_hat + 1.0) * (1.0 + norm.lambda_max() / (eta * eta)) / norm.lambda_min()
}

/// Bound on the curvature of `−ℓ̃`: `7Kλ_max(M)` from the penalty plus
/// `N c_max` from the likelihood.
pub fn surrogate_stiffness(k: f64, norm: &EllipsoidNorm, n: usize, c_max_hat: f64) -> f64 {
    7.0 * k * norm.lambda_max() + n as f64 * c_max_hat
}

/// Largest stable Langevin step `1/Λ` for the surrogate posterior. With a
/// diagonal preconditioner equal to the prior standard deviations the prior
/// term becomes the identity, so `Λ = max(A)²·stiffness + 1`; without one,
/// `Λ = stiffness + max prior precision`.
pub fn step_limit(stiffness: f64, prior: &GaussianPrior, preconditioned: bool) -> f64 {
    if preconditioned {
        1.0 / (prior.std_dev().max().powi(2) * stiffness + 1.0)
    } else {
        1.0 / (stiffness + prior.precision_max())
    }
}
