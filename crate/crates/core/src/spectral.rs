//! Dirichlet eigenbasis of `Δ/2` on the unit interval and square.
//!
//! In 1D, `e_k(x) = √2 sin(kπx)` with `λ_k = (kπ)²/2`. In 2D the modes are
//! products `e_j(x) e_l(y)` with `λ = (j²+l²)π²/2`, sorted by eigenvalue and
//! then lexicographically in `(j, l)`.
//!
//! Sampled on the finite-difference grid, the sines are exactly orthonormal
//! under the trapezoidal rule, so [`Basis::project`] inverts
//! [`Basis::synthesize`] to rounding error.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::pde::{BoundaryData, Grid, GridFunction};

/// Eigenvalue `λ` and mode indices `(j, l)` of the `k`-th eigenpair
/// (1-based). In 1D `l` is zero.
pub fn eigenpair(k: usize, dim: usize) -> Result<(f64, (usize, usize))> {
    if k == 0 {
        return Err(Error::InvalidArgument("eigenpair index is 1-based".into()));
    }
    let modes = mode_table(k, dim)?;
    let m = modes[k - 1];
    Ok((mode_eigenvalue(m, dim), m))
}

/// Evaluates the eigenfunction with mode indices `m` at `x`.
pub fn eigenfunction(m: (usize, usize), x: &[f64]) -> f64 {
    let s = |j: usize, t: f64| SQRT_2 * (j as f64 * PI * t).sin();
    if m.1 == 0 {
        s(m.0, x[0])
    } else {
        s(m.0, x[0]) * s(m.1, x[1])
    }
}

fn mode_eigenvalue(m: (usize, usize), dim: usize) -> f64 {
    let s = if dim == 1 { m.0 * m.0 } else { m.0 * m.0 + m.1 * m.1 };
    s as f64 * PI * PI / 2.0
}

fn mode_table(count: usize, dim: usize) -> Result<Vec<(usize, usize)>> {
    match dim {
        1 => Ok((1..=count).map(|k| (k, 0)).collect()),
        2 => {
            // pairs with j²+l² ≤ r² number about πr²/4
            let mut side = ((4.0 * count as f64 / PI).sqrt() * 1.5).ceil() as usize + 3;
            loop {
                let mut pairs: Vec<(usize, usize)> = (1..=side).flat_map(|j| (1..=side).map(move |l| (j, l))).collect();
                pairs.sort_by_key(|&(j, l)| (j * j + l * l, j, l));
                pairs.truncate(count);
                let last = pairs.last().map_or(0, |&(j, l)| j * j + l * l);
                // any pair outside the square has j²+l² ≥ (side+1)² + 1
                if last < (side + 1) * (side + 1) + 1 {
                    return Ok(pairs);
                }
                side *= 2;
            }
        }
        _ => Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {dim}"))),
    }
}

/// The first `D` eigenpairs together with their samples on a grid.
#[derive(Debug, Clone)]
pub struct Basis {
    grid: Grid,
    modes: Vec<(usize, usize)>,
    eigenvalues: DVector<f64>,
    /// `D × n_nodes`; row `k` holds `e_{k+1}` at the interior nodes.
    samples: DMatrix<f64>,
}

impl Basis {
    pub fn new(grid: Grid, size: usize) -> Result<Arc<Self>> {
        if size == 0 {
            return Err(Error::InvalidArgument("basis dimension must be positive".into()));
        }
        let modes = mode_table(size, grid.dim())?;
        let top = modes.iter().map(|m| m.0.max(m.1)).max().unwrap_or(0);
        if top > grid.n_interior() {
            return Err(Error::InvalidArgument(format!(
                "mode index {top} is not resolved by a grid with {} interior points per axis",
                grid.n_interior()
            )));
        }
        let eigenvalues = DVector::from_iterator(size, modes.iter().map(|&m| mode_eigenvalue(m, grid.dim())));
        let n = grid.len();
        let mut samples = DMatrix::zeros(size, n);
        for (node, x) in grid.nodes().enumerate() {
            for (k, &m) in modes.iter().enumerate() {
                samples[(k, node)] = eigenfunction(m, &x[..grid.dim()]);
            }
        }
        Ok(Arc::new(Self { grid, modes, eigenvalues, samples }))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Truncation dimension `D`.
    pub fn size(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[(usize, usize)] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Basis functions sampled on the grid, one row per mode.
    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// Values of all `D` basis functions at an arbitrary point.
    pub fn evaluate_at(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.size(), self.modes.iter().map(|&m| eigenfunction(m, x)))
    }

    /// Grid values of `Σ θ_k e_k`.
    pub fn synthesize_values(&self, theta: &DVector<f64>) -> Vec<f64> {
        self.samples.tr_mul(theta).data.into()
    }

    /// Trapezoidal inner products `⟨F, e_k⟩` for the first `D` modes.
    pub fn project_values(&self, values: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(values);
        &self.samples * v * self.grid.cell_volume()
    }

    pub fn synthesize(&self, theta: &CoefficientVector) -> Result<GridFunction> {
        check_dim(self.size(), theta.len())?;
        GridFunction::new(self.grid, self.synthesize_values(&theta.values), BoundaryData::zero())
    }

    /// Coefficients of `F` on the first `size` modes. `size` may not exceed
    /// the basis dimension.
    pub fn project(self: &Arc<Self>, f: &GridFunction, size: usize) -> Result<CoefficientVector> {
        if f.grid != self.grid {
            return Err(Error::InvalidArgument("function does not live on the basis grid".into()));
        }
        if size > self.size() {
            return Err(Error::DimensionMismatch { expected: self.size(), got: size });
        }
        let full = self.project_values(&f.values);
        let basis = if size == self.size() { self.clone() } else { Basis::new(self.grid, size)? };
        CoefficientVector::new(full.rows(0, size).into_owned(), basis)
    }

    /// `Λ_α = diag(λ_1^α, …, λ_D^α)`.
    pub fn lambda_alpha_matrix(&self, alpha: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.lambda_alpha(alpha))
    }

    /// Diagonal of `Λ_α`.
    pub fn lambda_alpha(&self, alpha: f64) -> DVector<f64> {
        self.eigenvalues.map(|l| l.powf(alpha))
    }
}

/// Coefficient vector `θ ∈ ℝ^D` tied to its basis.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    pub values: DVector<f64>,
    pub basis: Arc<Basis>,
}

impl CoefficientVector {
    pub fn new(values: DVector<f64>, basis: Arc<Basis>) -> Result<Self> {
        check_dim(basis.size(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coefficient vector has non-finite entries".into()));
        }
        Ok(Self { values, basis })
    }

    pub fn zeros(basis: Arc<Basis>) -> Self {
        Self { values: DVector::zeros(basis.size()), basis }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(Σ λ_k^α θ_k²)^{1/2}`.
    pub fn h_alpha_norm(&self, alpha: f64) -> f64 {
        h_alpha_norm(&self.values, self.basis.eigenvalues(), alpha)
    }
}

/// `(Σ λ_k^α θ_k²)^{1/2}` for raw coefficients.
pub fn h_alpha_norm(theta: &DVector<f64>, eigenvalues: &DVector<f64>, alpha: f64) -> f64 {
    theta.iter().zip(eigenvalues.iter()).map(|(t, l)| l.powf(alpha) * t * t).sum::<f64>().sqrt()
}
