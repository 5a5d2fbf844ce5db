//! Link function and the forward map `θ ↦ u_{f_θ}` with its derivatives.
//!
//! For `F = Σ θ_k e_k` and `f = Φ∘F`, the directional derivatives of the
//! solution are themselves zero-boundary Schrödinger solves:
//!
//! ```text
//!   Dᵥu        = V_f[u Φ'(F) Ψv]
//!   D²_{v,w}u  = V_f[u Φ''(F) Ψv Ψw + Φ'(F) Ψv Dwu + Φ'(F) Ψw Dvu]
//! ```
//!
//! where `V_f[ψ]` solves `½Δw − fw = ψ`. A [`ForwardState`] keeps the
//! factored operator for one `θ` so every extra direction costs one
//! back-substitution.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::pde::{BoundaryData, Grid, GridFunction, SchrodingerOperator};
use crate::spectral::{Basis, CoefficientVector};

/// Shifted softplus link `Φ(t) = K_min + log(1 + eᵗ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkFunction {
    pub k_min: f64,
}

impl Default for LinkFunction {
    fn default() -> Self {
        Self { k_min: 0.0 }
    }
}

impl LinkFunction {
    pub fn new(k_min: f64) -> Result<Self> {
        if !(k_min >= 0.0) || !k_min.is_finite() {
            return Err(Error::InvalidArgument(format!("K_min must be finite and nonnegative, got {k_min}")));
        }
        Ok(Self { k_min })
    }

    pub fn apply(&self, t: f64) -> f64 {
        // log(1+eᵗ) = max(t,0) + log1p(e^{−|t|})
        self.k_min + t.max(0.0) + (-t.abs()).exp().ln_1p()
    }

    /// `Φ'(t)`, the logistic function.
    pub fn d1(&self, t: f64) -> f64 {
        if t >= 0.0 {
            1.0 / (1.0 + (-t).exp())
        } else {
            let e = t.exp();
            e / (1.0 + e)
        }
    }

    /// `Φ''(t) = σ(t)(1 − σ(t))`.
    pub fn d2(&self, t: f64) -> f64 {
        let s = self.d1(t);
        let e = (-t.abs()).exp();
        // 1 − σ(t) computed without cancellation
        let complement = if t >= 0.0 { e / (1.0 + e) } else { 1.0 / (1.0 + e) };
        s * complement
    }

    /// `(Φ, Φ', Φ'')` from a single exponential; equal to the separate
    /// evaluations bit for bit.
    pub fn all(&self, t: f64) -> (f64, f64, f64) {
        let e = (-t.abs()).exp();
        let value = self.k_min + t.max(0.0) + e.ln_1p();
        let (s, complement) =
            if t >= 0.0 { (1.0 / (1.0 + e), e / (1.0 + e)) } else { (e / (1.0 + e), 1.0 / (1.0 + e)) };
        (value, s, s * complement)
    }

    /// `Φ⁻¹(y) = log(e^{y−K_min} − 1)`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let s = y - self.k_min;
        if !(s > 0.0) {
            return Err(Error::InverseDomain { value: y, k_min: self.k_min });
        }
        // log(eˢ − 1) = s + log(1 − e^{−s}) for large s
        Ok(if s > 1.0 { s + (-(-s).exp()).ln_1p() } else { s.exp_m1().ln() })
    }
}

/// The composite forward map `𝒢 = G ∘ Φ* ∘ Ψ`.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    basis: Arc<Basis>,
    link: LinkFunction,
    boundary: BoundaryData,
}

impl ForwardModel {
    pub fn new(basis: Arc<Basis>, link: LinkFunction, boundary: BoundaryData) -> Result<Self> {
        GridFunction::constant(*basis.grid(), 0.0, boundary.clone())?;
        if !(boundary.min() > 0.0) {
            return Err(Error::NonPositiveBoundary(boundary.min()));
        }
        Ok(Self { basis, link, boundary })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn grid(&self) -> &Grid {
        self.basis.grid()
    }

    pub fn link(&self) -> &LinkFunction {
        &self.link
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn dim(&self) -> usize {
        self.basis.size()
    }

    /// Potential `f_θ = Φ∘F_θ` on the grid.
    pub fn potential(&self, theta: &DVector<f64>) -> Result<GridFunction> {
        check_dim(self.dim(), theta.len())?;
        let f = self.basis.synthesize_values(theta).into_iter().map(|t| self.link.apply(t)).collect();
        GridFunction::new(*self.grid(), f, BoundaryData::zero())
    }

    /// Factors the Schrödinger operator at `θ` and solves for `u_{f_θ}`.
    pub fn state(&self, theta: &DVector<f64>) -> Result<ForwardState> {
        check_dim(self.dim(), theta.len())?;
        let big_f = self.basis.synthesize_values(theta);
        let n = big_f.len();
        let (mut f, mut d1, mut d2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for &t in &big_f {
            let (v, a, b) = self.link.all(t);
            f.push(v);
            d1.push(a);
            d2.push(b);
        }
        let op = SchrodingerOperator::new(*self.grid(), &f)?;
        let u = op.solve_boundary(&self.boundary)?;
        Ok(ForwardState { basis: self.basis.clone(), op, u, d1, d2 })
    }

    pub fn forward(&self, theta: &CoefficientVector) -> Result<GridFunction> {
        let state = self.state(&theta.values)?;
        GridFunction::new(*self.grid(), state.u, self.boundary.clone())
    }

    /// Directional derivative `vᵀ∇𝒢(θ)` as a zero-boundary grid function.
    pub fn gradient_apply(&self, theta: &CoefficientVector, v: &CoefficientVector) -> Result<GridFunction> {
        check_dim(self.dim(), v.len())?;
        let state = self.state(&theta.values)?;
        let values = state.direction(&v.values)?;
        GridFunction::new(*self.grid(), values, BoundaryData::zero())
    }

    /// Second derivative `v₁ᵀ∇²𝒢(θ)v₂` as a zero-boundary grid function.
    pub fn hessian_apply(
        &self,
        theta: &CoefficientVector,
        v1: &CoefficientVector,
        v2: &CoefficientVector,
    ) -> Result<GridFunction> {
        check_dim(self.dim(), v1.len())?;
        check_dim(self.dim(), v2.len())?;
        let state = self.state(&theta.values)?;
        let values = state.second_direction(&v1.values, &v2.values)?;
        GridFunction::new(*self.grid(), values, BoundaryData::zero())
    }
}

/// Factored operator and solution at one parameter value.
#[derive(Debug, Clone)]
pub struct ForwardState {
    basis: Arc<Basis>,
    op: SchrodingerOperator,
    u: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl ForwardState {
    /// Interior values of `u_{f_θ}`.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// `Φ'(F_θ)` on the grid.
    pub fn link_d1(&self) -> &[f64] {
        &self.d1
    }

    /// `Φ''(F_θ)` on the grid.
    pub fn link_d2(&self) -> &[f64] {
        &self.d2
    }

    pub fn operator(&self) -> &SchrodingerOperator {
        &self.op
    }

    /// `Dᵥu = V_f[u Φ'(F) Ψv]`.
    pub fn direction(&self, v: &DVector<f64>) -> Result<Vec<f64>> {
        let psi = self.basis.synthesize_values(v);
        self.direction_of_field(&psi)
    }

    /// `Dᵥu` for a direction given by its grid field `Ψv`.
    pub fn direction_of_field(&self, field: &[f64]) -> Result<Vec<f64>> {
        let src: Vec<f64> = (0..self.u.len()).map(|i| self.u[i] * self.d1[i] * field[i]).collect();
        self.op.solve_source(&src)
    }

    /// `D²_{v,w}u` by the three-term formula.
    pub fn second_direction(&self, v: &DVector<f64>, w: &DVector<f64>) -> Result<Vec<f64>> {
        let pv = self.basis.synthesize_values(v);
        let pw = self.basis.synthesize_values(w);
        let dv = self.direction_of_field(&pv)?;
        let dw = self.direction_of_field(&pw)?;
        let src: Vec<f64> = (0..self.u.len())
            .map(|i| self.u[i] * self.d2[i] * pv[i] * pw[i] + self.d1[i] * (pv[i] * dw[i] + pw[i] * dv[i]))
            .collect();
        self.op.solve_source(&src)
    }
}
