//! Finite-difference solvers for the Dirichlet Schrödinger problem
//!
//! ```text
//!   ½Δu − f u = 0  on (0,1)^d,   u = g  on the boundary
//!   ½Δw − f w = ψ  on (0,1)^d,   w = 0  on the boundary
//! ```
//!
//! on a uniform grid with `n_interior` unknowns per axis. The discrete
//! operator `S = −½Δ_h + diag(f)` is symmetric positive definite for `f ≥ 0`
//! and an M-matrix, so the discrete maximum principle holds exactly.
//!
//! In 1D the system is tridiagonal and factored with an LDLᵀ sweep. In 2D it
//! is banded with half-bandwidth `n_interior`; a banded Cholesky factor is
//! used up to [`DIRECT_2D_LIMIT`] points per axis and preconditioned
//! conjugate gradients beyond.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n_interior` for which 2D systems are factored directly.
pub const DIRECT_2D_LIMIT: usize = 256;

/// Relative residual tolerance of the iterative 2D solver.
pub const CG_TOLERANCE: f64 = 1e-10;

/// Uniform grid on the unit interval or unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n_interior: usize,
}

impl Grid {
    pub fn new(dim: usize, n_interior: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n_interior < 3 {
            return Err(Error::InvalidArgument(format!("n_interior must be at least 3, got {n_interior}")));
        }
        Ok(Self { dim, n_interior })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Grid spacing `1/(n_interior+1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_interior + 1) as f64
    }

    /// Number of interior nodes, `n_interior^dim`.
    pub fn len(&self) -> usize {
        self.n_interior.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element of the trapezoidal rule, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinates of interior node `index` (x-index fastest in 2D).
    pub fn node(&self, index: usize) -> [f64; 2] {
        let h = self.spacing();
        let n = self.n_interior;
        match self.dim {
            1 => [(index + 1) as f64 * h, 0.0],
            _ => [((index % n) + 1) as f64 * h, ((index / n) + 1) as f64 * h],
        }
    }

    /// Iterator over the coordinates of all interior nodes.
    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }
}

/// Dirichlet boundary values.
///
/// `Tabulated` holds the two endpoint values `[g(0), g(1)]` and is only
/// meaningful in 1D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryData {
    Constant(f64),
    Tabulated(Vec<f64>),
}

impl BoundaryData {
    pub fn zero() -> Self {
        BoundaryData::Constant(0.0)
    }

    pub fn min(&self) -> f64 {
        match self {
            BoundaryData::Constant(c) => *c,
            BoundaryData::Tabulated(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            BoundaryData::Constant(c) => *c,
            BoundaryData::Tabulated(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            BoundaryData::Constant(c) if c.is_finite() => Ok(()),
            BoundaryData::Constant(c) => Err(Error::InvalidArgument(format!("boundary value {c} is not finite"))),
            BoundaryData::Tabulated(v) => {
                if grid.dim() != 1 {
                    return Err(Error::InvalidArgument("tabulated boundary data is only supported in 1D".into()));
                }
                if v.len() != 2 || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "1D tabulated boundary data needs two finite endpoint values".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Boundary values at the left and right ends (1D); both equal in 2D.
    fn ends(&self) -> (f64, f64) {
        match self {
            BoundaryData::Constant(c) => (*c, *c),
            BoundaryData::Tabulated(v) => (v[0], v[1]),
        }
    }

    /// The harmonic extension of the boundary datum evaluated at `x`:
    /// constant, or the linear interpolant of the two endpoints in 1D.
    pub fn harmonic_lift(&self, x: &[f64]) -> f64 {
        let (a, b) = self.ends();
        a + (b - a) * x[0]
    }
}

/// A function sampled at the interior nodes of a grid, together with its
/// boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub boundary: BoundaryData,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, boundary: BoundaryData) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid value at node {i} is not finite")));
        }
        boundary.validate(&grid)?;
        Ok(Self { grid, values, boundary })
    }

    /// Samples `func` at the interior nodes.
    pub fn from_fn(grid: Grid, boundary: BoundaryData, func: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = grid.nodes().map(func).collect();
        Self::new(grid, values, boundary)
    }

    pub fn constant(grid: Grid, value: f64, boundary: BoundaryData) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], boundary)
    }

    /// Largest absolute nodal value, interior nodes only.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm by the trapezoidal rule with zero boundary contribution.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Trapezoidal inner product of the interior values.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        dot(&self.values, &other.values) * self.grid.cell_volume()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factored discrete Schrödinger operator `S = −½Δ_h + diag(f)`.
///
/// Built once per potential and reused for every right-hand side, which is
/// what makes the derivative computations cheap.
#[derive(Debug, Clone)]
pub struct SchrodingerOperator {
    grid: Grid,
    potential: Vec<f64>,
    factor: Factor,
}

#[derive(Debug, Clone)]
enum Factor {
    /// LDLᵀ of a symmetric tridiagonal matrix.
    Tridiagonal { pivots: Vec<f64>, multipliers: Vec<f64> },
    /// Lower band of the Cholesky factor, `bw+1` entries per row.
    Banded { band: Vec<f64>, bw: usize },
    /// Matrix-free conjugate gradients.
    Iterative,
}

impl SchrodingerOperator {
    pub fn new(grid: Grid, potential: &[f64]) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: potential.len() });
        }
        if let Some((index, &value)) = potential.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::NonPositivePotential { index, value });
        }
        let factor = match grid.dim() {
            1 => factor_tridiagonal(&grid, potential)?,
            _ if grid.n_interior() <= DIRECT_2D_LIMIT => factor_banded(&grid, potential)?,
            _ => Factor::Iterative,
        };
        Ok(Self { grid, potential: potential.to_vec(), factor })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn off_diagonal(&self) -> f64 {
        let h = self.grid.spacing();
        -0.5 / (h * h)
    }

    fn diagonal(&self, i: usize) -> f64 {
        let h = self.grid.spacing();
        self.grid.dim() as f64 / (h * h) + self.potential[i]
    }

    /// Matrix-vector product `S x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.n_interior();
        let off = self.off_diagonal();
        let mut out = vec![0.0; x.len()];
        match self.grid.dim() {
            1 => {
                for i in 0..n {
                    let mut s = self.diagonal(i) * x[i];
                    if i > 0 {
                        s += off * x[i - 1];
                    }
                    if i + 1 < n {
                        s += off * x[i + 1];
                    }
                    out[i] = s;
                }
            }
            _ => {
                for j in 0..n {
                    for i in 0..n {
                        let k = i + n * j;
                        let mut s = self.diagonal(k) * x[k];
                        if i > 0 {
                            s += off * x[k - 1];
                        }
                        if i + 1 < n {
                            s += off * x[k + 1];
                        }
                        if j > 0 {
                            s += off * x[k - n];
                        }
                        if j + 1 < n {
                            s += off * x[k + n];
                        }
                        out[k] = s;
                    }
                }
            }
        }
        out
    }

    /// Solves `S x = rhs`.
    pub fn solve_spd(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.factor {
            Factor::Tridiagonal { pivots, multipliers } => {
                let n = pivots.len();
                let mut y = rhs.to_vec();
                for i in 1..n {
                    y[i] -= multipliers[i] * y[i - 1];
                }
                let off = self.off_diagonal();
                y[n - 1] /= pivots[n - 1];
                for i in (0..n - 1).rev() {
                    y[i] = (y[i] - off * y[i + 1]) / pivots[i];
                }
                Ok(y)
            }
            Factor::Banded { band, bw } => Ok(banded_cholesky_solve(band, *bw, rhs)),
            Factor::Iterative => self.conjugate_gradient(rhs),
        }
    }

    /// Right-hand side contributed by boundary values `g`: the interior
    /// solution of `½Δu − fu = 0, u = g` solves `S u = b`.
    pub fn boundary_rhs(&self, g: &BoundaryData) -> Vec<f64> {
        let n = self.grid.n_interior();
        let c = -self.off_diagonal();
        let (left, right) = g.ends();
        let mut b = vec![0.0; self.grid.len()];
        match self.grid.dim() {
            1 => {
                b[0] += c * left;
                b[n - 1] += c * right;
            }
            _ => {
                for j in 0..n {
                    for i in 0..n {
                        let k = i + n * j;
                        let touches =
                            (i == 0) as usize + (i + 1 == n) as usize + (j == 0) as usize + (j + 1 == n) as usize;
                        b[k] += c * left * touches as f64;
                    }
                }
            }
        }
        b
    }

    /// Interior values of `u_f` with boundary datum `g`.
    pub fn solve_boundary(&self, g: &BoundaryData) -> Result<Vec<f64>> {
        self.solve_spd(&self.boundary_rhs(g))
    }

    /// `V_f[ψ]`: the solution of `½Δw − fw = ψ` with zero boundary values.
    pub fn solve_source(&self, psi: &[f64]) -> Result<Vec<f64>> {
        let mut w = self.solve_spd(psi)?;
        w.iter_mut().for_each(|v| *v = -*v);
        Ok(w)
    }

    fn conjugate_gradient(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / self.diagonal(i)).collect();
        let rhs_norm = dot(rhs, rhs).sqrt();
        let mut x = vec![0.0; n];
        if rhs_norm == 0.0 {
            return Ok(x);
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let max_iters = 20 * n;
        for _ in 0..max_iters {
            let ap = self.apply(&p);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if dot(&r, &r).sqrt() <= CG_TOLERANCE * rhs_norm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::SolverStalled { iters: max_iters, tol: CG_TOLERANCE, residual: dot(&r, &r).sqrt() / rhs_norm })
    }
}

fn factor_tridiagonal(grid: &Grid, f: &[f64]) -> Result<Factor> {
    let n = grid.n_interior();
    let h = grid.spacing();
    let off = -0.5 / (h * h);
    let mut pivots = vec![0.0; n];
    let mut multipliers = vec![0.0; n];
    pivots[0] = 1.0 / (h * h) + f[0];
    for i in 1..n {
        multipliers[i] = off / pivots[i - 1];
        pivots[i] = 1.0 / (h * h) + f[i] - multipliers[i] * off;
        if !(pivots[i] > 0.0) {
            return Err(Error::SingularSystem { row: i, pivot: pivots[i] });
        }
    }
    Ok(Factor::Tridiagonal { pivots, multipliers })
}

fn factor_banded(grid: &Grid, f: &[f64]) -> Result<Factor> {
    let n = grid.n_interior();
    let size = grid.len();
    let bw = n;
    let h = grid.spacing();
    let off = -0.5 / (h * h);
    let w = bw + 1;
    // band[r*w + (c + bw - r)] holds entry (r, c) for r-bw <= c <= r
    let mut band = vec![0.0; size * w];
    for r in 0..size {
        band[r * w + bw] = 2.0 / (h * h) + f[r];
        if r % n != 0 {
            band[r * w + bw - 1] = off;
        }
        if r >= n {
            band[r * w] = off;
        }
    }
    for j in 0..size {
        let lo = j.saturating_sub(bw);
        let row_j = &band[j * w..(j + 1) * w];
        let mut diag = row_j[bw];
        for k in lo..j {
            let l = row_j[k + bw - j];
            diag -= l * l;
        }
        if !(diag > 0.0) {
            return Err(Error::SingularSystem { row: j, pivot: diag });
        }
        let ljj = diag.sqrt();
        band[j * w + bw] = ljj;
        let hi = (j + bw).min(size - 1);
        for i in j + 1..=hi {
            let lo_i = i.saturating_sub(bw);
            let mut s = band[i * w + (j + bw - i)];
            for k in lo_i.max(lo)..j {
                s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
            }
            band[i * w + (j + bw - i)] = s / ljj;
        }
    }
    Ok(Factor::Banded { band, bw })
}

fn banded_cholesky_solve(band: &[f64], bw: usize, rhs: &[f64]) -> Vec<f64> {
    let size = rhs.len();
    let w = bw + 1;
    let mut y = rhs.to_vec();
    for i in 0..size {
        let lo = i.saturating_sub(bw);
        let mut s = y[i];
        for k in lo..i {
            s -= band[i * w + (k + bw - i)] * y[k];
        }
        y[i] = s / band[i * w + bw];
    }
    for i in (0..size).rev() {
        let hi = (i + bw).min(size - 1);
        let mut s = y[i];
        for k in i + 1..=hi {
            s -= band[k * w + (i + bw - k)] * y[k];
        }
        y[i] = s / band[i * w + bw];
    }
    y
}

fn check_forward_inputs(f: &GridFunction, g: &BoundaryData) -> Result<()> {
    g.validate(&f.grid)?;
    let gmin = g.min();
    if !(gmin > 0.0) {
        return Err(Error::NonPositiveBoundary(gmin));
    }
    Ok(())
}

/// Solves `½Δu − fu = 0` with `u = g` on the boundary.
pub fn solve_schrodinger(f: &GridFunction, g: &BoundaryData) -> Result<GridFunction> {
    check_forward_inputs(f, g)?;
    let op = SchrodingerOperator::new(f.grid, &f.values)?;
    let values = op.solve_boundary(g)?;
    GridFunction::new(f.grid, values, g.clone())
}

/// Computes `V_f[ψ]`, the zero-boundary solution of `½Δw − fw = ψ`.
pub fn solve_source(f: &GridFunction, psi: &GridFunction) -> Result<GridFunction> {
    if f.grid != psi.grid {
        return Err(Error::InvalidArgument("potential and source live on different grids".into()));
    }
    let op = SchrodingerOperator::new(f.grid, &f.values)?;
    let values = op.solve_source(&psi.values)?;
    GridFunction::new(f.grid, values, BoundaryData::zero())
}

/// Multilinear interpolation of `u` at `x`, using boundary values in the
/// cells adjacent to the boundary.
pub fn interpolate(u: &GridFunction, x: &[f64]) -> Result<f64> {
    let stencil = Stencil::locate(&u.grid, x)?;
    Ok(stencil.evaluate(&u.values, &u.boundary))
}

/// Interpolation weights of one point: up to four interior nodes plus the
/// weight carried by boundary nodes (left/right separately for 1D).
#[derive(Debug, Clone, Copy)]
struct Stencil {
    nodes: [(usize, f64); 4],
    len: usize,
    boundary: [f64; 2],
}

impl Stencil {
    fn locate(grid: &Grid, x: &[f64]) -> Result<Self> {
        if x.len() != grid.dim() || x.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        let n = grid.n_interior();
        let inv_h = (n + 1) as f64;
        // full-grid index (0 and n+1 are boundary) and weight of the right node
        let cell = |c: f64| -> (usize, f64) {
            let s = c * inv_h;
            let k = (s.floor() as usize).min(n);
            (k, s - k as f64)
        };
        let mut st = Stencil { nodes: [(0, 0.0); 4], len: 0, boundary: [0.0; 2] };
        match grid.dim() {
            1 => {
                let (k, t) = cell(x[0]);
                for (node, w) in [(k, 1.0 - t), (k + 1, t)] {
                    if node == 0 {
                        st.boundary[0] += w;
                    } else if node == n + 1 {
                        st.boundary[1] += w;
                    } else {
                        st.push(node - 1, w);
                    }
                }
            }
            _ => {
                let (kx, tx) = cell(x[0]);
                let (ky, ty) = cell(x[1]);
                for (ix, wx) in [(kx, 1.0 - tx), (kx + 1, tx)] {
                    for (iy, wy) in [(ky, 1.0 - ty), (ky + 1, ty)] {
                        let w = wx * wy;
                        if ix == 0 || iy == 0 || ix == n + 1 || iy == n + 1 {
                            st.boundary[0] += w;
                        } else {
                            st.push((ix - 1) + n * (iy - 1), w);
                        }
                    }
                }
            }
        }
        Ok(st)
    }

    fn push(&mut self, node: usize, w: f64) {
        self.nodes[self.len] = (node, w);
        self.len += 1;
    }

    fn interior(&self, values: &[f64]) -> f64 {
        self.nodes[..self.len].iter().map(|&(i, w)| w * values[i]).sum()
    }

    fn evaluate(&self, values: &[f64], boundary: &BoundaryData) -> f64 {
        let (left, right) = boundary.ends();
        self.interior(values) + self.boundary[0] * left + self.boundary[1] * right
    }
}

/// A symmetric matrix on the interior nodes in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseSymmetric {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.row_start.windows(2).map(|r| (r[0]..r[1]).map(|k| self.vals[k] * x[self.cols[k]]).sum()).collect()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

/// Point-evaluation operator for a fixed set of design points.
///
/// Maps interior grid values to interpolated values at the points; the
/// transpose scatters point residuals back to the grid (the adjoint source).
#[derive(Debug, Clone)]
pub struct ObservationOperator {
    grid: Grid,
    stencils: Vec<Stencil>,
}

impl ObservationOperator {
    pub fn new(grid: Grid, points: &[Vec<f64>]) -> Result<Self> {
        let stencils = points.iter().map(|x| Stencil::locate(&grid, x)).collect::<Result<_>>()?;
        Ok(Self { grid, stencils })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    /// Values at the points of a function with the given boundary data.
    pub fn apply(&self, values: &[f64], boundary: &BoundaryData) -> Vec<f64> {
        self.stencils.iter().map(|s| s.evaluate(values, boundary)).collect()
    }

    /// Values at the points of a function that vanishes on the boundary.
    pub fn apply_interior(&self, values: &[f64]) -> Vec<f64> {
        self.stencils.iter().map(|s| s.interior(values)).collect()
    }

    /// The sparse Gram operator `PᵀP` of [`Self::apply_interior`].
    pub fn gram(&self) -> SparseSymmetric {
        let mut entries = std::collections::BTreeMap::new();
        for s in &self.stencils {
            for &(i, wi) in &s.nodes[..s.len] {
                for &(j, wj) in &s.nodes[..s.len] {
                    *entries.entry((i, j)).or_insert(0.0) += wi * wj;
                }
            }
        }
        let mut row_start = vec![0; self.grid.len() + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for ((i, j), v) in entries {
            row_start[i + 1] += 1;
            cols.push(j);
            vals.push(v);
        }
        for i in 0..self.grid.len() {
            row_start[i + 1] += row_start[i];
        }
        SparseSymmetric { row_start, cols, vals }
    }

    /// Transpose of [`Self::apply_interior`].
    pub fn transpose_apply(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (s, &r) in self.stencils.iter().zip(weights) {
            for &(i, w) in &s.nodes[..s.len] {
                out[i] += w * r;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    #[test]
    fn harmonic_with_constant_boundary() {
        let g = grid1(31);
        let f = GridFunction::constant(g, 0.0, BoundaryData::zero()).unwrap();
        let u = solve_schrodinger(&f, &BoundaryData::Constant(1.0)).unwrap();
        for v in &u.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_potential_closed_form() {
        let g = grid1(511);
        let f = GridFunction::constant(g, 2.0, BoundaryData::zero()).unwrap();
        let u = solve_schrodinger(&f, &BoundaryData::Constant(1.0)).unwrap();
        let mid = u.values[255];
        assert!((mid - 0.648054).abs() < 1e-5, "u(0.5) = {mid}");
    }

    #[test]
    fn source_solve_quadratic() {
        let g = grid1(63);
        let f = GridFunction::constant(g, 0.0, BoundaryData::zero()).unwrap();
        let psi = GridFunction::constant(g, 1.0, BoundaryData::zero()).unwrap();
        let w = solve_source(&f, &psi).unwrap();
        // w'' = 2 with zero ends is reproduced exactly by the 3-point stencil
        for (x, v) in g.nodes().zip(&w.values) {
            assert!((v - (x[0] * x[0] - x[0])).abs() < 1e-12);
        }
        assert!((w.values[31] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = Grid::new(2, 7).unwrap();
        let f = GridFunction::constant(g, 1.5, BoundaryData::zero()).unwrap();
        let psi = GridFunction::constant(g, 0.0, BoundaryData::zero()).unwrap();
        let w = solve_source(&f, &psi).unwrap();
        assert!(w.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn negative_potential_rejected() {
        let g = grid1(5);
        let f = GridFunction::new(g, vec![0.0, 1.0, -0.1, 0.0, 0.0], BoundaryData::zero()).unwrap();
        match solve_schrodinger(&f, &BoundaryData::Constant(1.0)) {
            Err(Error::NonPositivePotential { index: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nonpositive_boundary_rejected() {
        let g = grid1(5);
        let f = GridFunction::constant(g, 1.0, BoundaryData::zero()).unwrap();
        assert!(matches!(solve_schrodinger(&f, &BoundaryData::Constant(0.0)), Err(Error::NonPositiveBoundary(_))));
    }

    #[test]
    fn banded_matches_iterative() {
        let g = Grid::new(2, 9).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| (i % 7) as f64 * 0.3).collect();
        let op = SchrodingerOperator::new(g, &f).unwrap();
        let rhs: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let direct = op.solve_spd(&rhs).unwrap();
        let iterative = SchrodingerOperator { factor: Factor::Iterative, ..op.clone() }.solve_spd(&rhs).unwrap();
        for (a, b) in direct.iter().zip(&iterative) {
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
        }
        let back = op.apply(&direct);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn tabulated_boundary_linear_profile() {
        let g = grid1(15);
        let f = GridFunction::constant(g, 0.0, BoundaryData::zero()).unwrap();
        let u = solve_schrodinger(&f, &BoundaryData::Tabulated(vec![1.0, 3.0])).unwrap();
        for (x, v) in g.nodes().zip(&u.values) {
            assert!((v - (1.0 + 2.0 * x[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_boundary_rejected_in_2d() {
        let g = Grid::new(2, 5).unwrap();
        assert!(GridFunction::constant(g, 1.0, BoundaryData::Tabulated(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn interpolation_reproduces_affine() {
        let g = grid1(10);
        let u = GridFunction::from_fn(g, BoundaryData::Tabulated(vec![0.0, 1.0]), |x| x[0]).unwrap();
        for x in [0.0, 0.03, 0.3, 0.5, 0.97, 1.0] {
            assert!((interpolate(&u, &[x]).unwrap() - x).abs() < 1e-14);
        }
        let c = GridFunction::constant(Grid::new(2, 6).unwrap(), 2.5, BoundaryData::Constant(2.5)).unwrap();
        assert!((interpolate(&c, &[0.01, 0.77]).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn interpolation_error_quadratic() {
        let g = grid1(99);
        let u = GridFunction::from_fn(g, BoundaryData::Tabulated(vec![0.0, 1.0]), |x| x[0] * x[0]).unwrap();
        let h = g.spacing();
        assert!((interpolate(&u, &[0.3]).unwrap() - 0.09).abs() <= h * h);
    }

    #[test]
    fn interpolation_out_of_domain() {
        let g = grid1(10);
        let u = GridFunction::constant(g, 1.0, BoundaryData::Constant(1.0)).unwrap();
        assert!(matches!(interpolate(&u, &[1.2]), Err(Error::OutOfDomain(_))));
        assert!(matches!(interpolate(&u, &[0.2, 0.3]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn observation_transpose_is_adjoint() {
        let g = Grid::new(2, 8).unwrap();
        let pts: Vec<Vec<f64>> = (0..17).map(|i| vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.71) % 1.0]).collect();
        let obs = ObservationOperator::new(g, &pts).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| (i as f64).sin()).collect();
        let r: Vec<f64> = (0..pts.len()).map(|i| (i as f64).cos()).collect();
        let lhs = dot(&obs.apply_interior(&v), &r);
        let rhs = dot(&v, &obs.transpose_apply(&r));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gram_matches_dense_product() {
        for dim in [1, 2] {
            let g = Grid::new(dim, if dim == 1 { 9 } else { 4 }).unwrap();
            let pts: Vec<Vec<f64>> = (0..37)
                .map(|i| (0..dim).map(|a| ((i * (a + 3)) as f64 * 0.137).fract()).collect())
                .chain([vec![0.0; dim], vec![1.0; dim]])
                .collect();
            let obs = ObservationOperator::new(g, &pts).unwrap();
            let v: Vec<f64> = (0..g.len()).map(|i| (1.3 * i as f64).cos()).collect();
            let dense = obs.transpose_apply(&obs.apply_interior(&v));
            let sparse = obs.gram().apply(&v);
            for (a, b) in dense.iter().zip(&sparse) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    fn closed_form_error(n: usize) -> f64 {
        let g = grid1(n);
        let f = GridFunction::constant(g, 2.0, BoundaryData::zero()).unwrap();
        let u = solve_schrodinger(&f, &BoundaryData::Constant(1.0)).unwrap();
        g.nodes().zip(&u.values).map(|(x, v)| (v - (2.0 * (x[0] - 0.5)).cosh() / 1f64.cosh()).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn second_order_convergence() {
        let coarse = closed_form_error(63);
        let fine = closed_form_error(127);
        let ratio = coarse / fine;
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
        assert!(closed_form_error(511) < 1e-4);
    }

    #[test]
    fn source_solve_is_symmetric() {
        for dim in [1, 2] {
            let g = Grid::new(dim, if dim == 1 { 101 } else { 15 }).unwrap();
            let f = GridFunction::from_fn(g, BoundaryData::zero(), |x| 1.0 + (5.0 * x[0]).sin() + x[1]).unwrap();
            let p1 = GridFunction::from_fn(g, BoundaryData::zero(), |x| (3.0 * x[0]).cos() - x[1]).unwrap();
            let p2 = GridFunction::from_fn(g, BoundaryData::zero(), |x| x[0] * x[0] + 2.0 * x[1]).unwrap();
            let a = solve_source(&f, &p1).unwrap().inner(&p2);
            let b = p1.inner(&solve_source(&f, &p2).unwrap());
            assert!((a - b).abs() <= 1e-10 * p1.l2_norm() * p2.l2_norm());
        }
    }

    fn potential_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..50.0], len)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn maximum_principle_1d(f in potential_strategy(40), a in 0.1f64..2.0, b in 0.1f64..2.0) {
            let g = grid1(40);
            let f = GridFunction::new(g, f, BoundaryData::zero()).unwrap();
            let bd = BoundaryData::Tabulated(vec![a, b]);
            let u = solve_schrodinger(&f, &bd).unwrap();
            for v in &u.values {
                prop_assert!(*v > 0.0 && *v <= a.max(b) + 1e-12);
            }
        }

        #[test]
        fn maximum_principle_2d(f in potential_strategy(100), c in 0.1f64..2.0) {
            let g = Grid::new(2, 10).unwrap();
            let f = GridFunction::new(g, f, BoundaryData::zero()).unwrap();
            let u = solve_schrodinger(&f, &BoundaryData::Constant(c)).unwrap();
            for v in &u.values {
                prop_assert!(*v > 0.0 && *v <= c + 1e-12);
            }
        }

        #[test]
        fn source_solve_bounded_and_linear(
            f in potential_strategy(30),
            psi in prop::collection::vec(-1.0f64..1.0, 30),
            s in -3.0f64..3.0,
        ) {
            let g = grid1(30);
            let f = GridFunction::new(g, f, BoundaryData::zero()).unwrap();
            let p = GridFunction::new(g, psi.clone(), BoundaryData::zero()).unwrap();
            let w = solve_source(&f, &p).unwrap();
            // sharp constant for ½Δ: attained by f ≡ 0, ψ ≡ 1
            prop_assert!(w.max_abs() <= 0.25 * p.max_abs() + 1e-14);
            let scaled = GridFunction::new(g, psi.iter().map(|v| s * v).collect(), BoundaryData::zero()).unwrap();
            let ws = solve_source(&f, &scaled).unwrap();
            for (a, b) in ws.values.iter().zip(&w.values) {
                prop_assert!((a - s * b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
