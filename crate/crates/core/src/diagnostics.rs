//! Wasserstein estimators, curvature probes, reference posteriors and the
//! non-asymptotic bound formulas.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::likelihood::{LogDensity, LogLikelihood};
use crate::spectral::eigenpair;

/// Slope of the least-squares line through `(x, y)`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Exact `W₂` between two empirical measures on the line.
///
/// The quantile functions are step functions with jumps at `i/n` and
/// `j/m`; the squared distance integrates their difference over the merged
/// breakpoints, which reduces to sorted pairing when `n = m`.
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut t = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let next = next_a.min(next_b);
        let diff = a[i] - b[j];
        total += (next - t) * diff * diff;
        t = next;
        // advance whichever quantile jumps here, both on ties
        match ((i + 1) * m).cmp(&((j + 1) * n)) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    Ok(total.max(0.0).sqrt())
}

/// `W₂` between Gaussians with diagonal covariances.
pub fn w2_gaussian_proxy(
    mean_a: &DVector<f64>,
    var_a: &DVector<f64>,
    mean_b: &DVector<f64>,
    var_b: &DVector<f64>,
) -> f64 {
    let spread: f64 =
        var_a.iter().zip(var_b.iter()).map(|(x, y)| (x.max(0.0).sqrt() - y.max(0.0).sqrt()).powi(2)).sum();
    ((mean_a - mean_b).norm_squared() + spread).sqrt()
}

fn spd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let s = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&s) * eig.eigenvectors.transpose()
}

/// `W₂` between Gaussians with full covariances.
pub fn w2_gaussian(mean_a: &DVector<f64>, cov_a: &DMatrix<f64>, mean_b: &DVector<f64>, cov_b: &DMatrix<f64>) -> f64 {
    let ra = spd_sqrt(cov_a);
    let cross = spd_sqrt(&(&ra * cov_b * &ra));
    let tr = cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
    ((mean_a - mean_b).norm_squared() + tr.max(0.0)).sqrt()
}

/// Largest sample size accepted by [`w2_empirical`].
pub const ASSIGNMENT_LIMIT: usize = 512;

/// Exact `W₂` between two equal-size point clouds, by solving the optimal
/// assignment problem.
pub fn w2_empirical(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    check_dim(a.len(), b.len())?;
    if a.len() > ASSIGNMENT_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "exact assignment is limited to {ASSIGNMENT_LIMIT} samples, got {}",
            a.len()
        )));
    }
    let cost = DMatrix::from_fn(a.len(), b.len(), |i, j| (&a[i] - &b[j]).norm_squared());
    let perm = assignment(&cost);
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    Ok((total / a.len() as f64).sqrt())
}

/// Minimum-cost perfect matching of a square cost matrix (Hungarian method
/// with potentials, `O(n³)`). Returns the column assigned to each row.
pub fn assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row matched to column j (1-based, 0 = none)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

/// Extreme eigenvalues of the negative log-likelihood Hessian over a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    #[serde(rename = "D")]
    pub dsz: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda_min_hat: f64,
    pub lambda_max_hat: f64,
    pub c_min_hat: f64,
    /// Largest `(|ℓ| + ‖∇ℓ‖ + ‖∇²ℓ‖)/N` over the probes.
    pub c_max_hat: f64,
    pub n_probe: usize,
    pub seeds: Vec<u64>,
}

/// Assembles `−∇²ℓ` at the center and at `n_probe` uniform points of the
/// Euclidean ball of the given radius.
pub fn estimate_curvature<L: LogLikelihood>(
    lik: &L,
    center: &DVector<f64>,
    radius: f64,
    n_probe: usize,
    seed: u64,
) -> Result<CurvatureReport> {
    let dim = lik.dim();
    check_dim(dim, center.len())?;
    if n_probe == 0 {
        return Err(Error::InvalidArgument("at least one probe point is needed".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut points = vec![center.clone()];
    for _ in 0..n_probe {
        let dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
        points.push(center + dir.normalize() * r);
    }
    let per_point: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|p| {
            let h = -lik.hessian(p)?;
            let eig = SymmetricEigen::new(h.clone()).eigenvalues;
            let (v, g) = lik.value_and_gradient(p)?;
            let op = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            Ok((eig.min(), eig.max(), v.abs() + g.norm() + op))
        })
        .collect::<Result<_>>()?;
    let nobs = lik.n_obs();
    let lambda_min_hat = per_point.iter().map(|t| t.0).fold(f64::INFINITY, f64::min);
    let lambda_max_hat = per_point.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let sup = per_point.iter().map(|t| t.2).fold(0.0, f64::max);
    Ok(CurvatureReport {
        dsz: dim,
        n: nobs,
        lambda_min_hat,
        lambda_max_hat,
        c_min_hat: lambda_min_hat / nobs as f64,
        c_max_hat: sup / nobs as f64,
        n_probe,
        seeds: vec![seed],
    })
}

/// Inputs of [`bound_certificate`]. `c1`, `c2` are calibration constants,
/// not values from the theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateInput {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "D")]
    pub dsz: usize,
    pub d: usize,
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub lambda_min_m: f64,
    pub lambda_max_m: f64,
    pub gamma: f64,
    pub c_min: f64,
    pub eta: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// `log ρ`; defaults to `−N^{d/(2α+d)}`.
    pub log_rho: Option<f64>,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub m: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub b_gamma: f64,
    #[serde(rename = "B_gamma")]
    pub big_b_gamma: f64,
    pub tau: f64,
    pub kappa_sigma: f64,
    /// Smallest `k` with `4(τ + D/m)(1 − γm/2)^k ≤ ρ`; infinite for `γ = 0`.
    pub k_mix_estimate: f64,
    pub log_rho: f64,
    pub calibration: String,
}

/// Evaluates `m`, `Λ`, `b(γ)`, `B(γ)`, `τ` and the mixing time bound.
pub fn bound_certificate(input: &CertificateInput) -> Result<BoundCertificate> {
    let CertificateInput { n, dsz, d, alpha, k, lambda_min_m, lambda_max_m, gamma, c_min, eta, r, log_rho, c1, c2 } =
        input.clone();
    if n < 3 || dsz == 0 || !(gamma >= 0.0) || !(lambda_min_m > 0.0) || lambda_max_m < lambda_min_m {
        return Err(Error::InvalidArgument("certificate inputs out of range".into()));
    }
    let nf = n as f64;
    let dd = dsz as f64;
    let df = d as f64;
    let scale = nf.powf(df / (2.0 * alpha + df));
    let lam_lo = eigenpair(1, d)?.0.powf(alpha);
    let lam_hi = eigenpair(dsz, d)?.0.powf(alpha);
    let (prec_min, prec_max) = (scale * lam_lo, scale * lam_hi);
    let m = nf * c_min / 2.0 + prec_min;
    let lambda = 7.0 * k * lambda_max_m + prec_max;
    let b_gamma = c1 * (gamma * dd * lambda.powi(2) / m.powi(2) + gamma.powi(2) * dd * lambda.powi(4) / m.powi(3));
    let ln = nf.ln();
    let big_b_gamma = c1
        * (gamma * dd.powf((df + 24.0) / df) * ln.powi(6)
            + gamma.powi(2) * nf * dd.powf((df + 44.0) / df) * ln.powi(12))
        + (-scale).exp();
    let kappa_sigma = lam_hi / lam_lo;
    let tau = c2 * kappa_sigma * (1.0 + eta * eta / lambda_min_m + r * r);
    let log_rho = log_rho.unwrap_or(-scale);
    let q = 1.0 - gamma * m / 2.0;
    let lead = (4.0 * (tau + dd / m)).ln();
    let k_mix_estimate = if q >= 1.0 {
        f64::INFINITY
    } else if q <= 0.0 || lead <= log_rho {
        0.0
    } else {
        ((lead - log_rho) / -q.ln()).ceil()
    };
    Ok(BoundCertificate {
        m,
        lambda,
        b_gamma,
        big_b_gamma,
        tau,
        kappa_sigma,
        k_mix_estimate,
        log_rho,
        calibration: format!("c1 = {c1}, c2 = {c2} are calibration constants, not values from the theory"),
    })
}

/// Closed-form posterior of `Y = Φθ + ε`, `ε ~ N(0, I)`, `θ ~ N(0, Σ)`:
/// mean `(ΦᵀΦ + Σ⁻¹)⁻¹ΦᵀY` and covariance `(ΦᵀΦ + Σ⁻¹)⁻¹`.
pub fn conjugate_oracle(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    prior_precision: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_dim(design.nrows(), y.len())?;
    check_dim(design.ncols(), prior_precision.nrows())?;
    let a = design.transpose() * design + prior_precision;
    let chol = Cholesky::new(a).ok_or(Error::SingularSystem { row: 0, pivot: f64::NAN })?;
    Ok((chol.solve(&(design.transpose() * y)), chol.inverse()))
}

/// Mean and covariance of the ULA iterates on the Gaussian target with
/// precision `P` and mean `μ`, for steps `0..=steps`.
pub fn ula_gaussian_moments(
    precision: &DMatrix<f64>,
    mu: &DVector<f64>,
    gamma: f64,
    mean0: &DVector<f64>,
    cov0: &DMatrix<f64>,
    steps: usize,
) -> Vec<(DVector<f64>, DMatrix<f64>)> {
    let dim = mu.len();
    let a = DMatrix::identity(dim, dim) - precision * gamma;
    let noise = DMatrix::identity(dim, dim) * (2.0 * gamma);
    let mut out = Vec::with_capacity(steps + 1);
    let (mut m, mut c) = (mean0.clone(), cov0.clone());
    out.push((m.clone(), c.clone()));
    for _ in 0..steps {
        m = mu + &a * (&m - mu);
        c = &a * &c * a.transpose() + &noise;
        out.push((m.clone(), c.clone()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub mean: Vec<f64>,
    pub nodes_per_axis: usize,
    /// Share of the total mass carried by nodes on the box boundary.
    pub boundary_fraction: f64,
    /// Largest change in the mean at the last refinement, if refined.
    pub refinement_change: Option<f64>,
}

/// Largest dimension handled by tensor quadrature.
pub const QUADRATURE_MAX_DIM: usize = 3;

/// Posterior mean by tensor Simpson quadrature on the box
/// `center ± half_width` with `nodes` points per axis (odd).
pub fn quadrature_posterior_mean(
    target: &impl LogDensity,
    center: &DVector<f64>,
    half_width: &DVector<f64>,
    nodes: usize,
) -> Result<QuadratureResult> {
    let dim = target.dim();
    check_dim(dim, center.len())?;
    check_dim(dim, half_width.len())?;
    if dim == 0 || dim > QUADRATURE_MAX_DIM {
        return Err(Error::InvalidArgument(format!("quadrature needs 1 ≤ D ≤ {QUADRATURE_MAX_DIM}, got {dim}")));
    }
    if nodes < 3 || nodes.is_multiple_of(2) {
        return Err(Error::InvalidArgument("node count per axis must be odd and at least 3".into()));
    }
    let weights: Vec<f64> = (0..nodes)
        .map(|i| {
            if i == 0 || i == nodes - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect();
    let total_nodes = nodes.pow(dim as u32);
    let coords = |flat: usize| -> (DVector<f64>, f64, bool) {
        let mut idx = flat;
        let mut x = DVector::zeros(dim);
        let mut w = 1.0;
        let mut edge = false;
        for a in 0..dim {
            let i = idx % nodes;
            idx /= nodes;
            x[a] = center[a] + half_width[a] * (2.0 * i as f64 / (nodes - 1) as f64 - 1.0);
            w *= weights[i];
            edge |= i == 0 || i == nodes - 1;
        }
        (x, w, edge)
    };
    let logs: Vec<f64> = (0..total_nodes).into_par_iter().map(|f| target.value(&coords(f).0)).collect::<Result<_>>()?;
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut mass = 0.0;
    let mut edge_mass = 0.0;
    let mut first = DVector::zeros(dim);
    for (f, l) in logs.iter().enumerate() {
        let (x, w, edge) = coords(f);
        let p = w * (l - peak).exp();
        mass += p;
        if edge {
            edge_mass += p;
        }
        first += x * p;
    }
    let boundary_fraction = edge_mass / mass;
    if boundary_fraction > 1e-8 {
        return Err(Error::BoxTooSmall(boundary_fraction));
    }
    Ok(QuadratureResult {
        mean: (first / mass).iter().copied().collect(),
        nodes_per_axis: nodes,
        boundary_fraction,
        refinement_change: None,
    })
}

/// Refines `nodes → 2·nodes − 1` until successive means agree to
/// `tolerance` relative (per coordinate, floored at `1e-12`) or the node
/// count would exceed `max_nodes`.
pub fn quadrature_posterior_mean_refined(
    target: &impl LogDensity,
    center: &DVector<f64>,
    half_width: &DVector<f64>,
    nodes: usize,
    tolerance: f64,
    max_nodes: usize,
) -> Result<QuadratureResult> {
    let mut current = quadrature_posterior_mean(target, center, half_width, nodes)?;
    loop {
        let next_nodes = 2 * current.nodes_per_axis - 1;
        if next_nodes > max_nodes {
            return Ok(current);
        }
        let mut next = quadrature_posterior_mean(target, center, half_width, next_nodes)?;
        let change =
            next.mean.iter().zip(&current.mean).map(|(a, b)| (a - b).abs() / a.abs().max(1e-12)).fold(0.0, f64::max);
        next.refinement_change = Some(change);
        if change <= tolerance {
            return Ok(next);
        }
        current = next;
    }
}
