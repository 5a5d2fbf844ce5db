//! Acceptance criteria AC-1 to AC-12, one PASS/FAIL line each.
//!
//! `cargo test -p schrodinger-ula --test acceptance -- AC-3 AC-9` runs a
//! subset. A criterion fails if its check fails, panics or overruns its
//! wall-time budget.

#![allow(clippy::excessive_precision, clippy::type_complexity)]

use std::error::Error as StdError;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use schrodinger_ula::diagnostics::{
    bound_certificate, conjugate_oracle, estimate_curvature, least_squares_slope, quadrature_posterior_mean_refined,
    ula_gaussian_moments, w2_gaussian, w2_gaussian_proxy, CertificateInput,
};
use schrodinger_ula::optim::DescentStatus;
use schrodinger_ula::sampler::{burn_in_lower_bound, gamma_epsilon, run_replicates, Ball, Storage};
use schrodinger_ula::surrogate::{condition_23_params, k_lower_bound, practical_eta, step_limit, surrogate_stiffness};
use schrodinger_ula::{
    compute_map, generate_dataset, generate_dataset_with_noise, gradient_descent, initialize, run_chain,
    solve_schrodinger, Basis, BoundaryData, ChainConfig, CoefficientVector, DMatrix, DVector, DescentConfig,
    EllipsoidNorm, ForwardModel, GaussianPrior, GaussianTarget, Grid, GridFunction, InitializerConfig, LinkFunction,
    LogDensity, LogLikelihood, MapConfig, Posterior, PriorSpec, SchrodingerLikelihood, SurrogateLikelihood,
    SurrogateSpec,
};

type Check = Result<String, Box<dyn StdError>>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*).into());
        }
    };
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget_s: f64,
    run: fn() -> Check,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: "AC-1", title: "PDE closed form and second-order convergence", budget_s: 1.0, run: ac1 },
    Criterion { id: "AC-2", title: "maximum principle", budget_s: 30.0, run: ac2 },
    Criterion { id: "AC-3", title: "derivative fidelity", budget_s: 120.0, run: ac3 },
    Criterion { id: "AC-4", title: "surrogate contract", budget_s: 180.0, run: ac4 },
    Criterion { id: "AC-5", title: "ULA on a Gaussian target", budget_s: 60.0, run: ac5 },
    Criterion { id: "AC-6", title: "geometric W2 contraction", budget_s: 300.0, run: ac6 },
    Criterion { id: "AC-7", title: "curvature scaling", budget_s: 600.0, run: ac7 },
    Criterion { id: "AC-8", title: "MAP guarantees", budget_s: 180.0, run: ac8 },
    Criterion { id: "AC-9", title: "posterior mean against quadrature", budget_s: 1200.0, run: ac9 },
    Criterion { id: "AC-10", title: "recovery trend in N", budget_s: 2700.0, run: ac10 },
    Criterion { id: "AC-11", title: "initializer", budget_s: 600.0, run: ac11 },
    Criterion { id: "AC-12", title: "formula plumbing", budget_s: 1.0, run: ac12 },
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for c in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| f == c.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(Ok(d)) if secs <= c.budget_s => (true, d),
            Ok(Ok(d)) => (false, format!("{d}; exceeded the {} s budget", c.budget_s)),
            Ok(Err(e)) => (false, e.to_string()),
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{} {verdict} [{secs:.2} s of {} s] {}: {detail}", c.id, c.budget_s, c.title);
    }
    if failures > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut impl Rng) -> f64 {
    r.sample(StandardNormal)
}

fn unit(r: &mut impl Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| normal(r)).normalize()
}

/// Uniform point of the Euclidean shell `lo ≤ ‖x − c‖ ≤ hi`.
fn in_shell(r: &mut impl Rng, c: &DVector<f64>, lo: f64, hi: f64) -> DVector<f64> {
    let d = c.len() as i32;
    let u: f64 = r.random();
    let rad = (lo.powi(d) + u * (hi.powi(d) - lo.powi(d))).powf(1.0 / d as f64);
    c + unit(r, c.len()) * rad
}

fn rel(approx: &[f64], exact: &[f64]) -> f64 {
    let diff: f64 = approx.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = exact.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

fn fd_gradient(
    f: impl Fn(&DVector<f64>) -> schrodinger_ula::Result<f64>,
    x: &DVector<f64>,
    eps: f64,
) -> schrodinger_ula::Result<DVector<f64>> {
    let mut g = DVector::zeros(x.len());
    for k in 0..x.len() {
        let (mut p, mut m) = (x.clone(), x.clone());
        p[k] += eps;
        m[k] -= eps;
        g[k] = (f(&p)? - f(&m)?) / (2.0 * eps);
    }
    Ok(g)
}

/// Symmetrized central-difference Jacobian of an analytic gradient.
fn fd_hessian(
    grad: impl Fn(&DVector<f64>) -> schrodinger_ula::Result<DVector<f64>>,
    x: &DVector<f64>,
    eps: f64,
) -> schrodinger_ula::Result<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for k in 0..n {
        let (mut p, mut m) = (x.clone(), x.clone());
        p[k] += eps;
        m[k] -= eps;
        h.set_column(k, &((grad(&p)? - grad(&m)?) / (2.0 * eps)));
    }
    Ok((&h + h.transpose()) * 0.5)
}

fn model(dim: usize, n_interior: usize, dsz: usize, g: f64) -> schrodinger_ula::Result<ForwardModel> {
    let basis = Basis::new(Grid::new(dim, n_interior)?, dsz)?;
    ForwardModel::new(basis, LinkFunction::default(), BoundaryData::Constant(g))
}

fn prior(m: &ForwardModel, alpha: f64, n: usize) -> schrodinger_ula::Result<GaussianPrior> {
    PriorSpec { alpha, n_ref: n as f64, dim: m.grid().dim() }.build(m.basis())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs()
}

// ---------------------------------------------------------------- AC-1

fn ac1() -> Check {
    let exact = |x: f64| (2.0 * (x - 0.5)).cosh() / 1f64.cosh();
    let err = |n: usize| -> schrodinger_ula::Result<f64> {
        let grid = Grid::new(1, n)?;
        let f = GridFunction::constant(grid, 2.0, BoundaryData::zero())?;
        let u = solve_schrodinger(&f, &BoundaryData::Constant(1.0))?;
        Ok(grid.nodes().zip(&u.values).map(|(x, v)| (v - exact(x[0])).abs()).fold(0.0, f64::max))
    };
    // h = 1/(n+1): 512 → 1025 interior nodes halves the spacing exactly.
    let (coarse, fine) = (err(512)?, err(1025)?);
    let ratio = coarse / fine;
    ensure!(coarse <= 1e-4, "max nodal error {coarse:.3e} at n = 512");
    ensure!((3.2..=4.8).contains(&ratio), "refinement ratio {ratio:.3}");
    Ok(format!("error {coarse:.3e} at n = 512, refinement ratio {ratio:.3}"))
}

// ---------------------------------------------------------------- AC-2

/// Nonnegative potential with flat zero regions and occasional large values.
fn random_potential(r: &mut impl Rng, grid: Grid) -> schrodinger_ula::Result<GridFunction> {
    let shift: f64 = r.random_range(-3.0..4.0);
    let scale = if r.random_bool(0.2) { 300.0 } else { 3.0 };
    let coef: Vec<(f64, f64)> = (1..=5).map(|j| (scale * normal(r) / j as f64, r.random_range(0.0..1.0))).collect();
    GridFunction::from_fn(grid, BoundaryData::zero(), |x| {
        let mut v = shift;
        for (j, (a, ph)) in coef.iter().enumerate() {
            let w = (j + 1) as f64 * std::f64::consts::PI;
            v += a * (w * x[0] + ph).sin() * if grid.dim() == 2 { (w * x[1]).cos() } else { 1.0 };
        }
        v.max(0.0)
    })
}

fn ac2() -> Check {
    let mut r = rng(2);
    let mut violations = 0;
    let mut zero_nodes = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..400 {
        let two_d = trial >= 200;
        let grid = if two_d { Grid::new(2, r.random_range(5..48))? } else { Grid::new(1, r.random_range(8..600))? };
        let f = random_potential(&mut r, grid)?;
        zero_nodes += f.values.iter().filter(|v| **v == 0.0).count();
        let g = if two_d {
            BoundaryData::Constant(r.random_range(0.01..5.0))
        } else {
            BoundaryData::Tabulated(vec![r.random_range(0.01..5.0), r.random_range(0.01..5.0)])
        };
        let u = solve_schrodinger(&f, &g)?;
        let top = g.max() + 1e-12;
        for v in &u.values {
            worst = worst.max(v - g.max());
            if !(*v > 0.0 && *v <= top) {
                violations += 1;
            }
        }
    }
    ensure!(zero_nodes > 0, "no trial exercised f = 0");
    ensure!(violations == 0, "{violations} nodes violate 0 < u ≤ max g");
    Ok(format!("400 trials, 0 violations, max(u − max g) = {worst:.2e}, {zero_nodes} nodes with f = 0"))
}

// ---------------------------------------------------------------- AC-3

struct Worst {
    first: (f64, String),
    second: (f64, String),
}

impl Worst {
    fn first(&mut self, e: f64, what: impl FnOnce() -> String) {
        if e > self.first.0 {
            self.first = (e, what());
        }
    }
    fn second(&mut self, e: f64, what: impl FnOnce() -> String) {
        if e > self.second.0 {
            self.second = (e, what());
        }
    }
}

fn ac3() -> Check {
    const EPS: f64 = 1e-5;
    const EPS2: f64 = 1e-4;
    let mut w = Worst { first: (0.0, String::new()), second: (0.0, String::new()) };
    for c in 0..50u64 {
        let mut r = rng(300 + c);
        let dim = if c % 5 == 4 { 2 } else { 1 };
        let n_interior = if dim == 2 { r.random_range(15..32) } else { r.random_range(63..256) };
        let dsz = r.random_range(1..=16);
        let g = r.random_range(0.5..3.0);
        let m = model(dim, n_interior, dsz, g)?;
        let theta = DVector::from_fn(dsz, |k, _| 0.6 * r.random_range(-1.0..1.0) / (k + 1) as f64);
        let n = r.random_range(50..300);
        let data = generate_dataset(&m, &theta, n, 1000 + c)?;
        let lik = SchrodingerLikelihood::new(m.clone(), &data)?;
        let tag = |what: &str| format!("{what} (config {c}, d = {dim}, D = {dsz})");

        // Forward map, first and second directional derivatives.
        let basis = m.basis().clone();
        let cv = |x: DVector<f64>| CoefficientVector::new(x, basis.clone());
        let (v, u) = (unit(&mut r, dsz), unit(&mut r, dsz));
        let an = m.gradient_apply(&cv(theta.clone())?, &cv(v.clone())?)?;
        let plus = m.forward(&cv(&theta + &v * EPS)?)?;
        let minus = m.forward(&cv(&theta - &v * EPS)?)?;
        let fd: Vec<f64> = plus.values.iter().zip(&minus.values).map(|(p, q)| (p - q) / (2.0 * EPS)).collect();
        w.first(rel(&fd, &an.values), || tag("∇𝒢"));
        let an2 = m.hessian_apply(&cv(theta.clone())?, &cv(v.clone())?, &cv(u.clone())?)?;
        let plus = m.gradient_apply(&cv(&theta + &u * EPS2)?, &cv(v.clone())?)?;
        let minus = m.gradient_apply(&cv(&theta - &u * EPS2)?, &cv(v.clone())?)?;
        let fd: Vec<f64> = plus.values.iter().zip(&minus.values).map(|(p, q)| (p - q) / (2.0 * EPS2)).collect();
        w.second(rel(&fd, &an2.values), || tag("∇²𝒢"));

        // Log-likelihood.
        let at = &theta + unit(&mut r, dsz) * 0.1;
        let grad = lik.gradient(&at)?;
        let (_, grad_full) = lik.value_and_gradient(&at)?;
        let fd = fd_gradient(|x| lik.value(x), &at, EPS)?;
        w.first(rel(fd.as_slice(), grad.as_slice()), || tag("∇ℓ"));
        w.first(rel(grad_full.as_slice(), grad.as_slice()), || tag("∇ℓ paths"));
        let fdh = fd_hessian(|x| lik.gradient(x), &at, EPS2)?;
        w.second(rel(fdh.as_slice(), lik.hessian(&at)?.as_slice()), || tag("∇²ℓ"));

        // Surrogate likelihood and posterior at points inside, across and
        // beyond the transition annulus.
        let eta = r.random_range(0.2..0.8);
        let norm = EllipsoidNorm::identity(dsz);
        let k = k_lower_bound(1.0, n, eta, &norm);
        let spec = SurrogateSpec::new(theta.clone(), eta, k, norm)?;
        let sur = SurrogateLikelihood::new(lik.clone(), spec)?;
        let post = Posterior::new(sur.clone(), prior(&m, 2.0, n)?)?;
        for radius in [0.3, 0.7, 0.8, 1.2, 3.0] {
            let p = &theta + unit(&mut r, dsz) * (radius * eta);
            let fd = fd_gradient(|x| sur.value(x), &p, EPS)?;
            w.first(rel(fd.as_slice(), sur.gradient(&p)?.as_slice()), || tag(&format!("∇ℓ̃ at {radius}η")));
            let fdh = fd_hessian(|x| sur.gradient(x), &p, EPS2)?;
            w.second(rel(fdh.as_slice(), sur.hessian(&p)?.as_slice()), || tag(&format!("∇²ℓ̃ at {radius}η")));
            let fd = fd_gradient(|x| post.value(x), &p, EPS)?;
            w.first(rel(fd.as_slice(), post.gradient(&p)?.as_slice()), || tag(&format!("∇log π̃ at {radius}η")));
            let fdh = fd_hessian(|x| post.gradient(x), &p, EPS2)?;
            w.second(rel(fdh.as_slice(), post.hessian(&p)?.as_slice()), || tag(&format!("∇²log π̃ at {radius}η")));
        }
    }
    ensure!(w.first.0 <= 1e-5, "first-derivative error {:.3e} at {}", w.first.0, w.first.1);
    ensure!(w.second.0 <= 1e-3, "second-derivative error {:.3e} at {}", w.second.0, w.second.1);
    Ok(format!(
        "50 configurations; worst first-derivative error {:.2e} ({}), worst second-derivative error {:.2e} ({})",
        w.first.0, w.first.1, w.second.0, w.second.1
    ))
}

// ---------------------------------------------------------------- AC-4

fn ac4() -> Check {
    let (n, dsz) = (1000, 4);
    let m = model(1, 255, dsz, 1.0)?;
    let theta0 = DVector::from_fn(dsz, |k, _| 0.3 * (-1f64).powi(k as i32) / (k + 1) as f64);
    let data = generate_dataset_with_noise(&m, &theta0, n, 4, 0.0)?;
    let lik = SchrodingerLikelihood::new(m.clone(), &data)?;
    let eta = practical_eta(n)?;
    let mut r = rng(4);
    let theta_init = &theta0 + unit(&mut r, dsz) * (0.9 * eta / 8.0);
    let curv = estimate_curvature(&lik, &theta_init, eta, 20, 4)?;
    let norm = EllipsoidNorm::identity(dsz);
    let k = k_lower_bound(curv.c_max_hat, n, eta, &norm);
    let spec = SurrogateSpec::new(theta_init.clone(), eta, k, norm.clone())?;
    let pr = prior(&m, 2.0, n)?;
    let sur = SurrogateLikelihood::new(lik.clone(), spec)?;
    let post = Posterior::new(sur.clone(), pr.clone())?;
    let exact_post = Posterior::new(lik.clone(), pr)?;

    for _ in 0..100 {
        let p = in_shell(&mut r, &theta_init, 0.0, 0.5 * eta);
        let same = sur.value(&p)?.to_bits() == lik.value(&p)?.to_bits()
            && sur.value_and_gradient(&p)? == lik.value_and_gradient(&p)?
            && post.value(&p)?.to_bits() == exact_post.value(&p)?.to_bits();
        ensure!(same, "surrogate differs from the likelihood at an inner point");
    }

    let mut lam_min = f64::INFINITY;
    let shells = [(60, 0.0, 0.5 * eta), (70, 0.5 * eta, eta), (70, eta, 10.0 * eta)];
    let mut worst_shell = "";
    for (count, lo, hi) in shells {
        for _ in 0..count {
            let p = in_shell(&mut r, &theta_init, lo, hi);
            let h = -fd_hessian(|x| post.gradient(x), &p, 1e-5)?;
            let lmin = SymmetricEigen::new(h).eigenvalues.min();
            if lmin < lam_min {
                lam_min = lmin;
                worst_shell = if hi <= 0.5 * eta {
                    "inner ball"
                } else if hi <= eta {
                    "annulus"
                } else {
                    "far field"
                };
            }
        }
    }
    ensure!(lam_min > 0.0, "λ_min(−∇²log π̃) = {lam_min:.3e} in the {worst_shell}");

    let bound = 7.0 * k * norm.lambda_max();
    let mut worst_ratio = 0.0f64;
    for _ in 0..200 {
        let a = in_shell(&mut r, &theta_init, 0.0, 10.0 * eta);
        let step = eta * 10f64.powf(r.random_range(-3.0..0.0));
        let b = &a + unit(&mut r, dsz) * step;
        let ratio = (sur.gradient(&a)? - sur.gradient(&b)?).norm() / (&a - &b).norm();
        worst_ratio = worst_ratio.max(ratio);
    }
    ensure!(worst_ratio <= bound, "gradient Lipschitz ratio {worst_ratio:.3e} exceeds 7K = {bound:.3e}");
    Ok(format!(
        "100 inner points bit-exact; min λ over 200 probes {lam_min:.3e} ({worst_shell}); max Lipschitz ratio / 7K = {:.3}",
        worst_ratio / bound
    ))
}

// ---------------------------------------------------------------- AC-5

fn ac5() -> Check {
    let sigma: f64 = 1.5;
    let s2 = sigma * sigma;
    let target = GaussianTarget::new(DVector::zeros(1), DMatrix::from_element(1, 1, 1.0 / s2))?;
    let mut lines = Vec::new();
    for (i, gamma) in [0.1, 0.2, 0.5].into_iter().enumerate() {
        let mut cfg = ChainConfig::new(gamma, 10_000, 1_000_000, 50 + i as u64);
        cfg.storage = Storage::Full;
        let out = run_chain(&target, &DVector::zeros(1), &cfg, None)?;
        let x = out.samples.column(0);
        let mean = x.mean();
        let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let var = c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64;
        let lag1 = c.windows(2).map(|p| p[0] * p[1]).sum::<f64>() / c.iter().map(|v| v * v).sum::<f64>();
        let var_exact = 2.0 * s2 * s2 / (2.0 * s2 - gamma);
        let rho_exact = 1.0 - gamma / s2;
        let (ev, er) = (var / var_exact - 1.0, lag1 / rho_exact - 1.0);
        ensure!(ev.abs() <= 0.02, "γ = {gamma}: variance {var:.4} vs {var_exact:.4}");
        ensure!(er.abs() <= 0.01, "γ = {gamma}: lag-1 autocorrelation {lag1:.5} vs {rho_exact:.5}");
        lines.push(format!("γ = {gamma}: var {:+.2}%, lag-1 {:+.3}%", 100.0 * ev, 100.0 * er));
    }
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------- AC-6

/// Least-squares log-decay per step over the indices where `w` is at least
/// `100×` its floor.
fn decay_rate(w: &[f64], floor: f64) -> Option<(f64, usize)> {
    let end = w.iter().position(|v| *v < 100.0 * floor)?;
    if end < 10 {
        return None;
    }
    let xs: Vec<f64> = (0..end).map(|k| k as f64).collect();
    let ys: Vec<f64> = w[..end].iter().map(|v| v.ln()).collect();
    Some((least_squares_slope(&xs, &ys).exp(), end))
}

fn ac6() -> Check {
    let mut r = rng(6);
    let design = DMatrix::from_fn(30, 3, |_, _| normal(&mut r));
    let y = DVector::from_fn(30, |_, _| normal(&mut r));
    let prior_precision = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0]));
    let (mu, cov) = conjugate_oracle(&design, &y, &prior_precision)?;
    let precision = design.transpose() * &design + &prior_precision;
    let eig = SymmetricEigen::new(precision.clone()).eigenvalues;
    let (m, big_l) = (eig.min(), eig.max());
    let gamma = 0.5 / big_l;
    let (lo, hi) = (1.0 - gamma * big_l, 1.0 - gamma * m / 2.0);
    let start = &mu + DVector::from_fn(3, |k, _| 1e6 * cov[(k, k)].sqrt());
    let steps = 600;

    let moments = ula_gaussian_moments(&precision, &mu, gamma, &start, &DMatrix::zeros(3, 3), steps);
    let exact: Vec<f64> = moments.iter().map(|(mk, ck)| w2_gaussian(mk, ck, &mu, &cov)).collect();
    let (rate_exact, n_exact) = decay_rate(&exact, exact[steps]).ok_or("moment recursion has no pre-floor window")?;

    let target = GaussianTarget::new(mu.clone(), precision)?;
    let mut cfg = ChainConfig::new(gamma, 0, steps, 6);
    cfg.storage = Storage::Full;
    let chains = run_replicates(&target, &start, &cfg, 200)?;
    let post_var = cov.diagonal();
    let proxy: Vec<f64> = (0..steps)
        .map(|k| {
            let rows: Vec<DVector<f64>> = chains.iter().map(|c| c.samples.row(k).transpose()).collect();
            let mean = rows.iter().fold(DVector::zeros(3), |a, x| a + x) / rows.len() as f64;
            let var = rows.iter().fold(DVector::zeros(3), |a, x| a + (x - &mean).map(|v| v * v)) / rows.len() as f64;
            w2_gaussian_proxy(&mean, &var, &mu, &post_var)
        })
        .collect();
    let mut tail = proxy[3 * steps / 4..].to_vec();
    let floor = median(&mut tail);
    let (rate_mc, n_mc) = decay_rate(&proxy, floor).ok_or("replicate proxy has no pre-floor window")?;

    for (what, rate) in [("moment recursion", rate_exact), ("200 replicates", rate_mc)] {
        ensure!((lo..=hi).contains(&rate), "{what}: rate {rate:.5} outside [{lo:.5}, {hi:.5}]");
    }
    Ok(format!(
        "bracket [{lo:.5}, {hi:.5}]; moment recursion {rate_exact:.5} over {n_exact} steps; 200 replicates {rate_mc:.5} over {n_mc} steps"
    ))
}

// ---------------------------------------------------------------- AC-7

fn ac7() -> Check {
    let n = 20_000;
    let (mut xs, mut ys, mut lams) = (Vec::new(), Vec::new(), Vec::new());
    for dsz in [4usize, 8, 16, 32] {
        let m = model(1, 511, dsz, 1.0)?;
        let theta0 = DVector::zeros(dsz);
        let data = generate_dataset_with_noise(&m, &theta0, n, 7, 0.0)?;
        let lik = SchrodingerLikelihood::new(m, &data)?;
        let lmin = SymmetricEigen::new(-lik.hessian(&theta0)?).eigenvalues.min();
        ensure!(lmin > 0.0, "λ_min = {lmin:.3e} at D = {dsz}");
        xs.push((dsz as f64).ln());
        ys.push(lmin.ln());
        lams.push(format!("{lmin:.3e}"));
    }
    let slope = least_squares_slope(&xs, &ys);
    ensure!((-4.8..=-3.2).contains(&slope), "slope {slope:.3} outside [−4.8, −3.2]");
    Ok(format!("slope {slope:.3}; λ_min at D = 4, 8, 16, 32: {}", lams.join(", ")))
}

// ---------------------------------------------------------------- AC-8

fn ac8() -> Check {
    // Quadratic: U = ½(θ − θ*)ᵀH(θ − θ*), spectrum in [0.5, 20].
    let mut r = rng(8);
    let q = DMatrix::from_fn(6, 6, |_, _| normal(&mut r)).qr().q();
    let spectrum = DVector::from_fn(6, |i, _| 0.5 + 19.5 * i as f64 / 5.0);
    let h = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
    let star = DVector::from_fn(6, |_, _| normal(&mut r));
    let (m, big_l) = (0.5, 20.0);
    let start = DVector::from_fn(6, |_, _| 10.0 * normal(&mut r));
    let cfg = DescentConfig { step: 1.0 / (2.0 * big_l), max_iters: 1500, grad_tolerance: 0.0, record_path: true };
    let res = gradient_descent(|x| Ok(&h * (x - &star)), &start, &cfg)?;
    let r0 = (&start - &star).norm();
    let q_rate: f64 = 1.0 - m / (2.0 * big_l);
    for (k, x) in res.path.iter().enumerate() {
        let bound = q_rate.powi(k as i32) * r0;
        let err = (x - &star).norm();
        ensure!(err <= bound * (1.0 + 1e-10) + 1e-13, "iterate {k}: error {err:.3e} above bound {bound:.3e}");
    }

    // Surrogate posterior: five starts in the identity ball, one maximizer.
    let (n, dsz) = (500, 4);
    let md = model(1, 255, dsz, 100.0)?;
    let theta0 = DVector::from_fn(dsz, |k, _| 0.5 * (-1f64).powi(k as i32) / ((k + 1) * (k + 1)) as f64);
    let data = generate_dataset(&md, &theta0, n, 8)?;
    let init = initialize(&md, &data, &InitializerConfig::for_sample_size(n, 1, 1.0, dsz))?;
    let ti = init.theta_init.values;
    let lik = SchrodingerLikelihood::new(md.clone(), &data)?;
    let eta = practical_eta(n)?;
    let norm = EllipsoidNorm::identity(dsz);
    let curv = estimate_curvature(&lik, &ti, eta, 8, 8)?;
    let k = k_lower_bound(curv.c_max_hat, n, eta, &norm);
    let spec = SurrogateSpec::new(ti.clone(), eta, k, norm)?;
    let post = Posterior::new(SurrogateLikelihood::new(lik, spec)?, prior(&md, 2.0, n)?)?;
    let neg_h = -post.hessian(&ti)?;
    let a: Vec<f64> = (0..dsz).map(|i| 1.0 / neg_h[(i, i)].sqrt()).collect();
    let av = DVector::from_column_slice(&a);
    let scaled = DMatrix::from_diagonal(&av) * &neg_h * DMatrix::from_diagonal(&av);
    let step = 1.0 / SymmetricEigen::new(scaled).eigenvalues.max();
    // The gradient norm floors near 1e-11 relative from roundoff; 1e-10
    // still pins the maximizer far below the 1e-6 criterion.
    let map_cfg = MapConfig { step, max_iters: 200_000, rel_tolerance: 1e-10, precondition: Some(a) };
    let mut maps = Vec::new();
    for _ in 0..5 {
        let s = in_shell(&mut r, &ti, 0.0, 0.9 * eta / 2.0);
        let res = compute_map(&post, &s, &map_cfg)?;
        ensure!(res.status == DescentStatus::Converged, "MAP did not converge in {} iterations", res.iters);
        maps.push(res.theta);
    }
    let mut spread = 0.0f64;
    for i in 0..maps.len() {
        for j in 0..i {
            spread = spread.max((&maps[i] - &maps[j]).norm());
        }
    }
    ensure!(spread <= 1e-6, "MAP estimates differ by {spread:.3e}");
    Ok(format!("quadratic bound held at {} iterates; 5 surrogate MAP runs agree to {spread:.2e}", res.path.len()))
}

// ---------------------------------------------------------------- AC-9

fn ac9() -> Check {
    let (n, dsz) = (200, 2);
    let md = model(1, 255, dsz, 100.0)?;
    let theta0 = DVector::from_vec(vec![1.0, -0.5]);
    let data = generate_dataset(&md, &theta0, n, 7)?;
    let lik = SchrodingerLikelihood::new(md.clone(), &data)?;
    let pr = prior(&md, 1.0, n)?;
    let post = Posterior::new(lik.clone(), pr.clone())?;

    // Quadrature oracle centered at the Newton maximizer of the posterior.
    let mut center = theta0.clone();
    for _ in 0..50 {
        let g = post.gradient(&center)?;
        let step = (-post.hessian(&center)?).cholesky().ok_or("posterior Hessian not definite")?.solve(&g);
        center += &step;
        if step.norm() < 1e-13 {
            break;
        }
    }
    let half_width = pr.std_dev() * 8.0;
    let quad = quadrature_posterior_mean_refined(&post, &center, &half_width, 61, 1e-4, 4000)?;
    let change = quad.refinement_change.ok_or("quadrature was not refined")?;
    ensure!(change <= 1e-4, "quadrature self-consistency {change:.2e}");

    // Surrogate chain from the ridge initializer. The ball is wide enough
    // to hold essentially all posterior mass, so π̃ and π agree where it
    // matters.
    let init = initialize(&md, &data, &InitializerConfig::for_sample_size(n, 1, 1.0, dsz))?;
    let ti = init.theta_init.values;
    let eta = 2.0;
    let norm = EllipsoidNorm::identity(dsz);
    let curv = estimate_curvature(&lik, &ti, eta, 16, 9)?;
    let k = k_lower_bound(curv.c_max_hat, n, eta, &norm);
    let stiffness = surrogate_stiffness(k, &norm, n, curv.c_max_hat);
    let gamma = step_limit(stiffness, &pr, true);
    let sur =
        Posterior::new(SurrogateLikelihood::new(lik, SurrogateSpec::new(ti.clone(), eta, k, norm)?)?, pr.clone())?;
    let burn_in = (5.0 / gamma).ceil() as usize;
    let mut cfg = ChainConfig::new(gamma, burn_in, 2_000_000, 9);
    cfg.precondition = Some(pr.std_dev().iter().copied().collect());
    cfg.storage = Storage::Streaming;
    cfg.thin = 1000;
    let out = run_chain(&sur, &ti, &cfg, Some(&Ball { center: ti.clone(), radius: eta / 2.0 }))?;
    let mean = out.mean()?;
    let errs: Vec<f64> = (0..dsz).map(|i| (mean[i] - quad.mean[i]).abs() / quad.mean[i].abs()).collect();
    let exit = out.exit_fraction.unwrap_or(f64::NAN);
    ensure!(
        errs.iter().all(|e| *e <= 0.02),
        "chain mean {:?} vs quadrature {:?}: relative errors {:?}",
        mean.as_slice(),
        quad.mean,
        errs
    );
    Ok(format!(
        "quadrature {:.5?} ({} nodes/axis, change {change:.1e}); chain {:.5?}; relative errors {:.2e}, {:.2e}; γ = {gamma:.2e}, exit fraction {exit:.3}",
        quad.mean,
        quad.nodes_per_axis,
        mean.as_slice(),
        errs[0],
        errs[1]
    ))
}

// ---------------------------------------------------------------- AC-10

fn ac10() -> Check {
    let dsz = 8;
    let md = model(1, 127, dsz, 300.0)?;
    let theta0 = DVector::from_fn(dsz, |k, _| 0.01 * (-1f64).powi(k as i32) / ((k + 1) as f64).powi(8));
    let mut medians = Vec::new();
    let mut notes = Vec::new();
    for n in [250usize, 1000, 4000] {
        let pr = prior(&md, 7.0, n)?;
        let eta = practical_eta(n)?;
        let a = pr.std_dev();
        let mut errs = Vec::new();
        let mut worst_exit = 0.0f64;
        for s in 0..10u64 {
            let data = generate_dataset(&md, &theta0, n, 100 + s)?;
            let ti = initialize(&md, &data, &InitializerConfig::for_sample_size(n, 1, 1.0, dsz))?.theta_init.values;
            let lik = SchrodingerLikelihood::new(md.clone(), &data)?;
            let norm = EllipsoidNorm::identity(dsz);
            let curv = estimate_curvature(&lik, &ti, eta, 4, s)?;
            let k = k_lower_bound(curv.c_max_hat, n, eta, &norm);
            let gamma = step_limit(surrogate_stiffness(k, &norm, n, curv.c_max_hat), &pr, true);
            let sur = Posterior::new(
                SurrogateLikelihood::new(lik, SurrogateSpec::new(ti.clone(), eta, k, norm)?)?,
                pr.clone(),
            )?;
            // Prior-dominated modes start far out and relax like e^{−t}.
            let mut cfg = ChainConfig::new(gamma, (12.0 / gamma) as usize, (10.0 / gamma) as usize, s);
            cfg.precondition = Some(a.iter().copied().collect());
            cfg.storage = Storage::Streaming;
            cfg.thin = 100;
            let out = run_chain(&sur, &ti, &cfg, Some(&Ball { center: ti.clone(), radius: eta / 2.0 }))?;
            errs.push((out.mean()? - &theta0).norm());
            worst_exit = worst_exit.max(out.exit_fraction.unwrap_or(0.0));
        }
        let med = median(&mut errs);
        notes.push(format!("N = {n}: {med:.3e} (max exit {worst_exit:.2})"));
        medians.push(med);
    }
    ensure!(medians[1] < medians[0] && medians[2] < medians[1], "medians not decreasing: {}", notes.join("; "));
    Ok(format!("median ‖θ̄ − θ₀,D‖: {}", notes.join("; ")))
}

// ---------------------------------------------------------------- AC-11

fn ac11() -> Check {
    let (n, dsz) = (2000, 8);
    let md = model(1, 255, dsz, 300.0)?;
    let theta0 = DVector::from_fn(dsz, |k, _| 0.5 * (-1f64).powi(k as i32) / ((k + 1) * (k + 1)) as f64);
    let radius = practical_eta(n)? / 2.0;
    let cfg = InitializerConfig::for_sample_size(n, 1, 1.0, dsz);
    let mut errs = Vec::new();
    for seed in 0..20 {
        let data = generate_dataset(&md, &theta0, n, seed)?;
        errs.push((initialize(&md, &data, &cfg)?.theta_init.values - &theta0).norm());
    }
    let inside = errs.iter().filter(|e| **e <= radius).count();
    ensure!(inside >= 18, "{inside}/20 initializers inside the ball of radius {radius:.4}");

    // Noiseless f ≡ 2: θ = 0 with K_min = 2 − log 2.
    let basis = Basis::new(Grid::new(1, 255)?, dsz)?;
    let flat = ForwardModel::new(Arc::clone(&basis), LinkFunction::new(2.0 - 2f64.ln())?, BoundaryData::Constant(1.0))?;
    let data = generate_dataset_with_noise(&flat, &DVector::zeros(dsz), n, 11, 0.0)?;
    let mut flat_cfg = InitializerConfig::for_sample_size(n, 1, 1.0, dsz);
    flat_cfg.n_basis = 32;
    flat_cfg.delta_n = 1e-6;
    let fit = initialize(&flat, &data, &flat_cfg)?;
    let sup = fit.f_init.values.iter().fold(0.0f64, |m, v| m.max((v - 2.0).abs()));
    ensure!(sup < 0.05, "sup |f_init − 2| = {sup:.3e}");
    let mut sorted = errs.clone();
    Ok(format!(
        "{inside}/20 inside radius {radius:.4} (median error {:.4}, max {:.4}); noiseless f ≡ 2 recovered to {sup:.2e}",
        median(&mut sorted),
        errs.iter().copied().fold(0.0, f64::max)
    ))
}

// ---------------------------------------------------------------- AC-12

fn ac12() -> Check {
    const TOL: f64 = 1e-12;
    let mut checked = 0;
    let c23: [((usize, usize, usize), [f64; 4]); 5] = [
        (
            (1000, 8, 1),
            [1.44764827301083948e-01, 5.53007124182434082e+12, 2.61777508770984304e-14, 3.53429754153036983e-05],
        ),
        (
            (3, 1, 1),
            [9.10239226626837428e-01, 3.97790688043172214e+00, 2.28823663797793370e-01, 9.10239226626837428e-01],
        ),
        (
            (50000, 16, 1),
            [9.24233356464294331e-02, 2.72010049748875296e+17, 3.39779121145547229e-19, 1.41026818308150380e-06],
        ),
        (
            (200, 5, 2),
            [1.88739165817754823e-01, 1.85919061863998622e+07, 1.01516844978391272e-08, 7.54956663271019301e-03],
        ),
        (
            (1000000, 32, 2),
            [7.23824136505419741e-02, 2.76503562091217050e+15, 2.61777508770984295e-17, 7.06859508306073966e-05],
        ),
    ];
    for ((n, dsz, d), want) in c23 {
        let p = condition_23_params(n, dsz, d)?;
        for (name, got, w) in
            [("ε", p.epsilon, want[0]), ("K", p.k, want[1]), ("γ_max", p.gamma_max, want[2]), ("η", p.eta, want[3])]
        {
            ensure!(close(got, w, TOL), "condition params {name} at {:?}: {got:e} vs {w:e}", (n, dsz, d));
            checked += 1;
        }
    }

    let ge: [((usize, usize, usize, f64), f64); 6] = [
        ((1000, 8, 1, 0.1), 3.52688842922885824e-31),
        ((3, 1, 1, 1.0), 1.72570905259320062e-01),
        ((100, 2, 2, 1.0), 7.86023009237522912e-10),
        ((20000, 4, 2, 0.01), 1.59478812173929434e-19),
        ((500, 2, 1, 1e-3), 8.32441804328775798e-20),
        ((100000, 16, 1, 0.5), 7.35598086807585889e-39),
    ];
    for ((n, dsz, d, eps), want) in ge {
        let got = gamma_epsilon(n, dsz, d, eps)?;
        ensure!(close(got, want, TOL), "γ_ε at {:?}: {got:e} vs {want:e}", (n, dsz, d, eps));
        checked += 1;
    }

    let bi: [((usize, usize, usize, f64, f64), u64); 5] = [
        ((1000, 8, 1, 1e-4, 1e-3), 1956747),
        ((1000, 1, 1, 1e-2, 1.0), 1),
        ((5000, 4, 1, 1e-3, 0.5), 782),
        ((200, 5, 2, 1e-2, 1e-6), 915),
        ((100000, 16, 2, 1e-5, 10.0), 8191),
    ];
    for ((n, dsz, d, gamma, b), want) in bi {
        let got = burn_in_lower_bound(n, dsz, d, gamma, b)?;
        ensure!(got == want, "burn-in at {:?}: {got} vs {want}", (n, dsz, d, gamma, b));
        checked += 1;
    }

    #[rustfmt::skip]
    let certs: [(CertificateInput, [f64; 8]); 5] = [
        (cert(1000, 4, 1, 7.0, 1e4, 1.0, 1.0, 1e-9, 1e-3, 0.1, 1.0, None, 1.0, 1.0),
         [1.12951023487714265e+05, 3.03199253478632891e+13, 2.34585946125910829e+21, 1.46131193319706686e+22,
          5.39555266559999943e+08, 2.68435456e+08, -1.58489319246111338e+00, 408616.0]),
        (cert(200, 2, 1, 1.0, 50.0, 0.5, 2.0, 1e-3, 0.2, 0.5, 0.3, None, 1.0, 1.0),
         [4.88588983379290553e+01, 8.15435593351716193e+02, 8.13862934925793091e+00, 3.44378020830268467e+18,
          6.36000000000000032e+00, 4.0, -5.84803547642573207e+00, 368.0]),
        (cert(5000, 8, 1, 3.0, 1e6, 1.0, 4.0, 1e-8, 0.01, 0.12, 2.0, Some(-20.0), 0.5, 2.0),
         [4.30726650372015627e+02, 1.34358807035121679e+08, 1.63124935450535274e+09, 1.58689211541180591e+39,
          2.62898974720000010e+06, 2.62144e+05, -20.0, 16794116.0]),
        (cert(400, 5, 2, 2.0, 1e3, 0.25, 1.0, 1e-5, 0.05, 0.3, 1.0, None, 1.0, 1.0),
         [7.27716319246387684e+02, 2.49429079811596930e+04, 5.60935367166649823e-01, 1.02038958546873421e+18,
          59.0, 25.0, -7.36806299728077363e+00, 3521.0]),
        (cert(30, 3, 1, 0.5, 10.0, 1.0, 1.0, 0.01, 1.0, 1.0, 0.0, Some(-5.0), 3.0, 0.1),
         [2.71673360279208360e+01, 1.06502008083762504e+02, 7.15787443837014958e+00, 6.37207684639592769e+25,
          6.00000000000000089e-01, 3.0, -5.0, 42.0]),
    ];
    for (i, (input, want)) in certs.iter().enumerate() {
        let c = bound_certificate(input)?;
        let got = [c.m, c.lambda, c.b_gamma, c.big_b_gamma, c.tau, c.kappa_sigma, c.log_rho];
        let names = ["m", "Λ", "b(γ)", "B(γ)", "τ", "κ", "log ρ"];
        for ((name, g), w) in names.iter().zip(got).zip(want) {
            ensure!(close(g, *w, TOL), "certificate {i} {name}: {g:e} vs {w:e}");
            checked += 1;
        }
        ensure!(c.k_mix_estimate == want[7], "certificate {i} k_mix: {} vs {}", c.k_mix_estimate, want[7]);
        checked += 1;
    }
    Ok(format!("{checked} values reproduced (relative tolerance {TOL:e}, integers exact)"))
}

#[allow(clippy::too_many_arguments)]
fn cert(
    n: usize,
    dsz: usize,
    d: usize,
    alpha: f64,
    k: f64,
    lambda_min_m: f64,
    lambda_max_m: f64,
    gamma: f64,
    c_min: f64,
    eta: f64,
    r: f64,
    log_rho: Option<f64>,
    c1: f64,
    c2: f64,
) -> CertificateInput {
    CertificateInput { n, dsz, d, alpha, k, lambda_min_m, lambda_max_m, gamma, c_min, eta, r, log_rho, c1, c2 }
}
