//! Posterior computation for the Schrödinger regression model
//!
//! ```text
//!   Y_i = u_{f_θ}(X_i) + ε_i,   ½Δu − f u = 0 on 𝒪,  u = g on ∂𝒪,
//!   f_θ = Φ(Σ θ_k e_k),         θ ~ N(0, N^{−d/(2α+d)} Λ_α^{−1}),
//! ```
//!
//! on the unit interval or square. Sampling uses an unadjusted Langevin
//! chain on a surrogate posterior that agrees with the true one near a data
//! driven initializer and is globally log-concave.
//!
//! Module map:
//!
//! - [`pde`]: finite-difference Schrödinger solves and point evaluation
//! - [`spectral`]: Dirichlet eigenbasis and coefficient vectors
//! - [`forward`]: link function, forward map and its derivatives
//! - [`likelihood`]: data generation, `ℓ_N`, prior and posterior
//! - [`surrogate`]: the convexified likelihood and tuning formulas
//! - [`sampler`]: Langevin chains and ergodic averages
//! - [`optim`]: gradient descent, MAP and the initializer
//! - [`diagnostics`]: Wasserstein distances, curvature and certificates
//! - [`io`]: CSV and JSON persistence

pub mod diagnostics;
pub mod error;
pub mod forward;
pub mod io;
pub mod likelihood;
pub mod optim;
pub mod pde;
pub mod sampler;
pub mod spectral;
pub mod surrogate;

pub use error::{Error, Result};
pub use forward::{ForwardModel, ForwardState, LinkFunction};
pub use likelihood::{
    generate_dataset, generate_dataset_with_noise, Dataset, GaussianPrior, GaussianTarget, LinearRegressionLikelihood,
    LogDensity, LogLikelihood, Posterior, PriorSpec, SchrodingerLikelihood,
};
pub use optim::{compute_map, gradient_descent, initialize, DescentConfig, InitializerConfig, MapConfig};
pub use pde::{solve_schrodinger, solve_source, BoundaryData, Grid, GridFunction};
pub use sampler::{run_chain, ChainConfig, ChainOutput, ChainState};
pub use spectral::{Basis, CoefficientVector};
pub use surrogate::{EllipsoidNorm, SurrogateLikelihood, SurrogateSpec};

pub use nalgebra::{DMatrix, DVector};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The surrogate posterior of the Schrödinger model.
pub type SurrogatePosterior = Posterior<SurrogateLikelihood<SchrodingerLikelihood>>;
