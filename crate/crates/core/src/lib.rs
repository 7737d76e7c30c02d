//! Spectral estimation of the infinitesimal generator of a Markov semigroup
//! from trajectory data.
//!
//! The generator `L` of a Markov process governs how expectations of
//! observables evolve: `A_t = e^{tL}`. Its leading eigenvalues encode the
//! relaxation timescales of the process and its eigenfunctions the slow
//! coordinates (metastable states). Instead of estimating a single transfer
//! operator `A_Δt`, this crate regresses onto the resolvent
//! `R_μ = (μI − L)^{−1} = ∫₀^∞ A_t e^{−μt} dt`, approximated by a
//! trapezoid-rule combination of transfer operators at multiple lags. The
//! resolvent shares eigenfunctions with `L`, with the eigenvalue map
//! `ν = 1/(μ − λ)`, and keeps a healthy spectral gap even at small sampling
//! lags.
//!
//! Modules:
//! - [`trajectory`]: time-stamped sample paths, CSV interchange.
//! - [`simulate`]: Euler–Maruyama simulators for overdamped Langevin and
//!   Ornstein–Uhlenbeck benchmarks, with stationarity warm-up.
//! - [`quadrature`]: Laplace-transform quadrature weights and the banded
//!   combination matrix that aggregates lagged cross-covariances.
//! - [`features`]: explicit dictionaries, Gaussian kernels and Gram matrices,
//!   random Fourier features.
//! - [`estimator`]: the primal (feature-space) and dual (sample-space)
//!   reduced-rank regression fits, eigentriple extraction, diagnostics and
//!   forecasting.
//! - [`oracle`]: ground-truth spectra (analytic OU lattice, finite-volume
//!   discretization of 1D Langevin generators) for validation.

pub mod error;
pub mod estimator;
pub mod features;
mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod simulate;
pub mod trajectory;

pub use error::{Error, Result};
