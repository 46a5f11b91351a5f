//! Minimum Wasserstein deconvolution for uncoupled isotonic regression.
//!
//! Given the unordered design points `{x_1, ..., x_n}` and the unordered
//! responses `{y_1, ..., y_n}` of a model `y_i = f(x_i) + ξ_i` with a
//! nondecreasing `f` and a known noise law `D`, the estimator searches for a
//! measure `μ` on a finite grid minimizing `W_2²(Π(μ * D), π̂)`, where `π̂` is
//! the empirical measure of the responses and `Π` snaps the real line onto the
//! grid. The minimizer is rounded back to a monotone function through its
//! quantile function.
//!
//! Modules:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`measures`] | empirical and grid measures, exact 1D Wasserstein distances, monotone couplings with dual potentials |
//! | [`isotonic`] | monotone functions, pushforwards, empirical ℓ_p norms, PAVA, naive sorting, quantile rounding |
//! | [`noise`] | known noise laws, ψ₁ bounds, the grid and its projected convolution kernel |
//! | [`deconv`] | grid construction, convex objective, Frank–Wolfe solver, end-to-end estimate |
//! | [`moments`] | moment gaps and numerical checks of the moment-matching inequalities |
//! | [`quadrature`] | Gauss–Legendre nodes and adaptive Gauss–Kronrod integration |

pub mod deconv;
pub mod error;
pub mod isotonic;
pub mod measures;
pub mod moments;
pub mod noise;
pub mod quadrature;

pub use error::{Error, Result};
