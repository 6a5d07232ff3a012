//! Multilevel Picard approximations for high-dimensional semilinear
//! parabolic PDEs
//!
//! ```text
//! u_t + <mu, grad u> + 1/2 tr(sigma sigma^T Hess u) + f(t, x, u, sigma^T grad u) = 0,
//! u(T, .) = g,
//! ```
//!
//! with exactly simulable forward drivers, together with the benchmark
//! problems, a one-dimensional finite-difference reference solver and an
//! experiment harness.

pub mod error;
pub mod examples;
pub mod fdref;
pub mod harness;
pub mod quadrature;
pub mod scheme;
pub mod stochastics;

pub use error::{Error, Result};
pub use examples::{build_example, closed_form_explicit, ExampleConfig, ExampleName};
pub use fdref::{fd_reference, fd_solve, FdConfig, GridKind};
pub use quadrature::{gauss_legendre, inverse_gamma, node_count, rescale, QuadratureRule};
pub use scheme::{
    base_estimate, mlp_estimate, predicted_draw_count, Estimate, Mlp, PdeProblem, SchemeParams,
    Variant, DEFAULT_BUDGET,
};
pub use stochastics::{
    derive_child_key, driver_eval, sample_brownian_path, Branch, BrownianPath, Driver, RngKey,
};
