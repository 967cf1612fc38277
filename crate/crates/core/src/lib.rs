//! Physics-informed inversion of heterogeneous linear-elastic material fields.
//!
//! The crate covers the full pipeline:
//!
//! * [`grid`] — grid geometry, field containers and isotropic elasticity algebra,
//! * [`fd`] — dimensionless finite-difference stencils and equilibrium residuals,
//! * [`fem`] — a plane-strain Q4 finite-element solver for synthetic data generation,
//! * [`autodiff`] — a reverse-mode automatic differentiation engine and Adam,
//! * [`network`] — the inversion UNet and the dense fully-connected baseline,
//! * [`loss`] — physics-based losses with optional self-adaptive spatial weights,
//! * [`train`] — the training loop, error metrics and multi-seed aggregation,
//! * [`io`] — on-disk dataset bundles, run records and PPM rendering.
//!
//! All numerical code is generic over the scalar type via [`scalar::Scalar`];
//! data generation typically runs in `f64` while training runs in `f32`.

pub mod autodiff;
pub mod fd;
pub mod fem;
pub mod grid;
pub mod io;
pub mod loss;
pub mod network;
pub mod scalar;
pub mod train;

mod error;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete field aliases for the two supported precisions.
pub type Field32 = grid::ScalarField<f32>;
pub type Field64 = grid::ScalarField<f64>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type Tensor64 = autodiff::Tensor<f64>;
