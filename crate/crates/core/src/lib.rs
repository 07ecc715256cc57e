//! Gramian-based model reduction for linear stochastic and bilinear control
//! systems, with a-priori error bounds and simulation-based validation.
//!
//! The usual pipeline is
//! [`reduction::reachability_gramian`] → [`reduction::spectral_factorize`] →
//! [`reduction::galerkin_reduce`] → [`bounds::BoundContext`], with
//! [`simulate::euler_maruyama_paired`] to check the bound empirically.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod bounds;
pub mod error;
pub mod input;
pub mod io;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod parallel;
pub mod reduction;
pub mod simulate;
pub mod stability;

pub use error::{Error, Result};
pub use input::{input_l2_norm, InputSignal, Signal};
pub use linalg::Mat;
pub use model::{
    validate_system, BilinearControlSystem, GalerkinRom, ReductionMethod, StochasticLinearSystem,
};
