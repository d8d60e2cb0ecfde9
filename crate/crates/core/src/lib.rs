//! Gradient-avalanche laboratory.
//!
//! Trains minimal XOR perceptrons under a threshold-diffusion gradient update
//! (an Olami-Feder-Christensen style cascade acting on the flattened gradient
//! vector), records avalanche statistics across model scales, and extracts
//! finite-size-scaling exponents from the resulting cascade records.
//!
//! The numeric kernels (forward/backward passes, cascade dynamics, quantiles,
//! Gini, log-log fits) are generic over the scalar type via [`Real`]; the CLI
//! and the on-disk formats use [`Scalar`] (`f64`).

pub mod campaign;
pub mod cascade;
pub mod config;
pub mod error;
pub mod fss;
pub mod graph;
pub mod mlp;
pub mod report;
pub mod seeding;
pub mod store;
pub mod synth;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Scalar bound for all numeric kernels. Implemented by `f32` and `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` for constants and config values.
    fn from_config(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + Sum
        + Display
        + Debug
        + Send
        + Sync
        + 'static
{
}

/// Precision used by the CLI, campaigns, and all file formats.
pub type Scalar = f64;

/// Concrete aliases at the default precision.
pub type Model = mlp::MlpModel<Scalar>;
pub type Dataset = mlp::XorDataset<Scalar>;
pub type Fit = fss::ScalingFit;

/// Single-precision aliases for callers that want the smaller footprint.
pub type Model32 = mlp::MlpModel<f32>;
pub type Dataset32 = mlp::XorDataset<f32>;
