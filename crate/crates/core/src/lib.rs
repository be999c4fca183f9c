//! Bi-fidelity ℓ1-regularized neural network training.
//!
//! The numerical core (`linalg`, `network`, `regularization`, `optimizer`,
//! `bounds`) is generic over [`Scalar`] (`f32` or `f64`). The physical models
//! and the experiment harness run in `f64`.

pub mod bounds;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod models;
pub mod network;
pub mod optimizer;
pub mod regularization;
pub mod scalar;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use linalg::{Matrix, Rng, Vector};
pub use network::{ActivationKind, AutoencoderSpec, NetworkParams, NetworkSpec};
pub use optimizer::{AdamConfig, AdamState};
pub use regularization::{RegState, RegStrategy};
pub use scalar::Scalar;

pub type Vector64 = Vector<f64>;
pub type Matrix64 = Matrix<f64>;
pub type Dataset64 = Dataset<f64>;
pub type NetworkParams64 = NetworkParams<f64>;
pub type RegStrategy64 = RegStrategy<f64>;
pub type Vector32 = Vector<f32>;
pub type Matrix32 = Matrix<f32>;
pub type NetworkParams32 = NetworkParams<f32>;
