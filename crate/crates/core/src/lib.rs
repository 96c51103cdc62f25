//! Nuclear-norm regularized learning with a stochastic subgradient method
//! whose iterates stay in compact SVD form.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common double-precision instantiations.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod completion;
pub mod data;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod probing;
pub mod prox;
mod scalar;
pub mod ssgd;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type Svd = linalg::CompactSvd<f64>;
pub type Observations = data::SparseObservations<f64>;
pub type Model = completion::CompletionModel<f64>;
pub type Config = completion::CompletionConfig<f64>;

pub type Matrix32 = linalg::DenseMatrix<f32>;
pub type Svd32 = linalg::CompactSvd<f32>;
pub type Observations32 = data::SparseObservations<f32>;
pub type Model32 = completion::CompletionModel<f32>;
pub type Config32 = completion::CompletionConfig<f32>;
