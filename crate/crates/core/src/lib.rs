//! Multiplexing of chaotic neuron signals and their recovery by sparse
//! approximation.
//!
//! A transmitting neuron forms `y = A x`, a weighted sum of `N` input
//! signals observed over `M` time steps. A small block of the columns of `A`
//! are Hindmarsh-Rose membrane voltage traces; the rest are Gaussian noise.
//! Only `k` weights are significant. The receiver holds a corrupted copy
//! `Â` of the mixing matrix and identifies the `k` significant columns by
//! solving a basis pursuit denoising problem (or orthogonal matching
//! pursuit) and thresholding the result.
//!
//! Column indices are zero-based throughout.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ensemble;
mod error;
pub mod hr;
pub mod io;
pub mod multiplex;
pub mod pipeline;
pub mod recovery;
pub mod rng;

pub use error::{Error, Result};
