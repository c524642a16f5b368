//! Explicit ReLU network constructions for approximating smooth and
//! piecewise smooth functions.
//!
//! The crate builds networks by hand rather than by training: products,
//! monomials, local Taylor polynomials, box cutoffs, horizon functions and
//! their combinations. Every construction reports its depth, weight count
//! and weight grid so the error and complexity contracts can be checked by
//! measurement. Networks can be serialized to JSON or to a compact bit code.

pub mod analysis;
pub mod approximators;
pub mod calculus;
pub mod codec;
pub mod error;
pub mod multiindex;
pub mod network;
pub mod primitives;
pub mod quantization;
pub mod target_spec;
pub mod targets;

pub use error::{Error, Result};
pub use network::{Entry, Layer, Network, Violation};
