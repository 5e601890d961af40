//! Conditional Gaussian states of a continuously monitored optomechanical
//! oscillator.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditioning;
pub mod error;
pub mod gram;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod rational;
pub mod statespace;
pub mod trajectory;
pub mod wienerhopf;

pub use error::{Error, Result};
pub use nalgebra::{Matrix2, Vector2};
