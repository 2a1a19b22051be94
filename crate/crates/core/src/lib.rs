//! Free-probability machinery for compound Wishart and signal-plus-noise
//! random matrix models.
//!
//! Moments of the free deterministic equivalents are available by three
//! independent routes: non-crossing partition combinatorics ([`series`],
//! [`models`]), a two-block operator-valued subordination fixed point
//! ([`subordination`]), and finite-dimensional Monte Carlo ([`randmat`]).
//! [`models`] also recovers model parameters from moment data.

pub mod error;
pub mod ncpart;
pub mod models;
pub mod poly;
pub mod randmat;
pub mod series;
pub mod subordination;

pub use error::{Error, Result};
