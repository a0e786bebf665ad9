//! Exact invariants of Hilbert modular surfaces for Γ₀(𝔑) and Γ₀¹(𝔑) over real quadratic fields.

pub mod arith;
pub mod classgroups;
pub mod cusps;
pub mod dataset;
pub mod dimensions;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod geometry;
pub mod ideals;

pub use error::{HmsError, Result};
