//! Desk-scale constructive field theory.
//!
//! Transfer operators for one-dimensional spin chains, exact lattice Gaussian
//! free field identities, Wick calculus, lattice P(φ)₂ interactions, Segal
//! amplitudes on discrete cylinders and zeta/Fredholm determinants, each
//! paired with an independent check.

pub mod error;
pub mod numerics;

pub use error::{Error, Result};
pub mod chain;
pub mod cli;
pub mod lattice;
pub mod poly;
pub mod pphi2;
pub mod segal;
pub mod spectral;
pub mod wick;
pub mod zeta;
