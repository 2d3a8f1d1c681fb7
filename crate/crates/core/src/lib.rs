//! Pseudospectral Yang-Mills and Maxwell-Klein-Gordon laboratory on the periodic 3-torus.

pub mod algebra;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod heatflow;
pub mod lattice;
pub mod mkg;
pub mod quadrature;
pub mod spectral;

pub use error::{Result, YmError};
