//! Lattice fields and Fourier-side operators on the periodic cube.

pub mod bilinear;
pub mod field;
pub mod grid;
pub mod ops;
pub mod random;
pub mod transform;

pub use bilinear::{bilinear_w, null_form_n, null_form_q, NullFormVariant, Pairing, WMode};
pub use field::{AlgField, SpecField, VecField};
pub use grid::Grid;
pub use transform::Spectral;
