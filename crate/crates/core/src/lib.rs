//! Rf-dressed hyperfine spectra of trapped J = 1/2 alkali atoms and
//! second-order magic trap conditions for microwave clocks.
//!
//! Units throughout: energies as frequencies (Hz), fields in Gauss, χ in G².

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atom;
pub mod dressed;
pub mod error;
pub mod fit;
pub mod floquet;
pub mod linalg;
pub mod magic;
pub mod robustness;
pub mod spin;
pub mod static_spectrum;

pub use atom::{AtomSpec, StateLabel};
pub use dressed::{LocalFieldPoint, TrapConfig};
pub use error::{Error, Result};
