//! Bit-sliced arithmetic over the residue ring Z/4Z.
//!
//! Every Z4 digit is two bits, so vectors and matrices are stored as two
//! bit-planes (low bits and high bits). One word operation on the planes acts
//! on 64 digits at once, the software counterpart of an array of 6-input
//! lookup tables each computing a multiply-accumulate.
//!
//! The crate is organized as:
//!
//! - [`z4core`]: the multiply-accumulate primitive, packed vectors and dot products.
//! - [`gf2poly`]: polynomials over GF(2) used to vet recurrence coefficients.
//! - [`matrix`]: the [`Z4Matrix`] type, naive and blocked multiplication, powers.
//! - [`strassen`]: seven-product block recursion.
//! - [`sequence`]: companion matrices and selection of the uniform recurrence.
//! - [`schedule`]: memory/compute overlap cost model, simulator and self-test.
//! - [`format`]: `.z4t` text and `.z4b` binary matrix files.
//! - [`cli`]: the `z4ring` command line.

pub mod cli;
pub mod error;
pub mod format;
pub mod gf2poly;
pub mod matrix;
pub mod schedule;
pub mod sequence;
pub mod strassen;
pub mod z4core;

pub use error::{Error, Result};
pub use gf2poly::Gf2Poly;
pub use matrix::{BlockParams, Z4Matrix};
pub use sequence::RecurrenceSpec;
pub use z4core::{PackedZ4Vector, Z4Digit};
