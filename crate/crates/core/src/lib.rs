#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
extern crate alloc;

pub mod degree;
pub mod error;
pub mod evolution;
pub mod expm;
pub mod linalg;
pub mod nonlinearity;
pub mod operator;
pub mod resonance;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
