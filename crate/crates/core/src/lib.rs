//! Classical laboratory for solving linear ODEs through Lindbladian dynamics.
//!
//! An ODE `dμ/dt = -V(t)μ + b(t)` with a positive semi-definite Hermitian part
//! is embedded in a Lindbladian on one extra qubit. The unnormalized solution
//! then appears in the off-diagonal block of the evolved density matrix, from
//! which it is read out, measured, or extracted with amplitude amplification.

pub mod budget;
pub mod error;
pub mod extractor;
pub mod lindblad;
pub mod ndme;
pub mod numkernel;
pub mod odecore;
pub mod showcase;
pub mod sqrtpoly;
pub mod suite;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
