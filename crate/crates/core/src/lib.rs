//! Spectra of the non-Hermitian Harper chain
//! `-e^{g} xi_{m+1} - e^{-g} xi_{m-1} - 2 cos(2 pi phi m + k) xi_m = E xi_m`:
//! flux sweeps (butterfly and cocoon), the transitions to complex eigenvalues
//! as `g` grows, and checks of the spectral symmetries.

pub mod eigen;
pub mod error;
pub mod matrix;
pub mod operator;
pub mod sweep;
pub mod bifurcation;
pub mod cli;
pub mod symmetry;
pub mod io;

pub use error::{Error, Result};
