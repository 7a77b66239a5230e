//! Multiple operator integrals, derivatives of matrix functions and spectral
//! shift functions for finite Hermitian matrices.

pub mod derivatives;
pub mod error;
pub mod identities;
pub mod linalg;
pub mod mmio;
pub mod moi;
pub mod piecewise;
pub mod quad;
pub mod random;
pub mod relbound;
pub mod scalar;
pub mod ssf;
pub mod suite;

pub use error::{OpError, Result};
pub use linalg::{ComplexMatrix, HermitianMatrix, SpectralDecomposition, C64};
pub use scalar::ScalarFunction;
