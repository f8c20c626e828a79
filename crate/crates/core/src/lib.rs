//! Matrix-field weighted MSE transceiver design.
//!
//! The weighted MSE matrix of a linear MIMO link is modelled as a linear
//! matrix function `Ψ = Σ_k W_k^H Φ W_k + Π` of the data-detection MSE
//! matrix `Φ`. This crate computes optimal precoders for the trace and
//! log-determinant of `Ψ`, and maps dual-hop amplify-and-forward relaying
//! onto the same model so that relay sum-MSE and capacity designs fall out
//! of the point-to-point solutions.
//!
//! Modules, bottom-up:
//!
//! * [`spectral`]: ordered EVD/SVD, Hermitian square roots, Loewner order.
//! * [`model`]: point-to-point signal model, MSE matrices, LMMSE receiver.
//! * [`weighting`]: the weighting operator `Ψ(Φ)`.
//! * [`design`]: structured optimal precoders and water-filling.
//! * [`relay`]: dual-hop AF relay mapping and designs.
//! * [`harness`]: seeded instances, search oracles, experiment runner.

pub mod design;
pub mod error;
pub mod harness;
pub mod model;
pub mod relay;
pub mod spectral;
pub mod weighting;

pub use error::{Error, Result};
pub use spectral::{ComplexMatrix, HermitianMatrix};
