//! Identification of linear time-varying operators with sparse, unknown
//! spreading-function support from the response to a single probing signal.
//!
//! The crate is organised along the processing chain:
//!
//! * [`model`]: grid geometry, cell supports, discrete spreading functions and
//!   their packing into the row-sparse unknown matrix `S`.
//! * [`probing`]: probing sequences and the `L x L^2` measurement matrix `A_c`.
//! * [`pipeline`]: sampled operator response, noise, discrete Zak transform and
//!   assembly of the measurement ensemble `Z = A_c S`.
//! * [`solvers`]: joint-sparse support recovery (MMV-MUSIC, MMV-OMP, an
//!   exhaustive minimum-support oracle) and least-squares reconstruction.
//! * [`analysis`]: stability bounds, the uniqueness threshold, ambiguity
//!   witnesses and error scoring.
//! * [`harness`]: Monte Carlo sweeps, CSV output and the matrix file format.
//!
//! Probing families and solvers are strategies behind trait objects, looked up
//! by name in a [`registry::Registry`].

pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod probing;
pub mod registry;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::CMat;
pub use num_complex::Complex64;
