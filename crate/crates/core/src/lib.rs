//! Spectral analysis of tridiagonal 3×3 block operator matrices on the
//! truncated Fock space `C ⊕ L2(T) ⊕ L2sym(T²)` over the one-dimensional
//! torus.
//!
//! The pipeline runs from a [`model::ModelSpec`] through the fiber
//! determinant ([`friedrichs`]) to essential spectra, Birman–Schwinger counts
//! ([`birman_schwinger`]) and a brute-force matrix discretisation
//! ([`oracle`]) that validates them. [`exact`], [`threshold`] and
//! [`spin_boson`] implement the worked model families.

pub mod birman_schwinger;
pub mod error;
pub mod exact;
pub mod extrema;
pub mod friedrichs;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod roots;
pub mod spin_boson;
pub mod threshold;

pub use error::{Error, Result};

/// Version tag written into every serialised report.
pub const REPORT_FORMAT: &str = "fockspec-report-v1";
