//! Differential light shifts, magic-intensity trapping and thermally averaged
//! Ramsey coherence for optically trapped Rb-87 clock qubits.

pub mod acceptance;
pub mod dls;
pub mod error;
pub mod exec;
pub mod fitting;
pub mod quadrature;
pub mod ramsey;
pub mod thermal;
pub mod transfer;
pub mod units;

pub use error::{Error, Result};
pub use exec::Execution;
