//! Exact stationary thermodynamics of periodically driven linear quantum engines.

pub mod analysis;
pub mod config;
pub mod currents;
pub mod error;
pub mod floquet;
pub mod interp;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod report;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};
