//! Linear response and characteristic estimates for the screened
//! Vlasov–Poisson system near homogeneous equilibria.

pub mod characteristics;
pub mod cli;
pub mod dispersion;
pub mod equilibria;
pub mod error;
pub mod kernel;
pub mod numerics;
pub mod report;
pub mod response;
pub mod transport;

pub use error::{Error, Result};
