//! Master-equation simulator for a single-mode optomechanical cavity coupled to
//! thermal and squeezed-thermal reservoirs, in a truncated Fock basis.

pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fock;
pub mod liouvillian;
pub mod model;
pub mod reservoir;
pub mod sparse;
pub mod validation;

pub use error::{Error, Result};
