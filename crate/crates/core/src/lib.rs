//! Wave-packet evaluation of control-pulse–modified two-dimensional
//! electronic spectra of a vibronic dimer.

pub mod error;
pub mod model;
pub mod oracle;
pub mod pathways;
pub mod propagation;
pub mod signal;
pub mod special;
pub mod units;

pub use error::{Error, Result};

/// Version of every JSON/CSV artifact layout written by this crate.
pub const SCHEMA_VERSION: u32 = 1;
