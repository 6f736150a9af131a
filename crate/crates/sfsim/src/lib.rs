//! Grid-circuit state-vector simulation with partitioned path sums.

pub mod analysis;
pub mod blocked;
pub mod circuit;
pub mod config;
pub mod dense;
pub mod error;
pub mod partition;
pub mod path;
pub mod repro;

pub use circuit::{Circuit, Gate, GateKind, GridLayout, C64};
pub use dense::StateVector;
pub use error::{Error, Result};
