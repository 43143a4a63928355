//! Perimeter estimation for pixelated excursion sets of planar random fields.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod gkf;
pub mod grid;
pub mod io;
pub mod proxy;
pub mod sim;
pub mod special;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
pub use estimator::{perimeter_hat, select_m, BlockCounts, PerimeterEstimate};
pub use grid::{threshold, BinaryField, GridSpec, ScalarField};
pub use topology::{topology, Connectivity, Topology};
