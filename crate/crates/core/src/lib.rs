//! Truncated Fock-space laboratory for the eight-port homodyne detector.
//!
//! The detector's outcome statistics are simulated exactly on finite Fock
//! spaces, by a direct four-mode computation and by a factorised route
//! through two balanced homodyne observables, and compared against the
//! covariant phase-space observable they approach at high reference
//! amplitude.

pub mod convergence;
pub mod eightport;
pub mod error;
pub mod fock;
pub mod homodyne;
pub mod linalg;
pub mod multimode;
pub mod phasespace;
pub mod quadrature;
pub mod region;

pub use error::{Error, Result};
pub use fock::{Cutoff, DensityOperator, FockOperator, StateVector};
pub use region::{Interval, IntervalSet, Rectangle};
