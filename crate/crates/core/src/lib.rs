//! Exact arithmetic for convolutional networks over finite discretized groups:
//! forward passes, closed-form VC-dimension upper bounds, constructive
//! shattering families, and a brute-force shattering verifier.
//!
//! All computation is in `f64` with deterministic summation order, so
//! repeated runs with the same seed produce identical bytes in every report.

pub mod bounds;
pub mod construct;
pub mod error;
pub mod group;
pub mod interval;
pub mod network;
pub mod par;
pub mod rng;
pub mod selftest;
pub mod signal;
pub mod verify;

pub use error::{Error, Result};
pub use group::{DiscretizedGroup, GroupDescriptor};
pub use network::{DnnParams, DnnSpec, GcnnParams, GcnnSpec};
pub use par::Parallelism;
pub use signal::{KernelBasis, Signal};
