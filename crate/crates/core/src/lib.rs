//! Random graph samplers for the Kronecker product graph model (KPGM) and the
//! multiplicative attribute graph model (MAGM).
//!
//! MAGM graphs are produced by quilting together KPGM samples, which runs in
//! sub-quadratic expected time when attribute configurations are spread out,
//! and by a hybrid fast path ([`speedup`]) when a few configurations dominate.
//! Naive `O(n²)` samplers are included as ground truth.

pub mod config;
pub mod edgelist;
pub mod error;
pub mod kronecker;
pub mod magm;
pub mod rng;
pub mod speedup;
pub mod stats;
pub mod validate;

pub use edgelist::{EdgeList, NodeId};
pub use error::{Error, Result};
pub use kronecker::{InitiatorChain, InitiatorMatrix};
pub use magm::{AttributeAssignment, MagmModel, NodePartition};
pub use speedup::SpeedupPlan;
