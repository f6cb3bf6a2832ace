//! Invariant point processes on groups: samplers, equivariant factor maps,
//! Palm estimation and Monte Carlo checks of the Palm calculus identities.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod clumping;
pub mod equivariance;
pub mod error;
pub mod factor;
pub mod geometry;
pub mod harness;
pub mod index;
pub mod io;
pub mod laws;
pub mod palm;
pub mod process;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Carrier, GroupPoint, Window};
pub use process::{Configuration, MarkedConfiguration, RootedConfiguration};
pub use report::StatReport;
