//! Integrality-gap instance generators for the Sherali-Adams LP and for the
//! basic relaxation.

pub mod girth;
pub mod sa;
pub mod sdp;
pub mod tree;

pub use girth::{prune_girth, ConstraintGraph, GraphStats, PruneReport};
pub use sa::*;
pub use sdp::*;
pub use tree::*;
