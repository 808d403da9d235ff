//! Modal decomposition of acoustic radiance transfer.
//!
//! The crate assembles a delay-network model of diffuse sound energy
//! propagation from a polygonal scene, finds its dominant energy-decay modes,
//! and renders energy impulse responses from those modes as sources and
//! listeners move.

pub mod arnoldi;
pub mod assembly;
pub mod bvh;
pub mod compare;
pub mod complexity;
pub mod decompose;
pub mod descriptors;
pub mod eai;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod loops;
pub mod modal;
pub mod paths;
pub mod render;
pub mod sampling;
pub mod scene;
pub mod session;
pub mod sparse;
pub mod state_space;
pub mod system;
pub mod tdart;

pub use error::{Error, Result};
