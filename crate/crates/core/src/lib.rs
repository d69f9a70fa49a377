//! Dynamic image reconstruction with a data-driven manifold Laplacian.
//!
//! Frames of a free-breathing, ungated acquisition are treated as samples on
//! a smooth low-dimensional manifold. A graph Laplacian estimated from
//! navigator data regularizes the reconstruction, and its low eigenvectors
//! give a compact temporal basis and a motion-state embedding.

pub mod acquisition;
pub mod array;
pub mod embed;

pub mod error;
mod fft2;
pub mod laplacian;

pub mod levelset;
pub mod linalg;
pub mod phantom;
pub mod recon;


pub use error::{Error, Result};
