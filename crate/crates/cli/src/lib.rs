//! Command-line workflow for the manifold reconstruction library.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod pipeline;
