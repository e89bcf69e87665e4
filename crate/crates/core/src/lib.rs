//! Screen-content image segmentation by sparse-smooth decomposition.
//!
//! An image is processed in non-overlapping blocks. Each block is modeled as
//! a smooth layer (a combination of a few low-frequency 2D DCT bases) plus a
//! sparse layer holding text, lines and other sharp content; the two are
//! separated by an L1-regularized least-squares (basis pursuit denoising)
//! solve run with ADMM. Pixels the smooth layer reproduces closely are
//! background, the rest foreground. Flat and smoothly-varying blocks are
//! classified by cheaper short-circuit paths and never reach the solver.
//!
//! The crate ships a library (basis construction, solver, segmenter, mask
//! I/O, evaluation) and the `scseg` command-line tool built on it. Block
//! classification runs on a rayon pool when the default `rayon` feature is
//! enabled and falls back to a sequential loop without it; outputs are
//! identical either way.

pub mod basis;
pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
mod linalg;
pub mod segment;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use segment::{segment_image, segment_image_serial, Mask, Segmentation, SegmenterConfig};
