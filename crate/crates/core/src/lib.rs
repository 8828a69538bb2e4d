//! Non-neural machinery for heatmap-guided 6-DoF grasp detection.
//!
//! The crate covers the full path from a depth image and ground-truth
//! grasp labels to evaluated SE(3) grasps:
//!
//! - [`geometry`]: grasp representations, pinhole projection, rotation distance
//! - [`pointops`]: depth-to-cloud, farthest point sampling, ball query, KNN, normals
//! - [`heatmap`]: Gaussian confidence and gridded attribute encoding
//! - [`anchors`]: non-uniform rotation anchors and their streaming update
//! - [`aggregation`]: heatmap-guided region selection and sampling
//! - [`decode`]: class scores to grasps, NMS, and a teacher standing in for a network
//! - [`losses`]: focal and smooth-L1 losses with closed-form gradients
//! - [`eval`]: coverage, collision-free ratio, antipodal score, quality curves
//! - [`scenegen`]: synthetic tabletop scenes with analytic labels and rendering
//! - [`pipeline`] and [`cli`]: the end-to-end runner and command-line surface

// Validation uses `!(x > 0.0)` and friends so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod anchors;
pub mod cli;
pub mod config;
pub mod decode;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod heatmap;
pub mod io;
pub mod losses;
pub mod pipeline;
pub mod pointops;
pub mod scenegen;

pub use error::{Error, Result};
