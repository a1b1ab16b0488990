//! Adaptive perception primitives for agent-dense scenes.
//!
//! The crate provides five cooperating subsystems:
//!
//! - [`lid`]: local intrinsic dimension estimation for point clouds from
//!   two-nearest-neighbor distance ratios, with voxel downsampling and
//!   binary / CSV cloud formats.
//! - [`router`]: a three-path complexity router driven by the estimated
//!   dimension, with soft weights, hard and thresholded decisions,
//!   analytic gradients, and a sharpness annealing schedule.
//! - [`grassmann`]: orthonormal bases as subspaces, QR retraction,
//!   principal angles, and the projection metric.
//! - [`ghn`]: hypergraph message passing over agents whose states live on
//!   a Grassmannian, built with spatial hashing so each round costs time
//!   linear in the number of agents, plus the quadratic attention
//!   reference it is measured against.
//! - [`memory`]: a gated two-store episodic memory (short-term ring
//!   buffer with cross-attention, long-term fast weights with a delta
//!   rule) and the track-association loop that uses it to survive
//!   occlusions.
//! - [`scenegen`]: deterministic synthetic scenes spanning six traffic
//!   regimes, with scripted occlusions, for calibrating and benchmarking
//!   all of the above.

pub mod error;
pub mod ghn;
pub mod grassmann;
pub mod lid;
pub mod memory;
pub mod router;
pub mod scenegen;

pub use error::{Error, Result};

// Matrix types appear throughout the public API, so downstream crates
// get the exact linear-algebra version this crate was built against.
pub use nalgebra;
