//! Spatial downlink-throughput modeling without the standard library.
//!
//! The crate carries two throughput predictors and the tooling to compare them:
//!
//! * [`kernels`] and [`gpr`]: Gaussian-process regression over 2D floor
//!   coordinates with composite (constant × stationary + white noise) kernels,
//!   heteroscedastic per-location noise, and multi-restart marginal-likelihood
//!   fitting.
//! * [`linklayer`]: a channel-centric baseline chaining path loss, SINR, MCS
//!   selection, spatial-layer selection and the NR data-rate formula.
//! * [`scorecard`]: bias / accuracy / variability error statistics and
//!   PDF-normalized histograms.
//!
//! [`dataset`] aggregates raw samples into waypoints and pairs them with
//! prediction grids built by [`grid`]. Parsing, serialization to files and the
//! command line live in the companion `radiomap` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod geom;
pub mod gpr;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod linklayer;
pub mod scorecard;

pub use error::{Error, Result};
pub use geom::Point;
