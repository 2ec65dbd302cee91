//! Deterministic dual-arm bagging simulator and evaluation harness.
//!
//! The crate simulates a particle-based vest bag manipulated by two
//! kinematic grippers. A rule policy drives a library of parameterized
//! action primitives (bag adjustment, dual-arm shaking, one-arm holding,
//! wrist shake, recenter) to open the bag, insert items, and lift it.
//! Opening quality is measured on the convex hull of the projected rim.
//! Perception runs on synthetic top-down renders: oracle segmentation
//! masks, an HSV color auto-labeler, and an analytic Harris/Canny baseline.
//! A tiered trial harness runs seeded experiments and aggregates result
//! tables.
//!
//! Start with the `examples/` directory: each example is a runnable tour of
//! one capability. The `shakingbot` binary wraps the harness for batch runs.

pub mod bag;
pub mod config;
pub mod error;
pub mod executor;
pub mod harness;
pub mod metrics;
pub mod perception;
pub mod policy;
pub mod primitives;
pub mod snapshot;

pub use config::Config;
pub use error::{Error, Result};
