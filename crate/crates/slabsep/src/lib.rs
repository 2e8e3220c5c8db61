//! TASEP with open boundaries and its last-passage representation on a slab.
//!
//! The crate is organized around six concerns:
//!
//! * [`model`] — boundary parameters, derived constants, the phase diagram,
//!   and slab geometry;
//! * [`tasep`] — exact event-driven simulation, the basic coupling, and the
//!   disagreement process;
//! * [`lpp`] — reproducible exponential environments, passage-time dynamic
//!   programming, geodesics, the growth-interface codec and evolution, and
//!   geometric event detectors;
//! * [`oracle`] — exact small-instance ground truth (generator, stationary
//!   solve, uniformized transients, exact mixing times, brute-force passage
//!   times);
//! * [`analysis`] — statistical estimators and the named experiments that
//!   turn simulator output into acceptance-grade numbers;
//! * [`report`] — machine-readable artifacts (JSON/JSONL/CSV) with embedded
//!   configuration for bit-reproducible reruns.

pub mod analysis;
pub mod error;
pub mod lpp;
pub mod model;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod tasep;
pub mod threads;

pub use error::{Error, Result};
