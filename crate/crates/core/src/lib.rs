//! Salient object localization and tracking.
//!
//! Each frame is reduced to a minimum barrier distance saliency map, updated
//! only inside the region predicted by a constant-velocity Kalman filter; the
//! dominant salient blob in that region becomes the filter's measurement.
//! The crate also carries the benchmark metrics and harnesses used to score
//! a tracker against ground truth, plus file I/O for the command line tool.

pub mod error;
pub mod eval;
pub mod io;
pub mod kalman;
pub mod postprocess;
pub mod raster;
pub mod saliency;
pub mod synthetic;
pub mod tracker;

pub use error::{Error, Result};
pub use raster::{BoundingBox, GrayGrid, Grid, RealGrid, Region, ScaleTransform};
pub use saliency::DistanceMaps;
pub use tracker::{FrameResult, TrackStatus, Tracker, TrackerConfig};
