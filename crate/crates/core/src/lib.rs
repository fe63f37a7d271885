//! Automatic ground-truth generation for drivable ego-corridor segmentation.
//!
//! A frame's lane boundaries, ego pose, tracked objects, occupancy grid,
//! altitude samples and camera calibration are turned into a binary image
//! mask in six stages: corridor construction with lateral shift correction,
//! cut-off at traffic participants, occlusion stamp-out, elevation lifting,
//! tilt-compensated pinhole projection, and rasterization. An independent
//! per-pixel [`oracle`] renderer and Dice/Jaccard [`metrics`] verify the result.

pub mod corridor;
pub mod elevation;
pub mod error;
pub mod geometry;
pub mod mask;
pub mod metrics;
pub mod objects;
pub mod occlusion;
pub mod oracle;
pub mod pipeline;
pub mod projection;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
