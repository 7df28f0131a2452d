//! Stereo-vision localization of cylindrical workpieces.
//!
//! Estimates the 6-DoF pose (end-face center + axis direction) of a
//! textureless cylindrical sleeve from a calibrated parallel stereo pair.
//! The pipeline stages are:
//!
//! 1. **Matching** – dense region-based stereo matching with a normalized
//!    SAD window cost, producing an integer disparity map.
//! 2. **Reconstruction** – per-pixel linear least-squares triangulation
//!    over the two projection matrices, producing a world-frame cloud.
//! 3. **Pose extraction** – voxel-density filtering of the end face,
//!    RANSAC plane fit, in-plane flattening through an orthonormal affine
//!    basis, RANSAC circle fit of the rim, and lift of the 2D center back
//!    to 3D.
//!
//! A synthetic scene generator ([`scene`]) renders analytic stereo pairs
//! of a bored cylinder with exact ground truth, and [`harness`] drives
//! angle sweeps with error and timing reports. [`calibration`] carries the
//! depth-axis focal-length refinement used to shrink depth residuals.
//!
//! With the default `parallel` feature the per-pixel and per-trial loops
//! run on rayon; disabling it falls back to sequential execution with
//! bit-identical results.

pub mod calibration;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod matcher;
pub mod parallel;
pub mod pose;
pub mod reconstruction;
pub mod scene;

pub use geometry::{CameraIntrinsics, Extrinsics, Pixel, Point3, ProjectionMatrix};
pub use matcher::{DisparityMap, GrayImage, MatchParams};
pub use pose::{Circle2D, CylinderPose, Plane, PoseConfig, RansacParams};
pub use reconstruction::{PointCloud, StereoPair};
