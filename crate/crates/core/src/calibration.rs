//! Depth-axis calibration refinement.
//!
//! After a first-pass calibration the residual error is concentrated on
//! the depth axis, where it is linear in the focal length for a fixed
//! disparity. A single known-depth observation therefore fixes it:
//! `f_corrected = f * Z_true / Z_measured`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("disparity is zero")]
    ZeroDisparity,
    #[error("depth must be positive (got {0})")]
    NonPositiveDepth(f64),
    #[error("focal length must be positive (got {0})")]
    NonPositiveFocal(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {estimated} estimated vs {truth} truth points")]
    LengthMismatch { estimated: usize, truth: usize },
}

/// Worst-case planar and depth residuals around a focal refinement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub xy_error: f64,
    pub z_error: f64,
    pub f_before: f64,
    pub f_after: f64,
}

/// One measured depth of a target whose true depth is known.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DepthObservation {
    #[serde(rename = "Z_measured")]
    pub z_measured: f64,
    #[serde(rename = "Z_true")]
    pub z_true: f64,
    pub disparity: f64,
}

/// Input document for the `calibrate` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationInput {
    pub f: f64,
    pub observations: Vec<DepthObservation>,
}

/// Maximum residuals of an estimated point set against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarResiduals {
    /// max over pairs of sqrt(dx^2 + dy^2), mm
    pub xy_error: f64,
    /// max over pairs of |dz|, mm
    pub z_error: f64,
}

/// The depth-disparity model `Z = f (1 - D/d)`, used by the
/// focal-correction derivation.
pub fn offset_depth_model(f: f64, offset: f64, disparity: f64) -> Result<f64, CalibrationError> {
    if disparity == 0.0 {
        return Err(CalibrationError::ZeroDisparity);
    }
    Ok(f * (1.0 - offset / disparity))
}

/// Rescales the focal length so the measured depth of a known target
/// becomes exact: `f * Z_true / Z_measured`.
pub fn refine_focal(f: f64, z_measured: f64, z_true: f64) -> Result<f64, CalibrationError> {
    if f <= 0.0 {
        return Err(CalibrationError::NonPositiveFocal(f));
    }
    if z_measured <= 0.0 {
        return Err(CalibrationError::NonPositiveDepth(z_measured));
    }
    if z_true <= 0.0 {
        return Err(CalibrationError::NonPositiveDepth(z_true));
    }
    Ok(f * z_true / z_measured)
}

/// Worst-case residuals of index-paired point lists.
pub fn evaluate_calibration(
    estimated: &[Point3],
    truth: &[Point3],
) -> Result<PlanarResiduals, CalibrationError> {
    if estimated.is_empty() || truth.is_empty() {
        return Err(CalibrationError::EmptyInput);
    }
    if estimated.len() != truth.len() {
        return Err(CalibrationError::LengthMismatch {
            estimated: estimated.len(),
            truth: truth.len(),
        });
    }
    let mut xy = 0.0f64;
    let mut z = 0.0f64;
    for (e, t) in estimated.iter().zip(truth) {
        let dx = e.x - t.x;
        let dy = e.y - t.y;
        xy = xy.max((dx * dx + dy * dy).sqrt());
        z = z.max((e.z - t.z).abs());
    }
    Ok(PlanarResiduals { xy_error: xy, z_error: z })
}
