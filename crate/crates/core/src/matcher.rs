//! Region-based dense stereo matching with a normalized SAD window cost.
//!
//! The left image is the reference; for a rig with the right camera
//! displaced along +x, correspondences sit at column `u - d` in the right
//! image. Disparities are searched over integers, winner-take-all, no
//! sub-pixel refinement; ties break toward the smaller disparity.
//! Windows are never padded: candidates whose window leaves the image are
//! skipped and a pixel with no surviving candidate is invalid.

use thiserror::Error;

use crate::parallel::{map_indexed, ExecMode};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("window at ({u}, {v}) exceeds a {width}x{height} image")]
    WindowOutOfBounds { u: i64, v: i64, width: usize, height: usize },
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image data length {got} does not match {width}x{height}")]
    BadDataLength { width: usize, height: usize, got: usize },
    #[error("intensity out of [0,1] or not finite")]
    BadIntensity,
    #[error("invalid match parameters: {0}")]
    BadParams(String),
}

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, MatchError> {
        if data.len() != width * height {
            return Err(MatchError::BadDataLength { width, height, got: data.len() });
        }
        if !data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(MatchError::BadIntensity);
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v).clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }
}

/// Window half-extents, search bound, and the two validity gates.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MatchParams {
    /// Window half-width m: window spans 2m+1 columns.
    pub half_width: usize,
    /// Window half-height n: window spans 2n+1 rows.
    pub half_height: usize,
    /// Inclusive upper bound of the integer disparity search.
    pub max_disparity: usize,
    /// Best cost times this must not exceed the second-best cost.
    /// 1.0 disables the gate.
    pub uniqueness_ratio: f64,
    /// Minimum intensity range inside the reference window.
    /// 0.0 disables the gate.
    pub texture_threshold: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            half_width: 2,
            half_height: 2,
            max_disparity: 64,
            uniqueness_ratio: 1.05,
            texture_threshold: 0.02,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<(), MatchError> {
        if self.half_width < 1 || self.half_height < 1 {
            return Err(MatchError::BadParams("window half-extents must be >= 1".into()));
        }
        if self.max_disparity < 1 {
            return Err(MatchError::BadParams("max_disparity must be >= 1".into()));
        }
        if !(self.uniqueness_ratio >= 1.0) {
            return Err(MatchError::BadParams("uniqueness_ratio must be >= 1".into()));
        }
        if !(self.texture_threshold >= 0.0) {
            return Err(MatchError::BadParams("texture_threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-pixel integer disparities; `None` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<Option<u32>>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, values: Vec<Option<u32>>) -> Self {
        assert_eq!(values.len(), width * height);
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> Option<u32> {
        self.values[v * self.width + u]
    }

    pub fn values(&self) -> &[Option<u32>] {
        &self.values
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

#[inline]
fn window_in_bounds(img: &GrayImage, u: i64, v: i64, m: i64, n: i64) -> bool {
    u - m >= 0 && v - n >= 0 && u + m < img.width as i64 && v + n < img.height as i64
}

/// Normalized mean absolute difference of two equally sized windows:
/// `(1/((2m+1)(2n+1))) * sum |g1 - g2|`.
pub fn sad_cost(
    left: &GrayImage,
    (ul, vl): (usize, usize),
    right: &GrayImage,
    (ur, vr): (usize, usize),
    half_width: usize,
    half_height: usize,
) -> Result<f64, MatchError> {
    let (m, n) = (half_width as i64, half_height as i64);
    if !window_in_bounds(left, ul as i64, vl as i64, m, n) {
        return Err(MatchError::WindowOutOfBounds {
            u: ul as i64,
            v: vl as i64,
            width: left.width,
            height: left.height,
        });
    }
    if !window_in_bounds(right, ur as i64, vr as i64, m, n) {
        return Err(MatchError::WindowOutOfBounds {
            u: ur as i64,
            v: vr as i64,
            width: right.width,
            height: right.height,
        });
    }
    let mut sum = 0.0;
    for dv in -n..=n {
        let lrow = (vl as i64 + dv) as usize * left.width;
        let rrow = (vr as i64 + dv) as usize * right.width;
        for du in -m..=m {
            let a = left.data[lrow + (ul as i64 + du) as usize];
            let b = right.data[rrow + (ur as i64 + du) as usize];
            sum += (a - b).abs();
        }
    }
    let count = ((2 * m + 1) * (2 * n + 1)) as f64;
    Ok(sum / count)
}

fn window_range(img: &GrayImage, u: usize, v: usize, m: usize, n: usize) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for dv in v - n..=v + n {
        let row = dv * img.width;
        for du in u - m..=u + m {
            let x = img.data[row + du];
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    hi - lo
}

/// Winner-take-all disparity of a single reference pixel, or `None` when
/// no candidate window fits, the texture gate fails, or the best match is
/// not unique enough.
pub fn match_pixel(
    left: &GrayImage,
    right: &GrayImage,
    u: usize,
    v: usize,
    p: &MatchParams,
) -> Result<Option<u32>, MatchError> {
    if left.width != right.width || left.height != right.height {
        return Err(MatchError::DimensionMismatch(
            left.width,
            left.height,
            right.width,
            right.height,
        ));
    }
    p.validate()?;
    Ok(match_pixel_unchecked(left, right, u, v, p))
}

#[inline]
fn match_pixel_unchecked(
    left: &GrayImage,
    right: &GrayImage,
    u: usize,
    v: usize,
    p: &MatchParams,
) -> Option<u32> {
    let (m, n) = (p.half_width, p.half_height);
    if !window_in_bounds(left, u as i64, v as i64, m as i64, n as i64) {
        return None;
    }
    if window_range(left, u, v, m, n) < p.texture_threshold {
        return None;
    }
    let mut best: Option<(u32, f64)> = None;
    let mut second = f64::INFINITY;
    let d_hi = p.max_disparity.min(u.saturating_sub(m));
    for d in 0..=d_hi {
        let ur = u - d;
        if ur < m {
            break;
        }
        let cost = sad_cost(left, (u, v), right, (ur, v), m, n)
            .expect("candidate window checked in bounds");
        match best {
            None => best = Some((d as u32, cost)),
            Some((_, bc)) if cost < bc => {
                second = bc;
                best = Some((d as u32, cost));
            }
            Some(_) => second = second.min(cost),
        }
    }
    let (d, cost) = best?;
    if second.is_finite() && cost * p.uniqueness_ratio > second {
        return None;
    }
    Some(d)
}

/// Dense winner-take-all disparity map; the default execution mode.
pub fn compute_disparity_map(
    left: &GrayImage,
    right: &GrayImage,
    p: &MatchParams,
) -> Result<DisparityMap, MatchError> {
    compute_disparity_map_with(left, right, p, ExecMode::default())
}

/// Same as [`compute_disparity_map`] with an explicit execution mode.
/// Rows are evaluated independently, so the output is identical either way.
pub fn compute_disparity_map_with(
    left: &GrayImage,
    right: &GrayImage,
    p: &MatchParams,
    mode: ExecMode,
) -> Result<DisparityMap, MatchError> {
    if left.width != right.width || left.height != right.height {
        return Err(MatchError::DimensionMismatch(
            left.width,
            left.height,
            right.width,
            right.height,
        ));
    }
    p.validate()?;
    let (w, h) = (left.width, left.height);
    let rows: Vec<Vec<Option<u32>>> = map_indexed(h, mode, |v| {
        (0..w).map(|u| match_pixel_unchecked(left, right, u, v, p)).collect()
    });
    Ok(DisparityMap::new(w, h, rows.concat()))
}
