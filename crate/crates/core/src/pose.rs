//! Cylinder pose extraction from a reconstructed cloud.
//!
//! Stages: voxel-density filtering isolates the end-face points, RANSAC
//! fits the face plane, the face points are projected onto the plane and
//! flattened through an orthonormal affine basis, RANSAC fits the rim
//! circle in 2D, and the circle center is lifted back through the stored
//! inverse map. The plane normal gives the axis, sign-fixed against the
//! viewing direction.
//!
//! RANSAC hypothesis samples are drawn up front from a seeded generator,
//! then scored; the result is deterministic for a fixed seed and point
//! order, in both execution modes.


use nalgebra::{Matrix3, Matrix4, Vector2, Vector3, Vector4};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::parallel::{map_indexed, ExecMode};
use crate::reconstruction::PointCloud;

/// Pipeline stage that failed to find the end face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoseStage {
    DensityFilter,
    PlaneFit,
    CircleFit,
}

impl std::fmt::Display for PoseStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PoseStage::DensityFilter => "density-filter",
            PoseStage::PlaneFit => "plane-fit",
            PoseStage::CircleFit => "circle-fit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PoseError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("density filter removed every point")]
    DegenerateFilter,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("no consensus: best inlier fraction {best:.3} below {required:.3}")]
    NoConsensus { best: f64, required: f64 },
    #[error("base points coincide")]
    CoincidentBasePoints,
    #[error("base point is {0:.3e} mm off the plane")]
    PointsOffPlane(f64),
    #[error("point is {0:.3e} mm off the flattening plane")]
    PointOffPlane(f64),
    #[error("end face not found at stage {stage}")]
    FaceNotFound { stage: PoseStage },
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

/// Plane `a x + b y + c z + d = 0` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Plane {
    /// Normalizes the normal to unit length.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, PoseError> {
        let n = (a * a + b * b + c * c).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(PoseError::BadParams("zero plane normal".into()));
        }
        Ok(Self { a: a / n, b: b / n, c: c / n, d: d / n })
    }

    pub fn from_normal_point(normal: &Vector3<f64>, p: &Point3) -> Result<Self, PoseError> {
        Self::new(normal.x, normal.y, normal.z, -normal.dot(&p.coords))
    }

    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }

    /// Signed distance; the normal is unit length by construction.
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.a * p.x + self.b * p.y + self.c * p.z + self.d
    }
}

/// Circle in plane coordinates, millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle2D {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

/// Homogeneous map from world to plane coordinates, stored with its
/// inverse. In plane coordinates the plane is z = 0 and the map restricted
/// to the plane is an isometry.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    forward: Matrix4<f64>,
    inverse: Matrix4<f64>,
}

impl AffineMap {
    pub fn forward(&self) -> &Matrix4<f64> {
        &self.forward
    }

    pub fn inverse(&self) -> &Matrix4<f64> {
        &self.inverse
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let h = self.forward * Vector4::new(p.x, p.y, p.z, 1.0);
        Point3::new(h[0], h[1], h[2])
    }

    pub fn apply_inverse(&self, p: &Point3) -> Point3 {
        let h = self.inverse * Vector4::new(p.x, p.y, p.z, 1.0);
        Point3::new(h[0], h[1], h[2])
    }
}

/// RANSAC controls; the seed makes every fit reproducible.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub max_iterations: usize,
    /// Residual bound for inliers, mm.
    pub inlier_threshold: f64,
    pub min_inlier_fraction: f64,
    /// Fraction of the points used for hypothesis sampling and scoring;
    /// 1.0 uses every point. The refit always uses full-set inliers.
    pub sample_fraction: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self::plane_defaults()
    }
}

impl RansacParams {
    pub fn plane_defaults() -> Self {
        Self {
            max_iterations: 500,
            inlier_threshold: 0.8,
            min_inlier_fraction: 0.5,
            sample_fraction: 1.0,
            seed: 0,
        }
    }

    pub fn circle_defaults() -> Self {
        Self {
            max_iterations: 1000,
            inlier_threshold: 0.5,
            min_inlier_fraction: 0.05,
            sample_fraction: 0.25,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), PoseError> {
        if !(self.inlier_threshold > 0.0) {
            return Err(PoseError::BadParams("inlier_threshold must be > 0".into()));
        }
        for (name, v) in [
            ("min_inlier_fraction", self.min_inlier_fraction),
            ("sample_fraction", self.sample_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(PoseError::BadParams(format!("{name} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Counts and residuals recorded along the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InlierStats {
    pub input_points: usize,
    pub face_points: usize,
    pub plane_inliers: usize,
    pub plane_rms: f64,
    pub circle_inliers: usize,
    pub circle_rms: f64,
    /// Fraction of 24 angular sectors of the rim that contain inliers.
    pub circle_arc_coverage: f64,
    /// Fraction of the plane inliers that fall inside the fitted rim
    /// (within `r + inlier_threshold` of the center).
    pub rim_containment: f64,
    /// Fraction of the cloud points just behind the fitted face that lie
    /// on the cylinder shell implied by the pose. 1.0 when too few points
    /// sit behind the face to judge.
    pub body_support: f64,
    /// Number of cloud points in the slab behind the face that
    /// `body_support` was judged on.
    pub body_slab_points: usize,
}

/// End-face center, axis direction, and rim radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderPose {
    pub center: [f64; 3],
    pub axis: [f64; 3],
    pub radius: f64,
    pub stage_stats: InlierStats,
}

impl CylinderPose {
    pub fn center_point(&self) -> Point3 {
        Point3::new(self.center[0], self.center[1], self.center[2])
    }

    pub fn axis_vector(&self) -> Vector3<f64> {
        Vector3::new(self.axis[0], self.axis[1], self.axis[2])
    }
}

/// Full parameter set of [`estimate_pose`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseConfig {
    pub density_filter_enabled: bool,
    /// Voxel edge length, mm.
    pub voxel_size: f64,
    /// Quantile of nonempty-voxel occupancies kept by the filter.
    pub density_quantile: f64,
    pub plane: RansacParams,
    pub circle: RansacParams,
    /// Minimum fraction of the rim that the circle inliers must cover,
    /// measured as occupied bins out of 24 angular sectors around the
    /// fitted center. A genuine end face fills the whole rim; a circle
    /// hallucinated inside a stray band of body points only touches it
    /// along short arcs. 0 disables the check.
    pub min_arc_coverage: f64,
    /// Minimum fraction of the plane inliers that must fall inside the
    /// fitted rim (within `r + inlier_threshold` of the center). A genuine
    /// end face is wholly contained by its own rim; a circle hallucinated
    /// inside an elongated band of body points is not. 0 disables the
    /// check.
    pub min_rim_containment: f64,
    /// Minimum fraction of the cloud points just behind the fitted face
    /// (axial depth in `(2 * plane threshold, 3r]`) that must lie on the
    /// implied cylinder shell (`|distance to axis - r| <= 2 * circle
    /// threshold`). A genuine pose has the sleeve body behind the face; a
    /// plane hallucinated on a tangent band of the body does not. The
    /// check is skipped when the slab holds under a fifth of the cloud
    /// (at least 100 points), as near face-on poses the body is hidden
    /// behind the face. 0 disables the check.
    pub min_body_support: f64,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            density_filter_enabled: true,
            voxel_size: 2.0,
            density_quantile: 0.6,
            plane: RansacParams::plane_defaults(),
            circle: RansacParams::circle_defaults(),
            min_arc_coverage: 0.5,
            min_rim_containment: 0.0,
            min_body_support: 0.0,
        }
    }
}

/// Keeps points in voxels whose occupancy reaches the `density_quantile`
/// quantile of nonempty-voxel occupancies. End-face points are the
/// densest part of a disparity cloud, so this isolates them.
pub fn extract_end_face(
    cloud: &PointCloud,
    voxel_size: f64,
    density_quantile: f64,
) -> Result<PointCloud, PoseError> {
    if cloud.is_empty() {
        return Err(PoseError::EmptyCloud);
    }
    if !(voxel_size > 0.0) {
        return Err(PoseError::BadParams("voxel_size must be > 0".into()));
    }
    let q = density_quantile.clamp(0.0, 1.0);

    // Group points by voxel with a sort over packed 21-bit-per-axis keys;
    // this beats hashing every point twice and keeps the filter's own cost
    // well below the RANSAC work it saves downstream.
    let key = |p: &Point3| -> u64 {
        let cell = |v: f64| ((v / voxel_size).floor() as i64 + (1 << 20)) as u64 & 0x1f_ffff;
        (cell(p.x) << 42) | (cell(p.y) << 21) | cell(p.z)
    };
    let mut keyed: Vec<(u64, u32)> =
        cloud.points.iter().enumerate().map(|(i, p)| (key(p), i as u32)).collect();
    keyed.sort_unstable();

    let mut counts: Vec<u32> = Vec::new();
    let mut run = 0u32;
    for (i, &(k, _)) in keyed.iter().enumerate() {
        run += 1;
        if i + 1 == keyed.len() || keyed[i + 1].0 != k {
            counts.push(run);
            run = 0;
        }
    }
    let mut sorted_counts = counts.clone();
    sorted_counts.sort_unstable();
    let threshold = sorted_counts
        [((q * (sorted_counts.len() - 1) as f64).floor() as usize).min(sorted_counts.len() - 1)];

    let mut keep = vec![false; cloud.points.len()];
    let mut start = 0usize;
    for &count in &counts {
        let end = start + count as usize;
        if count >= threshold {
            for &(_, i) in &keyed[start..end] {
                keep[i as usize] = true;
            }
        }
        start = end;
    }

    let mut points = Vec::new();
    let mut pixels = cloud.source_pixels.as_ref().map(|_| Vec::new());
    for (i, p) in cloud.points.iter().enumerate() {
        if keep[i] {
            points.push(*p);
            if let (Some(out), Some(src)) = (pixels.as_mut(), cloud.source_pixels.as_ref()) {
                out.push(src[i]);
            }
        }
    }
    if points.is_empty() {
        return Err(PoseError::DegenerateFilter);
    }
    Ok(PointCloud { points, source_pixels: pixels })
}

/// Plane fit with its final full-set inliers.
#[derive(Debug, Clone)]
pub struct PlaneFit {
    pub plane: Plane,
    pub inliers: Vec<usize>,
    pub rms: f64,
}

fn scoring_subset(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..n).collect();
    }
    let k = ((n as f64 * fraction).round() as usize).clamp(3.min(n), n);
    let mut idx: Vec<usize> = sample_indices(rng, n, k).into_iter().collect();
    idx.sort_unstable();
    idx
}

/// Best-consensus plane with a least-squares refit (centroid + smallest
/// covariance eigenvector) on the final inlier set.
pub fn fit_plane_ransac(cloud: &PointCloud, p: &RansacParams) -> Result<Plane, PoseError> {
    fit_plane_ransac_detailed(cloud, p, ExecMode::default()).map(|f| f.plane)
}

pub fn fit_plane_ransac_detailed(
    cloud: &PointCloud,
    p: &RansacParams,
    mode: ExecMode,
) -> Result<PlaneFit, PoseError> {
    p.validate()?;
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(PoseError::TooFewPoints { needed: 3, got: pts.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let pool = scoring_subset(pts.len(), p.sample_fraction, &mut rng);

    // Draw every hypothesis sample up front so scoring order cannot
    // change the outcome.
    let hypotheses: Vec<[usize; 3]> = (0..p.max_iterations)
        .map(|_| {
            let s = sample_indices(&mut rng, pool.len(), 3.min(pool.len()));
            [pool[s.index(0)], pool[s.index(1 % s.len())], pool[s.index(2 % s.len())]]
        })
        .collect();

    let scores: Vec<Option<(usize, [f64; 4])>> = map_indexed(hypotheses.len(), mode, |h| {
        let [i, j, k] = hypotheses[h];
        let ab = pts[j] - pts[i];
        let ac = pts[k] - pts[i];
        let normal = ab.cross(&ac);
        if normal.norm() < 1e-9 {
            return None; // collinear sample, rejected
        }
        let plane = Plane::from_normal_point(&normal, &pts[i]).ok()?;
        let count = pool
            .iter()
            .filter(|&&idx| plane.signed_distance(&pts[idx]).abs() <= p.inlier_threshold)
            .count();
        Some((count, [plane.a, plane.b, plane.c, plane.d]))
    });

    let mut best: Option<(usize, Plane)> = None;
    for s in scores.into_iter().flatten() {
        let (count, [a, b, c, d]) = s;
        if best.as_ref().is_none_or(|(bc, _)| count > *bc) {
            best = Some((count, Plane { a, b, c, d }));
        }
    }
    let (best_count, plane) =
        best.ok_or(PoseError::TooFewPoints { needed: 3, got: pts.len() })?;
    let fraction = best_count as f64 / pool.len() as f64;
    if fraction < p.min_inlier_fraction {
        return Err(PoseError::NoConsensus { best: fraction, required: p.min_inlier_fraction });
    }

    // Refit on full-set inliers of the consensus plane.
    let inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| plane.signed_distance(&pts[i]).abs() <= p.inlier_threshold)
        .collect();
    let refined = least_squares_plane(pts, &inliers).unwrap_or(plane);
    let final_inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| refined.signed_distance(&pts[i]).abs() <= p.inlier_threshold)
        .collect();
    let rms = if final_inliers.is_empty() {
        0.0
    } else {
        (final_inliers
            .iter()
            .map(|&i| refined.signed_distance(&pts[i]).powi(2))
            .sum::<f64>()
            / final_inliers.len() as f64)
            .sqrt()
    };
    Ok(PlaneFit { plane: refined, inliers: final_inliers, rms })
}

fn least_squares_plane(pts: &[Point3], idx: &[usize]) -> Option<Plane> {
    if idx.len() < 3 {
        return None;
    }
    let n = idx.len() as f64;
    let centroid = idx.iter().fold(Vector3::zeros(), |acc, &i| acc + pts[i].coords) / n;
    let mut cov = Matrix3::zeros();
    for &i in idx {
        let d = pts[i].coords - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut min_k = 0;
    for k in 1..3 {
        if eig.eigenvalues[k] < eig.eigenvalues[min_k] {
            min_k = k;
        }
    }
    let normal = eig.eigenvectors.column(min_k).into_owned();
    Plane::from_normal_point(&normal, &Point3::from(centroid)).ok()
}

/// Orthogonal projection onto the plane: `p - t N` with `t` the signed
/// distance.
pub fn project_to_plane(p: &Point3, plane: &Plane) -> Point3 {
    let t = plane.signed_distance(p);
    Point3::from(p.coords - t * plane.normal())
}

/// Builds the plane coordinate system from two on-plane points: basis
/// `uAB = (B - A)/|B - A|`, `uN` = plane normal, `uV = uN x uAB`. `A`
/// maps to the origin, `A + uAB`, `A + uV`, `A + uN` map to the unit
/// points.
pub fn plane_basis(plane: &Plane, a: &Point3, b: &Point3) -> Result<AffineMap, PoseError> {
    for p in [a, b] {
        let off = plane.signed_distance(p).abs();
        if off > 1e-9 {
            return Err(PoseError::PointsOffPlane(off));
        }
    }
    let ab = b - a;
    if ab.norm() < 1e-9 {
        return Err(PoseError::CoincidentBasePoints);
    }
    let u_ab = ab.normalize();
    let u_n = plane.normal();
    let u_v = u_n.cross(&u_ab);

    let mut forward = Matrix4::identity();
    for (row, axis) in [u_ab, u_v, u_n].iter().enumerate() {
        forward[(row, 0)] = axis.x;
        forward[(row, 1)] = axis.y;
        forward[(row, 2)] = axis.z;
        forward[(row, 3)] = -axis.dot(&a.coords);
    }
    let mut inverse = Matrix4::identity();
    for (col, axis) in [u_ab, u_v, u_n].iter().enumerate() {
        inverse[(0, col)] = axis.x;
        inverse[(1, col)] = axis.y;
        inverse[(2, col)] = axis.z;
    }
    inverse[(0, 3)] = a.x;
    inverse[(1, 3)] = a.y;
    inverse[(2, 3)] = a.z;
    Ok(AffineMap { forward, inverse })
}

/// Applies the map and drops the third coordinate, which must vanish for
/// on-plane points.
pub fn flatten(points: &[Point3], m: &AffineMap) -> Result<Vec<Vector2<f64>>, PoseError> {
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let q = m.apply(p);
        if q.z.abs() > 1e-6 {
            return Err(PoseError::PointOffPlane(q.z.abs()));
        }
        out.push(Vector2::new(q.x, q.y));
    }
    Ok(out)
}

/// Lifts plane coordinates back to the world frame.
pub fn unflatten(xy: &Vector2<f64>, m: &AffineMap) -> Point3 {
    m.apply_inverse(&Point3::new(xy.x, xy.y, 0.0))
}

/// Circle fit with its final full-set inliers.
#[derive(Debug, Clone)]
pub struct CircleFit {
    pub circle: Circle2D,
    pub inliers: Vec<usize>,
    pub rms: f64,
}

fn circumcircle(a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>) -> Option<Circle2D> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d.abs() < 1e-12 {
        return None; // collinear
    }
    let a2 = a.norm_squared();
    let b2 = b.norm_squared();
    let c2 = c.norm_squared();
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    let r = ((a.x - ux).powi(2) + (a.y - uy).powi(2)).sqrt();
    Some(Circle2D { cx: ux, cy: uy, r })
}

/// Algebraic least-squares circle through the given indices.
fn least_squares_circle(pts: &[Vector2<f64>], idx: &[usize]) -> Option<Circle2D> {
    if idx.len() < 3 {
        return None;
    }
    // Solve [2x 2y 1] [cx cy k]^T = x^2 + y^2 with k = r^2 - cx^2 - cy^2.
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &i in idx {
        let p = pts[i];
        let row = Vector3::new(2.0 * p.x, 2.0 * p.y, 1.0);
        ata += row * row.transpose();
        atb += row * p.norm_squared();
    }
    let sol = ata.lu().solve(&atb)?;
    let r2 = sol[2] + sol[0] * sol[0] + sol[1] * sol[1];
    if r2 <= 0.0 {
        return None;
    }
    Some(Circle2D { cx: sol[0], cy: sol[1], r: r2.sqrt() })
}

/// Best-consensus circle from three-point circumcircle hypotheses drawn
/// from a `sample_fraction` subsample, least-squares refit on the final
/// inlier set.
pub fn fit_circle_ransac(pts: &[Vector2<f64>], p: &RansacParams) -> Result<Circle2D, PoseError> {
    fit_circle_ransac_detailed(pts, p, ExecMode::default()).map(|f| f.circle)
}

pub fn fit_circle_ransac_detailed(
    pts: &[Vector2<f64>],
    p: &RansacParams,
    mode: ExecMode,
) -> Result<CircleFit, PoseError> {
    p.validate()?;
    if pts.len() < 3 {
        return Err(PoseError::TooFewPoints { needed: 3, got: pts.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let pool = scoring_subset(pts.len(), p.sample_fraction, &mut rng);

    let hypotheses: Vec<[usize; 3]> = (0..p.max_iterations)
        .map(|_| {
            let s = sample_indices(&mut rng, pool.len(), 3.min(pool.len()));
            [pool[s.index(0)], pool[s.index(1 % s.len())], pool[s.index(2 % s.len())]]
        })
        .collect();

    let scores: Vec<Option<(usize, Circle2D)>> = map_indexed(hypotheses.len(), mode, |h| {
        let [i, j, k] = hypotheses[h];
        let circle = circumcircle(&pts[i], &pts[j], &pts[k])?;
        let count = pool
            .iter()
            .filter(|&&idx| ((pts[idx] - Vector2::new(circle.cx, circle.cy)).norm() - circle.r).abs() <= p.inlier_threshold)
            .count();
        Some((count, circle))
    });

    let mut best: Option<(usize, Circle2D)> = None;
    for s in scores.into_iter().flatten() {
        if best.as_ref().is_none_or(|(bc, _)| s.0 > *bc) {
            best = Some(s);
        }
    }
    let Some((best_count, circle)) = best else {
        // Every sampled triple was collinear.
        return Err(PoseError::NoConsensus { best: 0.0, required: p.min_inlier_fraction });
    };
    let fraction = best_count as f64 / pool.len() as f64;
    if fraction < p.min_inlier_fraction {
        return Err(PoseError::NoConsensus { best: fraction, required: p.min_inlier_fraction });
    }

    let residual = |c: &Circle2D, q: &Vector2<f64>| {
        ((q - Vector2::new(c.cx, c.cy)).norm() - c.r).abs()
    };
    // Iterated refit: each pass pulls the circle toward the symmetric
    // band of the data, washing out the random offset of the winning
    // three-point hypothesis.
    let mut refined = circle;
    for _ in 0..3 {
        let inliers: Vec<usize> = (0..pts.len())
            .filter(|&i| residual(&refined, &pts[i]) <= p.inlier_threshold)
            .collect();
        match least_squares_circle(pts, &inliers) {
            Some(c) => refined = c,
            None => break,
        }
    }
    let final_inliers: Vec<usize> =
        (0..pts.len()).filter(|&i| residual(&refined, &pts[i]) <= p.inlier_threshold).collect();
    let rms = if final_inliers.is_empty() {
        0.0
    } else {
        (final_inliers.iter().map(|&i| residual(&refined, &pts[i]).powi(2)).sum::<f64>()
            / final_inliers.len() as f64)
            .sqrt()
    };
    Ok(CircleFit { circle: refined, inliers: final_inliers, rms })
}

/// Fraction of 24 angular sectors around the circle center that contain
/// at least one inlier.
pub fn arc_coverage(pts: &[Vector2<f64>], inliers: &[usize], circle: &Circle2D) -> f64 {
    const BINS: usize = 24;
    let mut occupied = [false; BINS];
    for &i in inliers {
        let d = pts[i] - Vector2::new(circle.cx, circle.cy);
        if d.norm() == 0.0 {
            continue;
        }
        let frac = (d.y.atan2(d.x) / std::f64::consts::TAU).rem_euclid(1.0);
        occupied[((frac * BINS as f64) as usize).min(BINS - 1)] = true;
    }
    occupied.iter().filter(|&&b| b).count() as f64 / BINS as f64
}

/// Most separated pair of the given points; exact pairwise search.
fn max_separation_pair(pts: &[Point3], idx: &[usize], mode: ExecMode) -> (usize, usize) {
    debug_assert!(idx.len() >= 2);
    let per_i: Vec<(f64, usize, usize)> = map_indexed(idx.len(), mode, |a| {
        let pa = pts[idx[a]];
        let mut best = (f64::NEG_INFINITY, idx[a], idx[a]);
        for &jb in &idx[a + 1..] {
            let d2 = (pts[jb] - pa).norm_squared();
            if d2 > best.0 {
                best = (d2, idx[a], jb);
            }
        }
        best
    });
    let mut best = per_i[0];
    for cand in per_i.into_iter().skip(1) {
        if cand.0 > best.0 {
            best = cand;
        }
    }
    (best.1, best.2)
}

/// Runs the full extraction: density filter, plane RANSAC, projection and
/// flattening, circle RANSAC, and the lift of the 2D center back to 3D.
/// The axis is the plane normal, flipped to point against
/// `view_direction`.
pub fn estimate_pose(
    cloud: &PointCloud,
    cfg: &PoseConfig,
    view_direction: &Vector3<f64>,
) -> Result<CylinderPose, PoseError> {
    estimate_pose_with(cloud, cfg, view_direction, ExecMode::default())
}

pub fn estimate_pose_with(
    cloud: &PointCloud,
    cfg: &PoseConfig,
    view_direction: &Vector3<f64>,
    mode: ExecMode,
) -> Result<CylinderPose, PoseError> {
    if cloud.is_empty() {
        return Err(PoseError::EmptyCloud);
    }
    let face = if cfg.density_filter_enabled {
        match extract_end_face(cloud, cfg.voxel_size, cfg.density_quantile) {
            Ok(f) => f,
            // Caller-facing contract: an over-aggressive filter falls back
            // to the unfiltered cloud rather than failing the frame.
            Err(PoseError::DegenerateFilter) => cloud.clone(),
            Err(e) => return Err(e),
        }
    } else {
        cloud.clone()
    };

    let plane_fit = match fit_plane_ransac_detailed(&face, &cfg.plane, mode) {
        Ok(f) => f,
        Err(PoseError::NoConsensus { .. }) | Err(PoseError::TooFewPoints { .. }) => {
            return Err(PoseError::FaceNotFound { stage: PoseStage::PlaneFit })
        }
        Err(e) => return Err(e),
    };
    if plane_fit.inliers.len() < 2 {
        return Err(PoseError::FaceNotFound { stage: PoseStage::PlaneFit });
    }
    let plane = plane_fit.plane;

    let (ia, ib) = max_separation_pair(&face.points, &plane_fit.inliers, mode);
    let a = project_to_plane(&face.points[ia], &plane);
    let b = project_to_plane(&face.points[ib], &plane);
    let basis = plane_basis(&plane, &a, &b)?;

    let projected: Vec<Point3> =
        face.points.iter().map(|p| project_to_plane(p, &plane)).collect();
    let flat = flatten(&projected, &basis)?;

    let circle_fit = match fit_circle_ransac_detailed(&flat, &cfg.circle, mode) {
        Ok(f) => f,
        Err(PoseError::NoConsensus { .. }) | Err(PoseError::TooFewPoints { .. }) => {
            return Err(PoseError::FaceNotFound { stage: PoseStage::CircleFit })
        }
        Err(e) => return Err(e),
    };
    let circle = circle_fit.circle;

    for (name, v) in [
        ("min_arc_coverage", cfg.min_arc_coverage),
        ("min_rim_containment", cfg.min_rim_containment),
        ("min_body_support", cfg.min_body_support),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(PoseError::BadParams(format!("{name} must be in [0, 1]")));
        }
    }
    let coverage = arc_coverage(&flat, &circle_fit.inliers, &circle);
    if coverage < cfg.min_arc_coverage {
        return Err(PoseError::FaceNotFound { stage: PoseStage::CircleFit });
    }
    // A genuine end face lies entirely inside its own rim; a circle fitted
    // into a band of body points leaves much of the band outside it.
    let rim = circle.r + cfg.circle.inlier_threshold;
    let contained = plane_fit
        .inliers
        .iter()
        .filter(|&&i| (flat[i] - Vector2::new(circle.cx, circle.cy)).norm() <= rim)
        .count();
    let rim_containment = contained as f64 / plane_fit.inliers.len() as f64;
    if rim_containment < cfg.min_rim_containment {
        return Err(PoseError::FaceNotFound { stage: PoseStage::CircleFit });
    }

    let center = unflatten(&Vector2::new(circle.cx, circle.cy), &basis);
    let mut axis = plane.normal();
    if axis.dot(view_direction) > 0.0 {
        axis = -axis;
    }

    // Body support: the sleeve body must sit behind the face as a shell
    // of the fitted radius around the fitted axis. Judged on the raw
    // input cloud so the density filter cannot hide the evidence.
    // Judge only when the slab holds a meaningful share of the cloud:
    // near face-on poses the visible body sliver is tiny and its shape
    // says nothing, while a plane hallucinated on the body at steep tilt
    // always leaves a large slab of off-shell points behind itself.
    let min_slab = (cloud.len() / 5).max(100);
    let axial_min = 2.0 * cfg.plane.inlier_threshold;
    let axial_max = 3.0 * circle.r;
    let radial_tol = 2.0 * cfg.circle.inlier_threshold;
    let (mut slab, mut on_shell) = (0usize, 0usize);
    for p in &cloud.points {
        let d = p - center;
        let axial = -d.dot(&axis);
        if axial <= axial_min || axial > axial_max {
            continue;
        }
        slab += 1;
        let radial = (d + axial * axis).norm();
        if (radial - circle.r).abs() <= radial_tol {
            on_shell += 1;
        }
    }
    let body_support = if slab < min_slab { 1.0 } else { on_shell as f64 / slab as f64 };
    if body_support < cfg.min_body_support {
        return Err(PoseError::FaceNotFound { stage: PoseStage::CircleFit });
    }

    Ok(CylinderPose {
        center: [center.x, center.y, center.z],
        axis: [axis.x, axis.y, axis.z],
        radius: circle.r,
        stage_stats: InlierStats {
            input_points: cloud.len(),
            face_points: face.len(),
            plane_inliers: plane_fit.inliers.len(),
            plane_rms: plane_fit.rms,
            circle_inliers: circle_fit.inliers.len(),
            circle_rms: circle_fit.rms,
            circle_arc_coverage: coverage,
            rim_containment,
            body_support,
            body_slab_points: slab,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn plane_normal_is_normalized() {
        let p = Plane::new(0.0, 0.0, 2.0, -10.0).unwrap();
        assert_relative_eq!(p.c, 1.0);
        assert_relative_eq!(p.d, -5.0);
        assert!((p.normal().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extract_single_point() {
        let cloud = PointCloud::from_points(vec![Point3::new(1.0, 2.0, 3.0)]);
        let out = extract_end_face(&cloud, 2.0, 0.6).unwrap();
        assert_eq!(out.points, cloud.points);
    }

    #[test]
    fn extract_empty_cloud_rejected() {
        assert_eq!(
            extract_end_face(&PointCloud::default(), 2.0, 0.6),
            Err(PoseError::EmptyCloud)
        );
    }

    #[test]
    fn extract_uniform_lattice_keeps_everything() {
        // Exactly one point per voxel: the quantile gate passes all of them.
        let mut pts = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                for z in 0..10 {
                    pts.push(Point3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5));
                }
            }
        }
        let cloud = PointCloud::from_points(pts);
        let out = extract_end_face(&cloud, 1.0, 0.6).unwrap();
        assert_eq!(out.len(), cloud.len());
    }

    #[test]
    fn extract_separates_dense_disk_from_sparse_tube() {
        // 7000 points in a 40 mm disk plus 5000 spread over a 200 mm tube.
        let mut r = rng(21);
        let mut pts = Vec::new();
        for _ in 0..7000 {
            let rad = 20.0 * r.random_range(0.0f64..1.0).sqrt();
            let th = r.random_range(0.0..std::f64::consts::TAU);
            pts.push(Point3::new(rad * th.cos(), rad * th.sin(), 0.0));
        }
        let disk_count = pts.len();
        for _ in 0..5000 {
            let th = r.random_range(0.0..std::f64::consts::TAU);
            let z = r.random_range(0.0..200.0);
            pts.push(Point3::new(20.0 * th.cos(), 20.0 * th.sin(), 5.0 + z));
        }
        let cloud = PointCloud::from_points(pts);
        let out = extract_end_face(&cloud, 8.0, 0.95).unwrap();
        let kept_disk = out.points.iter().filter(|p| p.z == 0.0).count();
        let kept_tube = out.len() - kept_disk;
        assert!(kept_disk as f64 >= 0.9 * disk_count as f64, "kept {kept_disk} disk points");
        assert!(kept_tube as f64 <= 0.1 * 5000.0, "kept {kept_tube} tube points");
    }

    #[test]
    fn plane_ransac_exact_coplanar() {
        let mut r = rng(5);
        let pts: Vec<Point3> = (0..100)
            .map(|_| Point3::new(r.random_range(-10.0..10.0), r.random_range(-10.0..10.0), 5.0))
            .collect();
        let plane =
            fit_plane_ransac(&PointCloud::from_points(pts), &RansacParams::plane_defaults())
                .unwrap();
        assert!(plane.c.abs() > 1.0 - 1e-9);
        assert_relative_eq!(plane.d / -plane.c, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn plane_ransac_with_outliers() {
        let mut r = rng(6);
        let truth_normal = Vector3::new(1.0, 1.0, 1.0).normalize();
        let mut pts = Vec::new();
        for _ in 0..800 {
            // Points on x + y + z = 10.
            let x = r.random_range(-10.0f64..10.0);
            let y = r.random_range(-10.0f64..10.0);
            pts.push(Point3::new(x, y, 10.0 - x - y));
        }
        for _ in 0..200 {
            pts.push(Point3::new(
                r.random_range(-30.0..30.0),
                r.random_range(-30.0..30.0),
                r.random_range(-30.0..30.0),
            ));
        }
        let fit = fit_plane_ransac_detailed(
            &PointCloud::from_points(pts),
            &RansacParams { inlier_threshold: 0.3, ..RansacParams::plane_defaults() },
            ExecMode::default(),
        )
        .unwrap();
        let angle = fit.plane.normal().dot(&truth_normal).abs().min(1.0).acos().to_degrees();
        assert!(angle < 0.5, "normal off by {angle} deg");
        let d_truth = 10.0 / 3.0f64.sqrt();
        assert!((fit.plane.d.abs() - d_truth).abs() < 0.1, "d = {}", fit.plane.d);
    }

    #[test]
    fn plane_ransac_too_few_points() {
        let cloud = PointCloud::from_points(vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)]);
        assert_eq!(
            fit_plane_ransac(&cloud, &RansacParams::plane_defaults()),
            Err(PoseError::TooFewPoints { needed: 3, got: 2 })
        );
    }

    #[test]
    fn projection_onto_plane() {
        let plane = Plane::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let p = project_to_plane(&Point3::new(1.0, 2.0, 3.0), &plane);
        assert_relative_eq!(p.coords, Vector3::new(1.0, 2.0, 0.0), epsilon = 1e-12);
        // Idempotence.
        assert_eq!(project_to_plane(&p, &plane), p);
    }

    #[test]
    fn projection_properties_random() {
        let mut r = rng(7);
        for _ in 0..50 {
            let plane = Plane::new(
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
                r.random_range(0.1..1.0),
                r.random_range(-20.0..20.0),
            )
            .unwrap();
            let p = Point3::new(
                r.random_range(-50.0..50.0),
                r.random_range(-50.0..50.0),
                r.random_range(-50.0..50.0),
            );
            let q = project_to_plane(&p, &plane);
            assert!(plane.signed_distance(&q).abs() < 1e-9);
            let diff = p - q;
            if diff.norm() > 1e-9 {
                let cos = diff.normalize().dot(&plane.normal()).abs();
                assert!(cos > 1.0 - 1e-9, "offset not parallel to normal");
            }
            // Distance-minimizing against random on-plane samples.
            for _ in 0..20 {
                let other = project_to_plane(
                    &Point3::new(
                        r.random_range(-50.0..50.0),
                        r.random_range(-50.0..50.0),
                        r.random_range(-50.0..50.0),
                    ),
                    &plane,
                );
                assert!((p - other).norm() + 1e-12 >= (p - q).norm());
            }
        }
    }

    #[test]
    fn basis_canonical_plane() {
        let plane = Plane::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let m = plane_basis(&plane, &Point3::origin(), &Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(m.apply(&Point3::origin()).coords, Vector3::zeros(), epsilon = 1e-12);
        let u = m.apply(&Point3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(u.coords, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
        let q = m.apply(&Point3::new(3.0, -2.0, 0.0));
        assert!(q.z.abs() < 1e-12);
        // Forward and inverse compose to the identity.
        let prod = m.forward() * m.inverse();
        assert!((prod - Matrix4::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn basis_is_in_plane_isometry() {
        let plane = Plane::new(0.3, -0.2, 0.9, 4.0).unwrap();
        let mut r = rng(8);
        let on_plane = |r: &mut ChaCha8Rng| {
            project_to_plane(
                &Point3::new(
                    r.random_range(-30.0..30.0),
                    r.random_range(-30.0..30.0),
                    r.random_range(-30.0..30.0),
                ),
                &plane,
            )
        };
        let a = on_plane(&mut r);
        let b = on_plane(&mut r);
        let m = plane_basis(&plane, &a, &b).unwrap();
        let pts: Vec<Point3> = (0..50).map(|_| on_plane(&mut r)).collect();
        let mapped: Vec<Point3> = pts.iter().map(|p| m.apply(p)).collect();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d0 = (pts[i] - pts[j]).norm();
                let d1 = (mapped[i] - mapped[j]).norm();
                assert!((d0 - d1).abs() < 1e-9, "distance changed: {d0} vs {d1}");
            }
        }
    }

    #[test]
    fn basis_rejects_coincident_points() {
        let plane = Plane::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let a = Point3::new(1.0, 1.0, 0.0);
        assert_eq!(plane_basis(&plane, &a, &a), Err(PoseError::CoincidentBasePoints));
    }

    #[test]
    fn basis_rejects_off_plane_points() {
        let plane = Plane::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let res = plane_basis(&plane, &Point3::new(0.0, 0.0, 0.5), &Point3::new(1.0, 0.0, 0.0));
        assert!(matches!(res, Err(PoseError::PointsOffPlane(_))));
    }

    #[test]
    fn flatten_roundtrip() {
        let plane = Plane::new(0.2, 0.4, 0.8, -7.0).unwrap();
        let mut r = rng(9);
        let a = project_to_plane(&Point3::new(1.0, 2.0, 3.0), &plane);
        let b = project_to_plane(&Point3::new(-4.0, 0.0, 6.0), &plane);
        let m = plane_basis(&plane, &a, &b).unwrap();
        assert_relative_eq!(flatten(&[a], &m).unwrap()[0], Vector2::zeros(), epsilon = 1e-9);
        let pts: Vec<Point3> = (0..50)
            .map(|_| {
                project_to_plane(
                    &Point3::new(
                        r.random_range(-30.0..30.0),
                        r.random_range(-30.0..30.0),
                        r.random_range(-30.0..30.0),
                    ),
                    &plane,
                )
            })
            .collect();
        let flat = flatten(&pts, &m).unwrap();
        for (p, xy) in pts.iter().zip(&flat) {
            let back = unflatten(xy, &m);
            assert!((back - p).norm() < 1e-9);
        }
    }

    #[test]
    fn flatten_rejects_off_plane() {
        let plane = Plane::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let m = plane_basis(&plane, &Point3::origin(), &Point3::new(1.0, 0.0, 0.0)).unwrap();
        let res = flatten(&[Point3::new(0.0, 0.0, 0.1)], &m);
        assert!(matches!(res, Err(PoseError::PointOffPlane(_))));
    }

    #[test]
    fn circle_three_exact_points() {
        let pts = vec![
            Vector2::new(1.0, 0.0),
            Vector2::new(0.0, 1.0),
            Vector2::new(-1.0, 0.0),
        ];
        let fit = fit_circle_ransac_detailed(
            &pts,
            &RansacParams { sample_fraction: 1.0, min_inlier_fraction: 1.0, ..RansacParams::circle_defaults() },
            ExecMode::default(),
        )
        .unwrap();
        assert_relative_eq!(fit.circle.cx, 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.circle.cy, 0.0, epsilon = 1e-12);
        assert_relative_eq!(fit.circle.r, 1.0, epsilon = 1e-12);
        assert_eq!(fit.rms, 0.0);
    }

    #[test]
    fn circle_ransac_noisy_ring_with_outliers() {
        let mut r = rng(10);
        let mut pts = Vec::new();
        for _ in 0..500 {
            let th = r.random_range(0.0..std::f64::consts::TAU);
            let rad = 20.0 + 0.1 * box_muller(&mut r);
            pts.push(Vector2::new(3.0 + rad * th.cos(), -2.0 + rad * th.sin()));
        }
        for _ in 0..100 {
            pts.push(Vector2::new(r.random_range(-15.0..20.0), r.random_range(-20.0..15.0)));
        }
        let fit = fit_circle_ransac(&pts, &RansacParams::circle_defaults()).unwrap();
        assert!((fit.cx - 3.0).abs() < 0.1 && (fit.cy + 2.0).abs() < 0.1);
        assert!((fit.r - 20.0).abs() < 0.2);
    }

    fn box_muller(r: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = r.random_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = r.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    #[test]
    fn circle_collinear_points_no_consensus() {
        let pts: Vec<Vector2<f64>> =
            (0..50).map(|i| Vector2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(
            fit_circle_ransac(&pts, &RansacParams::circle_defaults()),
            Err(PoseError::NoConsensus { .. })
        ));
    }

    fn disk_cloud(center: Point3, normal: Vector3<f64>, r_in: f64, r_out: f64, n: usize, seed: u64) -> PointCloud {
        let mut r = rng(seed);
        let nz = normal.normalize();
        let ref_axis =
            if nz.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = ref_axis.cross(&nz).normalize();
        let e2 = nz.cross(&e1);
        let pts = (0..n)
            .map(|_| {
                let rad = (r_in * r_in
                    + r.random_range(0.0f64..1.0) * (r_out * r_out - r_in * r_in))
                    .sqrt();
                let th = r.random_range(0.0..std::f64::consts::TAU);
                Point3::from(center.coords + e1 * (rad * th.cos()) + e2 * (rad * th.sin()))
            })
            .collect();
        PointCloud::from_points(pts)
    }

    #[test]
    fn estimate_pose_face_on_annulus() {
        let center = Point3::new(5.0, -3.0, 500.0);
        let cloud = disk_cloud(center, Vector3::new(0.0, 0.0, -1.0), 10.0, 20.0, 6000, 11);
        let pose = estimate_pose(&cloud, &PoseConfig::default(), &Vector3::z()).unwrap();
        let axis = pose.axis_vector();
        assert!(axis.dot(&Vector3::z()) <= 0.0);
        let angle = axis.dot(&Vector3::new(0.0, 0.0, -1.0)).abs().min(1.0).acos().to_degrees();
        assert!(angle < 1e-3, "axis off by {angle} deg");
        // On a filled annulus the consensus circle hugs the outer rim but
        // its exact offset depends on which hypothesis wins; any interior
        // band is a fixed point of the refit, so millimeter-order offset
        // is inherent to the method (well inside the mm-scale pose budget).
        let off = (pose.center_point() - center).norm();
        assert!(off < 3.0, "center off by {off} mm");
        // The consensus band can settle anywhere inside the annulus (all
        // interior bands are unclipped), so the radius is only bounded by
        // the annulus itself.
        assert!(pose.radius > 10.0 && pose.radius < 20.5, "radius {}", pose.radius);
    }

    #[test]
    fn estimate_pose_deterministic() {
        let cloud = disk_cloud(Point3::new(0.0, 0.0, 400.0), Vector3::new(0.2, 0.1, -1.0), 10.0, 20.0, 3000, 12);
        let a = estimate_pose(&cloud, &PoseConfig::default(), &Vector3::z()).unwrap();
        let b = estimate_pose(&cloud, &PoseConfig::default(), &Vector3::z()).unwrap();
        assert_eq!(a.center, b.center);
        assert_eq!(a.axis, b.axis);
        assert_eq!(a.radius, b.radius);
    }

    #[test]
    fn estimate_pose_rigid_invariance() {
        let cloud = disk_cloud(Point3::new(0.0, 0.0, 450.0), Vector3::new(0.0, 0.0, -1.0), 10.0, 20.0, 4000, 13);
        let cfg = PoseConfig::default();
        let base = estimate_pose(&cloud, &cfg, &Vector3::z()).unwrap();

        // Rigid map: small rotation about z plus a translation.
        let ang = 0.05f64;
        let rot = Matrix3::new(
            ang.cos(), -ang.sin(), 0.0,
            ang.sin(), ang.cos(), 0.0,
            0.0, 0.0, 1.0,
        );
        let shift = Vector3::new(10.0, -4.0, 25.0);
        let moved = PointCloud::from_points(
            cloud.points.iter().map(|p| Point3::from(rot * p.coords + shift)).collect(),
        );
        let pose = estimate_pose(&moved, &cfg, &Vector3::z()).unwrap();
        // The voxel grid is not rotation invariant, so the filtered subset
        // and the winning circle hypothesis both shift under the map; the
        // centers agree only to the method's own rim-band uncertainty.
        let expected_center = rot * base.center_point().coords + shift;
        let off = (pose.center_point().coords - expected_center).norm();
        assert!(off < 5.0, "center moved by {off} mm under rigid map");
        let expected_axis = rot * base.axis_vector();
        let angle = pose
            .axis_vector()
            .dot(&expected_axis)
            .abs()
            .min(1.0)
            .acos()
            .to_degrees();
        assert!(angle < 0.05, "axis changed by {angle} deg under rigid map");
    }

    #[test]
    fn estimate_pose_empty_cloud() {
        assert_eq!(
            estimate_pose(&PointCloud::default(), &PoseConfig::default(), &Vector3::z()),
            Err(PoseError::EmptyCloud)
        );
    }

    #[test]
    fn estimate_pose_body_only_cloud_fails() {
        // Lateral-surface points only: no plane reaches 50% consensus.
        let mut r = rng(14);
        let pts: Vec<Point3> = (0..5000)
            .map(|_| {
                let th = r.random_range(-1.5f64..1.5);
                let z = r.random_range(0.0f64..200.0);
                Point3::new(20.0 * th.cos(), 20.0 * th.sin(), 400.0 + z)
            })
            .collect();
        let res = estimate_pose(&PointCloud::from_points(pts), &PoseConfig::default(), &Vector3::z());
        assert!(matches!(res, Err(PoseError::FaceNotFound { .. })), "got {res:?}");
    }
}
