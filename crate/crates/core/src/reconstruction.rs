//! Linear least-squares triangulation over two projection matrices.
//!
//! Each matched pixel pair contributes four linear equations in the world
//! point; the 4x3 system is solved by SVD rather than by inverting the
//! normal equations, which defines the same minimizer with better
//! conditioning.

use nalgebra::{Matrix4x3, Vector4};
use thiserror::Error;

use crate::geometry::{Pixel, Point3, ProjectionMatrix};
use crate::matcher::DisparityMap;
use crate::parallel::{map_indexed, ExecMode};

/// Condition-number bound on C^T C above which the rays are considered
/// parallel or coincident.
const MAX_NORMAL_CONDITION: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum ReconstructionError {
    #[error("degenerate geometry: condition number of C^T C is {0:.3e}")]
    DegenerateGeometry(f64),
}

/// Left/right projection matrices of a calibrated rig.
#[derive(Debug, Clone, Copy)]
pub struct StereoPair {
    pub left: ProjectionMatrix,
    pub right: ProjectionMatrix,
}

/// Reconstructed world-frame points, optionally tagged with the left-image
/// pixel each one came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub source_pixels: Option<Vec<(u32, u32)>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        Self { points, source_pixels: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reconstruction output: the cloud plus the number of pixels skipped for
/// degenerate geometry.
#[derive(Debug, Clone)]
pub struct CloudResult {
    pub cloud: PointCloud,
    pub skipped: usize,
}

/// Stacks the four triangulation equations: two from the left pixel's
/// rows, two from the right's.
pub fn build_system(
    pl: &Pixel,
    pr: &Pixel,
    s: &StereoPair,
) -> (Matrix4x3<f64>, Vector4<f64>) {
    let l1 = s.left.row(0);
    let l2 = s.left.row(1);
    let l3 = s.left.row(2);
    let r1 = s.right.row(0);
    let r2 = s.right.row(1);
    let r3 = s.right.row(2);
    let (ul, vl) = (pl.x, pl.y);
    let (ur, vr) = (pr.x, pr.y);

    let c = Matrix4x3::new(
        ul * l3[0] - l1[0], ul * l3[1] - l1[1], ul * l3[2] - l1[2], //
        vl * l3[0] - l2[0], vl * l3[1] - l2[1], vl * l3[2] - l2[2], //
        ur * r3[0] - r1[0], ur * r3[1] - r1[1], ur * r3[2] - r1[2], //
        vr * r3[0] - r2[0], vr * r3[1] - r2[1], vr * r3[2] - r2[2],
    );
    let d = Vector4::new(
        l1[3] - ul * l3[3],
        l2[3] - vl * l3[3],
        r1[3] - ur * r3[3],
        r2[3] - vr * r3[3],
    );
    (c, d)
}

/// Least-squares solution of `C W = D`; exact pre-image for noise-free
/// consistent pixel pairs.
pub fn triangulate(pl: &Pixel, pr: &Pixel, s: &StereoPair) -> Result<Point3, ReconstructionError> {
    let (c, d) = build_system(pl, pr, s);
    // Thin QR: x = R^-1 Q^T d. Orthogonal, so no condition squaring as in
    // the normal equations, and markedly more accurate per pixel than an
    // iterative SVD.
    let qr = c.qr();
    let r = qr.r();
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for i in 0..3 {
        let v = r[(i, i)].abs();
        dmin = dmin.min(v);
        dmax = dmax.max(v);
    }
    if dmin == 0.0 {
        return Err(ReconstructionError::DegenerateGeometry(f64::INFINITY));
    }
    // cond(C^T C) ~ (dmax / dmin)^2; the R diagonal is a cheap estimate
    // good enough to gate geometrically degenerate pixels.
    let cond = (dmax / dmin).powi(2);
    if cond > MAX_NORMAL_CONDITION {
        return Err(ReconstructionError::DegenerateGeometry(cond));
    }
    let qtd = qr.q().transpose() * d;
    let w = r
        .solve_upper_triangular(&qtd)
        .ok_or(ReconstructionError::DegenerateGeometry(cond))?;
    Ok(Point3::new(w[0], w[1], w[2]))
}

/// Triangulates every valid disparity pixel: left pixel `(u, v)` pairs
/// with right pixel `(u - d, v)`. Degenerate pixels are skipped and
/// counted.
pub fn reconstruct_cloud(dmap: &DisparityMap, s: &StereoPair) -> CloudResult {
    reconstruct_cloud_with(dmap, s, ExecMode::default())
}

/// [`reconstruct_cloud`] with an explicit execution mode; output order is
/// row-major regardless of mode.
pub fn reconstruct_cloud_with(dmap: &DisparityMap, s: &StereoPair, mode: ExecMode) -> CloudResult {
    let w = dmap.width();
    let rows: Vec<(Vec<Point3>, Vec<(u32, u32)>, usize)> = map_indexed(dmap.height(), mode, |v| {
        let mut pts = Vec::new();
        let mut pix = Vec::new();
        let mut skipped = 0usize;
        for u in 0..w {
            if let Some(d) = dmap.get(u, v) {
                let pl = Pixel::new(u as f64, v as f64);
                let pr = Pixel::new(u as f64 - d as f64, v as f64);
                match triangulate(&pl, &pr, s) {
                    Ok(p) => {
                        pts.push(p);
                        pix.push((u as u32, v as u32));
                    }
                    Err(_) => skipped += 1,
                }
            }
        }
        (pts, pix, skipped)
    });
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    let mut skipped = 0;
    for (pts, pix, sk) in rows {
        points.extend(pts);
        pixels.extend(pix);
        skipped += sk;
    }
    CloudResult { cloud: PointCloud { points, source_pixels: Some(pixels) }, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        compose_projection, project, CameraIntrinsics, Extrinsics,
    };
    use nalgebra::{Matrix3, Matrix3x4, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parallel_rig(f: f64, baseline: f64) -> StereoPair {
        let k = CameraIntrinsics::new(f, f, 0.0, 320.0, 240.0).unwrap();
        let left = compose_projection(&k, &Extrinsics::identity());
        let right_e =
            Extrinsics::new(Matrix3::identity(), Vector3::new(-baseline, 0.0, 0.0)).unwrap();
        let right = compose_projection(&k, &right_e);
        StereoPair { left, right }
    }

    fn canonical_pair() -> StereoPair {
        let m = ProjectionMatrix::new(Matrix3x4::new(
            1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        ))
        .unwrap();
        StereoPair { left: m, right: m }
    }

    #[test]
    fn build_system_canonical() {
        let s = canonical_pair();
        let (c, d) = build_system(&Pixel::new(0.0, 0.0), &Pixel::new(0.0, 0.0), &s);
        let expected = Matrix4x3::new(
            -1.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, //
            -1.0, 0.0, 0.0, //
            0.0, -1.0, 0.0,
        );
        assert_eq!(c, expected);
        assert_eq!(d, Vector4::zeros());
    }

    #[test]
    fn build_system_matches_scalar_expansion() {
        let s = parallel_rig(800.0, 60.0);
        let pl = Pixel::new(341.25, 256.5);
        let pr = Pixel::new(245.75, 256.5);
        let (c, d) = build_system(&pl, &pr, &s);
        // Scalar expansion of the joined projection equations.
        let ml = s.left.matrix();
        let mr = s.right.matrix();
        for k in 0..3 {
            assert_eq!(c[(0, k)], pl.x * ml[(2, k)] - ml[(0, k)]);
            assert_eq!(c[(1, k)], pl.y * ml[(2, k)] - ml[(1, k)]);
            assert_eq!(c[(2, k)], pr.x * mr[(2, k)] - mr[(0, k)]);
            assert_eq!(c[(3, k)], pr.y * mr[(2, k)] - mr[(1, k)]);
        }
        assert_eq!(d[0], ml[(0, 3)] - pl.x * ml[(2, 3)]);
        assert_eq!(d[1], ml[(1, 3)] - pl.y * ml[(2, 3)]);
        assert_eq!(d[2], mr[(0, 3)] - pr.x * mr[(2, 3)]);
        assert_eq!(d[3], mr[(1, 3)] - pr.y * mr[(2, 3)]);
    }

    #[test]
    fn build_system_homogeneous_in_matrices() {
        let s = parallel_rig(800.0, 60.0);
        let lambda = 3.5;
        let scaled = StereoPair {
            left: ProjectionMatrix::new(s.left.matrix() * lambda).unwrap(),
            right: ProjectionMatrix::new(s.right.matrix() * lambda).unwrap(),
        };
        let pl = Pixel::new(300.0, 200.0);
        let pr = Pixel::new(280.0, 200.0);
        let (c, d) = build_system(&pl, &pr, &s);
        let (cs, ds) = build_system(&pl, &pr, &scaled);
        assert!((cs - c * lambda).abs().max() < 1e-9);
        assert!((ds - d * lambda).abs().max() < 1e-9);
    }

    #[test]
    fn roundtrip_recovers_point() {
        let s = parallel_rig(800.0, 100.0);
        let p = Point3::new(10.0, -5.0, 500.0);
        let pl = project(&p, &s.left).unwrap();
        let pr = project(&p, &s.right).unwrap();
        let q = triangulate(&pl, &pr, &s).unwrap();
        assert!((q - p).norm() < 1e-6, "got {q:?}");
    }

    #[test]
    fn no_baseline_is_degenerate() {
        let s = canonical_pair();
        let px = Pixel::new(0.2, 0.3);
        assert!(matches!(
            triangulate(&px, &px, &s),
            Err(ReconstructionError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn pixel_noise_sensitivity_scales_with_depth_squared() {
        // Finite-difference sensitivity: dZ/dd = -Z^2 / (f B), so a 0.5 px
        // perturbation at 500 mm on a 100 mm baseline moves depth by about
        // 0.5 * Z^2 / (f B) = 1.5625 mm.
        let f = 800.0;
        let b = 100.0;
        let s = parallel_rig(f, b);
        let p = Point3::new(0.0, 0.0, 500.0);
        let pl = project(&p, &s.left).unwrap();
        let pr = project(&p, &s.right).unwrap();
        let shifted = Pixel::new(pr.x - 0.5, pr.y);
        let q = triangulate(&pl, &shifted, &s).unwrap();
        let bound = 0.5 * 500.0f64.powi(2) / (f * b);
        let dz = (q.z - 500.0).abs();
        assert!(dz > 0.5 * bound && dz < 2.0 * bound, "dz = {dz}, bound = {bound}");
    }

    #[test]
    fn solution_invariant_to_matrix_scaling() {
        let s = parallel_rig(800.0, 60.0);
        let p = Point3::new(-20.0, 14.0, 620.0);
        let pl = project(&p, &s.left).unwrap();
        let pr = project(&p, &s.right).unwrap();
        let scaled = StereoPair {
            left: ProjectionMatrix::new(s.left.matrix() * 2.75).unwrap(),
            right: ProjectionMatrix::new(s.right.matrix() * 0.4).unwrap(),
        };
        let a = triangulate(&pl, &pr, &s).unwrap();
        let b = triangulate(&pl, &pr, &scaled).unwrap();
        // Exact invariance holds only in exact arithmetic; in floating
        // point the difference is bounded by the system conditioning.
        assert!((a - b).norm() < 1e-5, "a = {a:?}, b = {b:?}, diff = {:.3e}", (a - b).norm());
        assert!((a - p).norm() < 1e-5);
        assert!((b - p).norm() < 1e-5);
    }

    #[test]
    fn least_squares_residual_is_locally_minimal() {
        let s = parallel_rig(800.0, 60.0);
        let p = Point3::new(5.0, 8.0, 450.0);
        let pl = project(&p, &s.left).unwrap();
        // Perturbed right pixel so the system is inconsistent.
        let pr = project(&p, &s.right).unwrap() + nalgebra::Vector2::new(0.4, -0.3);
        let pr = Pixel::new(pr.x, pr.y);
        let w = triangulate(&pl, &pr, &s).unwrap();
        let (c, d) = build_system(&pl, &pr, &s);
        let base = (c * w.coords - d).norm();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let delta = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let perturbed = (c * (w.coords + delta) - d).norm();
            assert!(perturbed >= base - 1e-12);
        }
    }

    #[test]
    fn empty_map_gives_empty_cloud() {
        let dmap = DisparityMap::new(8, 4, vec![None; 32]);
        let res = reconstruct_cloud(&dmap, &parallel_rig(800.0, 60.0));
        assert!(res.cloud.is_empty());
        assert_eq!(res.skipped, 0);
    }

    #[test]
    fn cloud_depth_matches_disparity_model() {
        // One valid pixel with disparity d: depth must equal f B / d.
        let f = 800.0;
        let b = 60.0;
        let s = parallel_rig(f, b);
        let mut values = vec![None; 64 * 8];
        values[4 * 64 + 40] = Some(96u32);
        let dmap = DisparityMap::new(64, 8, values);
        let res = reconstruct_cloud(&dmap, &s);
        assert_eq!(res.cloud.len(), 1);
        let z = res.cloud.points[0].z;
        assert!((z - f * b / 96.0).abs() < 1e-6, "z = {z}");
        assert_eq!(res.cloud.source_pixels.as_ref().unwrap()[0], (40, 4));
    }

    #[test]
    fn modes_agree_bitwise() {
        let s = parallel_rig(800.0, 60.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<Option<u32>> = (0..32 * 16)
            .map(|_| if rng.random_bool(0.5) { Some(rng.random_range(10..80)) } else { None })
            .collect();
        let dmap = DisparityMap::new(32, 16, values);
        let a = reconstruct_cloud_with(&dmap, &s, ExecMode::Sequential);
        let b = reconstruct_cloud_with(&dmap, &s, ExecMode::default());
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.skipped, b.skipped);
    }
}
