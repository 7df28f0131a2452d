//! Synthetic test scenes with exact ground truth.
//!
//! Renders analytic stereo pairs of a bored cylinder (outer wall, bore
//! wall, two annular end faces) by ray casting, with Lambertian shading
//! and a deterministic surface-anchored noise texture so the matcher has
//! something to latch onto. Also samples ground-truth point clouds
//! directly, bypassing matching.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    compose_projection, CameraIntrinsics, Extrinsics, Point3, ProjectionMatrix,
};
use crate::matcher::GrayImage;
use crate::parallel::{map_indexed, ExecMode};
use crate::reconstruction::{PointCloud, StereoPair};

/// Tilt at and beyond which the end face counts as occluded.
pub const OCCLUSION_ANGLE_DEG: f64 = 80.0;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("cylinder is not in front of both cameras")]
    BehindCamera,
    #[error("invalid cylinder spec: {0}")]
    BadSpec(String),
}

/// Where the cylinder sits: near end-face center, outward face normal
/// (unit), and roll about the axis (anchors the surface texture).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CylinderPlacement {
    pub face_center: [f64; 3],
    pub axis: [f64; 3],
    pub roll: f64,
}

/// Shading and texture knobs of the rendered surfaces. Amplitudes are in
/// intensity units; zero renders untextured.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceAppearance {
    pub face_texture_amplitude: f64,
    pub body_texture_amplitude: f64,
    pub face_albedo: f64,
    pub body_albedo: f64,
    pub bore_albedo: f64,
    pub ambient: f64,
}

impl Default for SurfaceAppearance {
    fn default() -> Self {
        Self {
            face_texture_amplitude: 0.04,
            body_texture_amplitude: 0.03,
            face_albedo: 0.85,
            body_albedo: 0.7,
            bore_albedo: 0.15,
            ambient: 0.25,
        }
    }
}

/// The workpiece: a sleeve with a coaxial bore through its full length.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CylinderSpec {
    pub length: f64,
    pub outer_diameter: f64,
    pub inner_diameter: f64,
    pub placement: CylinderPlacement,
    #[serde(default)]
    pub appearance: SurfaceAppearance,
}

impl CylinderSpec {
    /// Standard sleeve (200 x 40/20 mm) with its near face at `distance`
    /// along the optical axis, tilted by `angle_deg` about the image
    /// y-axis.
    pub fn at_angle(angle_deg: f64, distance: f64, offset_x: f64) -> Self {
        let th = angle_deg.to_radians();
        Self {
            length: 200.0,
            outer_diameter: 40.0,
            inner_diameter: 20.0,
            placement: CylinderPlacement {
                face_center: [offset_x, 0.0, distance],
                axis: [th.sin(), 0.0, -th.cos()],
                roll: 0.0,
            },
            appearance: SurfaceAppearance::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.length > 0.0) {
            return Err(SceneError::BadSpec("length must be positive".into()));
        }
        if !(self.inner_diameter > 0.0 && self.inner_diameter < self.outer_diameter) {
            return Err(SceneError::BadSpec("need 0 < inner < outer diameter".into()));
        }
        let axis = Vector3::from(self.placement.axis);
        if (axis.norm() - 1.0).abs() > 1e-6 {
            return Err(SceneError::BadSpec("axis must be unit length".into()));
        }
        Ok(())
    }

    pub fn face_center(&self) -> Point3 {
        Point3::from(Vector3::from(self.placement.face_center))
    }

    pub fn axis(&self) -> Vector3<f64> {
        Vector3::from(self.placement.axis)
    }

    /// Orthonormal frame columns (e1, e2, e3): e3 points from the near
    /// face into the body, e1/e2 span the face with roll applied.
    pub fn frame(&self) -> Matrix3<f64> {
        let e3 = -self.axis();
        let reference = if e3.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let mut e1 = reference.cross(&e3).normalize();
        let mut e2 = e3.cross(&e1);
        let (s, c) = self.placement.roll.sin_cos();
        let r1 = e1 * c + e2 * s;
        let r2 = e2 * c - e1 * s;
        e1 = r1;
        e2 = r2;
        Matrix3::from_columns(&[e1, e2, e3])
    }

    /// Angle between the face normal and the viewing direction, degrees.
    pub fn angle_to_camera(&self) -> f64 {
        let toward_camera = -Vector3::z();
        self.axis().dot(&toward_camera).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

/// Parallel stereo rig: two identical cameras, right one displaced by
/// `baseline` along +x. `depth_offset` is the baseline-like offset of the
/// simplified depth-disparity model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StereoRigSpec {
    pub intrinsics: CameraIntrinsics,
    pub baseline: f64,
    pub width: usize,
    pub height: usize,
    pub depth_offset: f64,
}

impl Default for StereoRigSpec {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics { fx: 1400.0, fy: 1400.0, skew: 0.0, u0: 320.0, v0: 240.0 },
            baseline: 60.0,
            width: 640,
            height: 480,
            depth_offset: 60.0,
        }
    }
}

impl StereoRigSpec {
    pub fn left_extrinsics(&self) -> Extrinsics {
        Extrinsics::identity()
    }

    pub fn right_extrinsics(&self) -> Extrinsics {
        Extrinsics::new(Matrix3::identity(), Vector3::new(-self.baseline, 0.0, 0.0))
            .expect("identity rotation")
    }

    pub fn left_projection(&self) -> ProjectionMatrix {
        compose_projection(&self.intrinsics, &self.left_extrinsics())
    }

    pub fn right_projection(&self) -> ProjectionMatrix {
        compose_projection(&self.intrinsics, &self.right_extrinsics())
    }

    pub fn stereo_pair(&self) -> StereoPair {
        StereoPair { left: self.left_projection(), right: self.right_projection() }
    }

    pub fn camera_centers(&self) -> [Point3; 2] {
        [Point3::origin(), Point3::new(self.baseline, 0.0, 0.0)]
    }
}

/// Exact scene state recorded next to every render or sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub face_center: [f64; 3],
    pub axis: [f64; 3],
    pub face_visible: bool,
    pub angle_deg: f64,
    /// True when the near face plane actually faces both camera centers.
    pub face_visible_geometric: bool,
}

impl GroundTruth {
    pub fn face_center_point(&self) -> Point3 {
        Point3::new(self.face_center[0], self.face_center[1], self.face_center[2])
    }

    pub fn axis_vector(&self) -> Vector3<f64> {
        Vector3::new(self.axis[0], self.axis[1], self.axis[2])
    }
}

fn ground_truth(cyl: &CylinderSpec, rig: &StereoRigSpec) -> GroundTruth {
    let angle = cyl.angle_to_camera();
    let axis = cyl.axis();
    let c = cyl.face_center();
    let geometric = rig
        .camera_centers()
        .iter()
        .all(|cam| axis.dot(&(cam - c)) > 0.0);
    GroundTruth {
        face_center: cyl.placement.face_center,
        axis: cyl.placement.axis,
        face_visible: angle < OCCLUSION_ANGLE_DEG,
        angle_deg: angle,
        face_visible_geometric: geometric,
    }
}

/// Which analytic surface a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    NearFace,
    FarFace,
    OuterWall,
    BoreWall,
}

/// Hit record in the cylinder's local frame (z along the body, near face
/// at z = 0).
#[derive(Debug, Clone, Copy)]
pub struct SurfaceHit {
    pub surface: Surface,
    pub t: f64,
    pub local: Point3,
    pub local_normal: Vector3<f64>,
}

/// Nearest intersection of a world-frame ray with the sleeve.
pub fn trace_surface(
    cyl: &CylinderSpec,
    origin: &Point3,
    dir: &Vector3<f64>,
) -> Option<SurfaceHit> {
    let frame = cyl.frame();
    let o = frame.transpose() * (origin - cyl.face_center());
    let d = frame.transpose() * dir;
    let r_out = cyl.outer_diameter / 2.0;
    let r_in = cyl.inner_diameter / 2.0;
    let len = cyl.length;

    let mut best: Option<SurfaceHit> = None;
    let mut consider = |hit: SurfaceHit| {
        if hit.t > 1e-9 && best.map_or(true, |b| hit.t < b.t) {
            best = Some(hit);
        }
    };

    // End-face annuli.
    if d.z.abs() > 1e-15 {
        for (z0, surface, nz) in [(0.0, Surface::NearFace, -1.0), (len, Surface::FarFace, 1.0)] {
            let t = (z0 - o.z) / d.z;
            let p = o + d * t;
            let rho2 = p.x * p.x + p.y * p.y;
            if rho2 >= r_in * r_in && rho2 <= r_out * r_out {
                consider(SurfaceHit {
                    surface,
                    t,
                    local: Point3::from(p),
                    local_normal: Vector3::new(0.0, 0.0, nz),
                });
            }
        }
    }

    // Lateral walls.
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-15 {
        for (radius, surface) in [(r_out, Surface::OuterWall), (r_in, Surface::BoreWall)] {
            let b = 2.0 * (o.x * d.x + o.y * d.y);
            let c = o.x * o.x + o.y * o.y - radius * radius;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                let p = o + d * t;
                if p.z >= 0.0 && p.z <= len {
                    let mut n = Vector3::new(p.x / radius, p.y / radius, 0.0);
                    if surface == Surface::BoreWall {
                        n = -n;
                    }
                    consider(SurfaceHit { surface, t, local: Point3::from(p), local_normal: n });
                }
            }
        }
    }
    best
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Deterministic per-cell noise in [-1, 1], anchored to surface
/// coordinates so both views see the same pattern.
fn cell_noise(ix: i64, iy: i64, tag: u64, seed: u64) -> f64 {
    let h = splitmix(splitmix(splitmix(seed ^ tag) ^ ix as u64) ^ iy as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

const TEXTURE_CELL_MM: f64 = 0.5;

fn shade(cyl: &CylinderSpec, hit: &SurfaceHit, world_dir: &Vector3<f64>, seed: u64) -> f64 {
    let app = &cyl.appearance;
    let frame = cyl.frame();
    let mut n = frame * hit.local_normal;
    if n.dot(world_dir) > 0.0 {
        n = -n;
    }
    // Fixed world-frame light; Lambertian shading is view independent, so
    // left and right see the same surface intensity.
    let light = Vector3::new(0.25, 0.4, -0.88).normalize();
    let diffuse = n.dot(&light).max(0.0);

    let (albedo, texture) = match hit.surface {
        Surface::NearFace | Surface::FarFace => {
            let ix = (hit.local.x / TEXTURE_CELL_MM).floor() as i64;
            let iy = (hit.local.y / TEXTURE_CELL_MM).floor() as i64;
            let tag = if hit.surface == Surface::NearFace { 1 } else { 2 };
            (app.face_albedo, app.face_texture_amplitude * cell_noise(ix, iy, tag, seed))
        }
        Surface::OuterWall => {
            let r_out = cyl.outer_diameter / 2.0;
            let arc = hit.local.y.atan2(hit.local.x) * r_out;
            let ix = (arc / TEXTURE_CELL_MM).floor() as i64;
            let iy = (hit.local.z / TEXTURE_CELL_MM).floor() as i64;
            (app.body_albedo, app.body_texture_amplitude * cell_noise(ix, iy, 3, seed))
        }
        Surface::BoreWall => (app.bore_albedo, 0.0),
    };
    (albedo * (app.ambient + (1.0 - app.ambient) * diffuse) + texture).clamp(0.0, 1.0)
}

fn render_view(
    cyl: &CylinderSpec,
    rig: &StereoRigSpec,
    camera_center: &Point3,
    seed: u64,
    mode: ExecMode,
) -> GrayImage {
    let k = &rig.intrinsics;
    let (w, h) = (rig.width, rig.height);
    let rows: Vec<Vec<f64>> = map_indexed(h, mode, |v| {
        let mut row = Vec::with_capacity(w);
        for u in 0..w {
            let y = (v as f64 - k.v0) / k.fy;
            let x = (u as f64 - k.u0 - k.skew * y) / k.fx;
            let dir = Vector3::new(x, y, 1.0);
            let value = trace_surface(cyl, camera_center, &dir)
                .map(|hit| shade(cyl, &hit, &dir, seed))
                .unwrap_or(0.0);
            row.push(value);
        }
        row
    });
    GrayImage::new(w, h, rows.concat()).expect("shaded intensities clamped to [0,1]")
}

/// Ray-casts the stereo pair. Deterministic for a fixed
/// (spec, rig, seed); the texture is anchored to the surface so it is
/// consistent across the two views.
pub fn render_stereo_pair(
    cyl: &CylinderSpec,
    rig: &StereoRigSpec,
    texture_seed: u64,
) -> Result<(GrayImage, GrayImage, GroundTruth), SceneError> {
    render_stereo_pair_with(cyl, rig, texture_seed, ExecMode::default())
}

pub fn render_stereo_pair_with(
    cyl: &CylinderSpec,
    rig: &StereoRigSpec,
    texture_seed: u64,
    mode: ExecMode,
) -> Result<(GrayImage, GrayImage, GroundTruth), SceneError> {
    cyl.validate()?;
    let far_center = cyl.face_center() - cyl.axis() * cyl.length;
    for cam in rig.camera_centers() {
        if cyl.face_center().z - cam.z <= 0.0 || far_center.z - cam.z <= 0.0 {
            return Err(SceneError::BehindCamera);
        }
    }
    let [left_cam, right_cam] = rig.camera_centers();
    let left = render_view(cyl, rig, &left_cam, texture_seed, mode);
    let right = render_view(cyl, rig, &right_cam, texture_seed, mode);
    Ok((left, right, ground_truth(cyl, rig)))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Samples a ground-truth cloud directly: `n_face` points uniform on the
/// end-face annulus when the face is visible, `n_body` on the
/// camera-facing half of the outer wall, isotropic Gaussian noise added.
pub fn sample_cylinder_cloud(
    cyl: &CylinderSpec,
    rig: &StereoRigSpec,
    n_face: usize,
    n_body: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(PointCloud, GroundTruth), SceneError> {
    cyl.validate()?;
    let truth = ground_truth(cyl, rig);
    let frame = cyl.frame();
    let e1 = frame.column(0).into_owned();
    let e2 = frame.column(1).into_owned();
    let e3 = frame.column(2).into_owned();
    let c = cyl.face_center();
    let r_out = cyl.outer_diameter / 2.0;
    let r_in = cyl.inner_diameter / 2.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_face + n_body);

    if truth.face_visible {
        for _ in 0..n_face {
            let rad = (r_in * r_in + rng.random_range(0.0f64..1.0) * (r_out * r_out - r_in * r_in))
                .sqrt();
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            points.push(Point3::from(
                c.coords + e1 * (rad * th.cos()) + e2 * (rad * th.sin()),
            ));
        }
    }
    // Visible half of the lateral surface: outward normals not pointing
    // away from the cameras. Edge-on placements accept the full circle.
    let view = Vector3::z();
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    while accepted < n_body && attempts < n_body * 64 {
        attempts += 1;
        let th = rng.random_range(0.0..std::f64::consts::TAU);
        let normal = e1 * th.cos() + e2 * th.sin();
        if normal.dot(&view) > 1e-9 {
            continue;
        }
        let z = rng.random_range(0.0..cyl.length);
        points.push(Point3::from(
            c.coords + e1 * (r_out * th.cos()) + e2 * (r_out * th.sin()) + e3 * z,
        ));
        accepted += 1;
    }
    if noise_sigma > 0.0 {
        for p in &mut points {
            p.x += noise_sigma * gaussian(&mut rng);
            p.y += noise_sigma * gaussian(&mut rng);
            p.z += noise_sigma * gaussian(&mut rng);
        }
    }
    Ok((PointCloud::from_points(points), truth))
}
