//! End-to-end pipeline driver: error metrics, staged execution with
//! per-stage timeouts, and the angle sweep with CSV/JSON/SVG reports.
//!
//! Report files that must reproduce byte-identically for a fixed master
//! seed (`trials.csv`, `report.csv`, `report.json`) carry only seeded
//! quantities; wall-clock timings go to `timings.csv` and the SVG chart,
//! which are inherently run dependent.

use std::path::Path;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::io::IoError;
use crate::matcher::{compute_disparity_map_with, GrayImage, MatchParams};
use crate::parallel::{map_indexed, ExecMode};
use crate::pose::{estimate_pose_with, CylinderPose, PoseConfig, PoseError};
use crate::reconstruction::reconstruct_cloud_with;
use crate::scene::{
    render_stereo_pair_with, sample_cylinder_cloud, CylinderSpec, SceneError, StereoRigSpec,
    SurfaceAppearance,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("axis vectors must be unit length (norms {0:.6} and {1:.6})")]
    NonUnitInput(f64, f64),
}

/// Pipeline failure, tagged with the stage that raised it.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("stage {stage} exceeded the {timeout_s} s budget")]
    Timeout { stage: &'static str, timeout_s: f64 },
    #[error("end face not found ({0})")]
    FaceNotFound(#[source] PoseError),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("scene error: {0}")]
    Scene(#[from] SceneError),
}

/// Angle between two undirected unit axes, degrees in [0, 90].
pub fn orientation_error(
    axis_est: &Vector3<f64>,
    axis_true: &Vector3<f64>,
) -> Result<f64, HarnessError> {
    let (na, nb) = (axis_est.norm(), axis_true.norm());
    if (na - 1.0).abs() > 1e-6 || (nb - 1.0).abs() > 1e-6 {
        return Err(HarnessError::NonUnitInput(na, nb));
    }
    Ok(axis_est.dot(axis_true).abs().min(1.0).acos().to_degrees())
}

/// Euclidean distance between estimated and true centers, millimeters.
pub fn centering_error(c_est: &Point3, c_true: &Point3) -> f64 {
    (c_est - c_true).norm()
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub matching_s: f64,
    pub reconstruction_s: f64,
    pub pose_s: f64,
}

impl StageTimings {
    pub fn total_s(&self) -> f64 {
        self.matching_s + self.reconstruction_s + self.pose_s
    }
}

/// Everything needed to run the image pipeline on one stereo frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub match_params: MatchParams,
    pub pose: PoseConfig,
    /// Keep only reconstructed points with depth inside `[near, far]` mm.
    /// Stray correspondences reconstruct to wildly implausible depths, so
    /// a coarse working-distance band removes them without touching the
    /// object. `None` keeps everything.
    pub depth_window_mm: Option<[f64; 2]>,
    /// Per-stage budget in seconds; 0 disables the timeout.
    pub timeout_s: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            match_params: MatchParams { max_disparity: 192, ..MatchParams::default() },
            pose: PoseConfig::default(),
            depth_window_mm: None,
            timeout_s: 60.0,
        }
    }
}

impl PipelineParams {
    /// Tuning for clouds reconstructed from rendered pairs rather than
    /// directly sampled ones: RANSAC bands sized for integer-disparity
    /// quantization (about a millimeter of depth per disparity step at
    /// the working distance), a texture gate raised so the weakly
    /// textured body contributes a bounded share of the cloud, a coarse
    /// voxel filter, and the body-support check that rejects planes
    /// hallucinated on the body when the face itself is occluded. The
    /// plain `default()` suits sub-millimeter direct-sampled clouds.
    pub fn image_defaults() -> Self {
        Self {
            match_params: MatchParams {
                max_disparity: 192,
                texture_threshold: 0.062,
                ..MatchParams::default()
            },
            pose: PoseConfig {
                voxel_size: 6.0,
                density_quantile: 0.9,
                plane: crate::pose::RansacParams {
                    inlier_threshold: 1.0,
                    min_inlier_fraction: 0.25,
                    ..crate::pose::RansacParams::plane_defaults()
                },
                circle: crate::pose::RansacParams {
                    inlier_threshold: 1.0,
                    ..crate::pose::RansacParams::circle_defaults()
                },
                min_body_support: 0.5,
                ..PoseConfig::default()
            },
            ..Self::default()
        }
    }
}

/// Result of one end-to-end frame.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub pose: CylinderPose,
    pub timings: StageTimings,
    pub valid_disparities: usize,
    pub cloud_size: usize,
    pub skipped_pixels: usize,
}

fn run_stage<T: Send + 'static>(
    stage: &'static str,
    timeout_s: f64,
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<(T, f64), RunError> {
    let start = Instant::now();
    if timeout_s <= 0.0 {
        let out = f();
        return Ok((out, start.elapsed().as_secs_f64()));
    }
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let _ = tx.send(f());
    });
    match rx.recv_timeout(Duration::from_secs_f64(timeout_s)) {
        Ok(out) => Ok((out, start.elapsed().as_secs_f64())),
        Err(_) => Err(RunError::Timeout { stage, timeout_s }),
    }
}

/// Matching, reconstruction, pose extraction on one frame, with per-stage
/// wall-clock accounting. The viewing direction is the optical axis (+z).
pub fn run_pipeline(
    left: &GrayImage,
    right: &GrayImage,
    rig: &StereoRigSpec,
    params: &PipelineParams,
) -> Result<PipelineRun, RunError> {
    run_pipeline_with(left, right, rig, params, ExecMode::default())
}

pub fn run_pipeline_with(
    left: &GrayImage,
    right: &GrayImage,
    rig: &StereoRigSpec,
    params: &PipelineParams,
    mode: ExecMode,
) -> Result<PipelineRun, RunError> {
    let mut timings = StageTimings::default();

    let (dmap, t) = {
        let (left, right, p) = (left.clone(), right.clone(), params.match_params);
        run_stage("matching", params.timeout_s, move || {
            compute_disparity_map_with(&left, &right, &p, mode)
        })?
    };
    timings.matching_s = t;
    let dmap = dmap.map_err(|e| RunError::Stage { stage: "matching", message: e.to_string() })?;
    let valid_disparities = dmap.valid_count();

    let pair = rig.stereo_pair();
    let (cloud_result, t) = run_stage("reconstruction", params.timeout_s, move || {
        reconstruct_cloud_with(&dmap, &pair, mode)
    })?;
    timings.reconstruction_s = t;
    let mut cloud_result = cloud_result;
    if let Some([near, far]) = params.depth_window_mm {
        let keep: Vec<bool> =
            cloud_result.cloud.points.iter().map(|p| p.z >= near && p.z <= far).collect();
        let mut k = keep.iter();
        cloud_result.cloud.points.retain(|_| *k.next().unwrap());
        if let Some(px) = cloud_result.cloud.source_pixels.as_mut() {
            let mut k = keep.iter();
            px.retain(|_| *k.next().unwrap());
        }
        if cloud_result.cloud.is_empty() {
            return Err(RunError::FaceNotFound(PoseError::EmptyCloud));
        }
    }
    let cloud_size = cloud_result.cloud.len();
    let skipped_pixels = cloud_result.skipped;

    let pose_cfg = params.pose.clone();
    let (pose, t) = run_stage("pose", params.timeout_s, move || {
        estimate_pose_with(&cloud_result.cloud, &pose_cfg, &Vector3::z(), mode)
    })?;
    timings.pose_s = t;
    let pose = pose.map_err(|e| match e {
        PoseError::FaceNotFound { .. } => RunError::FaceNotFound(e),
        other => RunError::Stage { stage: "pose", message: other.to_string() },
    })?;

    Ok(PipelineRun { pose, timings, valid_disparities, cloud_size, skipped_pixels })
}

/// Scene geometry shared by every sweep trial; the per-trial tilt and
/// roll are filled in from the angle and the trial seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub rig: StereoRigSpec,
    pub distance: f64,
    pub offset_x: f64,
    pub cylinder_length: f64,
    pub outer_diameter: f64,
    pub inner_diameter: f64,
    pub appearance: SurfaceAppearance,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            rig: StereoRigSpec::default(),
            distance: 500.0,
            // Slightly left of the left camera's axis: at steep tilts the
            // body then leaves the right camera's frame, so occluded-face
            // frames cannot fill the cloud with body correspondences.
            offset_x: -10.0,
            cylinder_length: 200.0,
            outer_diameter: 40.0,
            inner_diameter: 20.0,
            appearance: SurfaceAppearance::default(),
        }
    }
}

impl SceneConfig {
    pub fn cylinder_at(&self, angle_deg: f64, roll: f64) -> CylinderSpec {
        let mut cyl = CylinderSpec::at_angle(angle_deg, self.distance, self.offset_x);
        cyl.length = self.cylinder_length;
        cyl.outer_diameter = self.outer_diameter;
        cyl.inner_diameter = self.inner_diameter;
        cyl.appearance = self.appearance;
        cyl.placement.roll = roll;
        cyl
    }
}

/// Direct-cloud sampling controls for cloud-mode sweeps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudSampleParams {
    pub n_face: usize,
    pub n_body: usize,
    pub noise_sigma: f64,
}

impl Default for CloudSampleParams {
    fn default() -> Self {
        Self { n_face: 6500, n_body: 6000, noise_sigma: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Render stereo pairs and run the full image pipeline.
    Image,
    /// Sample ground-truth clouds and run pose extraction only.
    Cloud,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub angles: Vec<f64>,
    pub trials_per_angle: usize,
    pub master_seed: u64,
    pub mode: SweepMode,
    pub scene: SceneConfig,
    pub pipeline: PipelineParams,
    pub cloud: CloudSampleParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            angles: (0..=9).map(|i| i as f64 * 10.0).collect(),
            trials_per_angle: 14,
            master_seed: 0,
            mode: SweepMode::Cloud,
            scene: SceneConfig::default(),
            pipeline: PipelineParams::default(),
            cloud: CloudSampleParams::default(),
        }
    }
}

fn mix(a: u64, b: u64, c: u64) -> u64 {
    let s = |mut x: u64| {
        x = x.wrapping_add(0x9E3779B97F4A7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
        x ^ (x >> 31)
    };
    s(s(s(a) ^ b) ^ c)
}

/// Per-trial seed; recorded in the report so any trial can be replayed
/// alone.
pub fn trial_seed(master: u64, angle_index: usize, trial: usize) -> u64 {
    mix(master, angle_index as u64 + 1, trial as u64 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum TrialOutcome {
    Success {
        orientation_error_deg: f64,
        centering_error_mm: f64,
    },
    Occluded,
    Failed {
        stage: String,
    },
    Timeout {
        stage: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub angle_deg: f64,
    pub trial: usize,
    pub seed: u64,
    pub outcome: TrialOutcome,
    #[serde(skip)]
    pub timings: StageTimings,
}

/// Per-angle aggregates; means are over successful trials only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleRow {
    pub angle_deg: f64,
    pub trials: usize,
    pub successes: usize,
    pub occlusions: usize,
    pub failures: usize,
    pub timeouts: usize,
    pub mean_orientation_error_deg: Option<f64>,
    pub mean_centering_error_mm: Option<f64>,
    #[serde(skip)]
    pub mean_timings: StageTimings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<AngleRow>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub trials: Vec<TrialRecord>,
    pub report: SweepReport,
}

fn run_trial(cfg: &SweepConfig, angle_index: usize, trial: usize, mode: ExecMode) -> TrialRecord {
    let angle = cfg.angles[angle_index];
    let seed = trial_seed(cfg.master_seed, angle_index, trial);
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(mix(seed, 7, 0));
    let roll = rng.random_range(0.0..std::f64::consts::TAU);
    let cyl = cfg.scene.cylinder_at(angle, roll);

    let mut pipeline = cfg.pipeline.clone();
    pipeline.pose.plane.seed = mix(seed, 1, 0);
    pipeline.pose.circle.seed = mix(seed, 2, 0);

    let record = |outcome, timings| TrialRecord { angle_deg: angle, trial, seed, outcome, timings };

    let (pose, truth, timings) = match cfg.mode {
        SweepMode::Cloud => {
            let sampled = sample_cylinder_cloud(
                &cyl,
                &cfg.scene.rig,
                cfg.cloud.n_face,
                cfg.cloud.n_body,
                cfg.cloud.noise_sigma,
                seed,
            );
            let (cloud, truth) = match sampled {
                Ok(x) => x,
                Err(e) => {
                    return record(TrialOutcome::Failed { stage: format!("scene: {e}") }, StageTimings::default())
                }
            };
            let start = Instant::now();
            let res = estimate_pose_with(&cloud, &pipeline.pose, &Vector3::z(), mode);
            let timings = StageTimings { pose_s: start.elapsed().as_secs_f64(), ..Default::default() };
            match res {
                Ok(pose) => (pose, truth, timings),
                Err(PoseError::FaceNotFound { stage }) => {
                    let outcome = if truth.face_visible {
                        TrialOutcome::Failed { stage: stage.to_string() }
                    } else {
                        TrialOutcome::Occluded
                    };
                    return record(outcome, timings);
                }
                Err(e) => {
                    return record(TrialOutcome::Failed { stage: e.to_string() }, timings)
                }
            }
        }
        SweepMode::Image => {
            let rendered = render_stereo_pair_with(&cyl, &cfg.scene.rig, seed, mode);
            let (left, right, truth) = match rendered {
                Ok(x) => x,
                Err(e) => {
                    return record(TrialOutcome::Failed { stage: format!("scene: {e}") }, StageTimings::default())
                }
            };
            match run_pipeline_with(&left, &right, &cfg.scene.rig, &pipeline, mode) {
                Ok(run) => (run.pose, truth, run.timings),
                Err(RunError::Timeout { stage, .. }) => {
                    return record(TrialOutcome::Timeout { stage: stage.to_string() }, StageTimings::default())
                }
                Err(RunError::FaceNotFound(_)) => {
                    let outcome = if truth.face_visible {
                        TrialOutcome::Failed { stage: "pose".to_string() }
                    } else {
                        TrialOutcome::Occluded
                    };
                    return record(outcome, StageTimings::default());
                }
                Err(e) => {
                    return record(TrialOutcome::Failed { stage: e.to_string() }, StageTimings::default())
                }
            }
        }
    };

    let orient = orientation_error(&pose.axis_vector(), &truth.axis_vector())
        .expect("axes are unit by construction");
    let center = centering_error(&pose.center_point(), &truth.face_center_point());
    record(
        TrialOutcome::Success { orientation_error_deg: orient, centering_error_mm: center },
        timings,
    )
}

/// Runs every angle x trial combination and aggregates per-angle means.
/// Trials are independent and seeded, so the result (apart from wall
/// clock) is identical in both execution modes.
pub fn run_sweep(cfg: &SweepConfig) -> SweepOutput {
    run_sweep_with(cfg, ExecMode::default())
}

pub fn run_sweep_with(cfg: &SweepConfig, mode: ExecMode) -> SweepOutput {
    let n_angles = cfg.angles.len();
    let n_trials = cfg.trials_per_angle;
    let trials: Vec<TrialRecord> = map_indexed(n_angles * n_trials, ExecMode::Sequential, |i| {
        run_trial(cfg, i / n_trials, i % n_trials, mode)
    });

    let rows = cfg
        .angles
        .iter()
        .enumerate()
        .map(|(ai, &angle)| {
            let slice = &trials[ai * n_trials..(ai + 1) * n_trials];
            let mut row = AngleRow {
                angle_deg: angle,
                trials: n_trials,
                successes: 0,
                occlusions: 0,
                failures: 0,
                timeouts: 0,
                mean_orientation_error_deg: None,
                mean_centering_error_mm: None,
                mean_timings: StageTimings::default(),
            };
            let mut orient_sum = 0.0;
            let mut center_sum = 0.0;
            let mut t_sum = StageTimings::default();
            for t in slice {
                match &t.outcome {
                    TrialOutcome::Success { orientation_error_deg, centering_error_mm } => {
                        row.successes += 1;
                        orient_sum += orientation_error_deg;
                        center_sum += centering_error_mm;
                        t_sum.matching_s += t.timings.matching_s;
                        t_sum.reconstruction_s += t.timings.reconstruction_s;
                        t_sum.pose_s += t.timings.pose_s;
                    }
                    TrialOutcome::Occluded => row.occlusions += 1,
                    TrialOutcome::Failed { .. } => row.failures += 1,
                    TrialOutcome::Timeout { .. } => row.timeouts += 1,
                }
            }
            if row.successes > 0 {
                let n = row.successes as f64;
                row.mean_orientation_error_deg = Some(orient_sum / n);
                row.mean_centering_error_mm = Some(center_sum / n);
                row.mean_timings = StageTimings {
                    matching_s: t_sum.matching_s / n,
                    reconstruction_s: t_sum.reconstruction_s / n,
                    pose_s: t_sum.pose_s / n,
                };
            }
            row
        })
        .collect();

    SweepOutput { trials, report: SweepReport { rows } }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn outcome_label(o: &TrialOutcome) -> &'static str {
    match o {
        TrialOutcome::Success { .. } => "success",
        TrialOutcome::Occluded => "occluded",
        TrialOutcome::Failed { .. } => "failed",
        TrialOutcome::Timeout { .. } => "timeout",
    }
}

/// Per-trial CSV (deterministic for a fixed master seed).
pub fn trials_csv(trials: &[TrialRecord]) -> String {
    let mut out =
        String::from("angle_deg,trial,seed,outcome,orientation_error_deg,centering_error_mm\n");
    for t in trials {
        let (o, c) = match &t.outcome {
            TrialOutcome::Success { orientation_error_deg, centering_error_mm } => {
                (Some(*orientation_error_deg), Some(*centering_error_mm))
            }
            _ => (None, None),
        };
        out.push_str(&format!(
            "{:.1},{},{},{},{},{}\n",
            t.angle_deg,
            t.trial,
            t.seed,
            outcome_label(&t.outcome),
            fmt_opt(o),
            fmt_opt(c),
        ));
    }
    out
}

/// Per-angle CSV (deterministic for a fixed master seed).
pub fn report_csv(report: &SweepReport) -> String {
    let mut out = String::from(
        "angle_deg,trials,successes,occlusions,failures,timeouts,\
         mean_orientation_error_deg,mean_centering_error_mm\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{:.1},{},{},{},{},{},{},{}\n",
            r.angle_deg,
            r.trials,
            r.successes,
            r.occlusions,
            r.failures,
            r.timeouts,
            fmt_opt(r.mean_orientation_error_deg),
            fmt_opt(r.mean_centering_error_mm),
        ));
    }
    out
}

/// Per-angle mean stage times; run dependent by nature.
pub fn timings_csv(report: &SweepReport) -> String {
    let mut out =
        String::from("angle_deg,mean_matching_s,mean_reconstruction_s,mean_pose_s,mean_total_s\n");
    for r in &report.rows {
        let t = &r.mean_timings;
        out.push_str(&format!(
            "{:.1},{:.6},{:.6},{:.6},{:.6}\n",
            r.angle_deg,
            t.matching_s,
            t.reconstruction_s,
            t.pose_s,
            t.total_s(),
        ));
    }
    out
}

/// Self-contained line chart of error and time versus angle.
pub fn sweep_svg(report: &SweepReport) -> String {
    let (w, h, ml, mb) = (720.0, 420.0, 60.0, 50.0);
    let plot_w = w - ml - 30.0;
    let plot_h = h - mb - 30.0;
    let rows = &report.rows;
    let xmax = rows.iter().map(|r| r.angle_deg).fold(1.0f64, f64::max);

    let series: Vec<(&str, &str, Vec<(f64, f64)>)> = vec![
        (
            "orientation error (deg)",
            "#c62828",
            rows.iter()
                .filter_map(|r| r.mean_orientation_error_deg.map(|v| (r.angle_deg, v)))
                .collect(),
        ),
        (
            "centering error (mm)",
            "#1565c0",
            rows.iter()
                .filter_map(|r| r.mean_centering_error_mm.map(|v| (r.angle_deg, v)))
                .collect(),
        ),
        (
            "total time (s)",
            "#2e7d32",
            rows.iter()
                .filter(|r| r.successes > 0)
                .map(|r| (r.angle_deg, r.mean_timings.total_s()))
                .collect(),
        ),
    ];
    let ymax = series
        .iter()
        .flat_map(|(_, _, pts)| pts.iter().map(|p| p.1))
        .fold(1e-9f64, f64::max)
        * 1.1;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    let x = |angle: f64| ml + angle / xmax * plot_w;
    let y = |v: f64| 30.0 + plot_h - v / ymax * plot_h;
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"30\" x2=\"{ml}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        30.0 + plot_h,
        ml + plot_w,
        30.0 + plot_h,
        30.0 + plot_h,
    ));
    for r in rows {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.0}</text>\n",
            x(r.angle_deg),
            30.0 + plot_h + 16.0,
            r.angle_deg
        ));
        if r.occlusions > 0 {
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\" \
                 fill=\"#757575\">occluded</text>\n",
                x(r.angle_deg),
                46.0,
            ));
        }
    }
    for (i, (label, color, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> =
            pts.iter().map(|(a, v)| format!("{:.2},{:.2}", x(*a), y(*v))).collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            ml + 10.0,
            48.0 + 16.0 * i as f64,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">tilt angle (deg)\
         </text>\n</svg>\n",
        ml + plot_w / 2.0,
        h - 8.0,
    ));
    svg
}

/// Writes trials.csv, report.csv, report.json, timings.csv, report.svg.
pub fn emit_sweep(output: &SweepOutput, dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(IoError::Io)?;
    std::fs::write(dir.join("trials.csv"), trials_csv(&output.trials))?;
    std::fs::write(dir.join("report.csv"), report_csv(&output.report))?;
    let json = serde_json::to_string_pretty(&output.report).expect("report serializes");
    std::fs::write(dir.join("report.json"), json)?;
    std::fs::write(dir.join("timings.csv"), timings_csv(&output.report))?;
    std::fs::write(dir.join("report.svg"), sweep_svg(&output.report))?;
    Ok(())
}
