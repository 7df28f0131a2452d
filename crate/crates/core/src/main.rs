//! Command-line front end for the stereo cylinder-localization pipeline.
//!
//! Exit codes: 0 success, 2 occlusion / face not found, 3 stage timeout,
//! 4 bad input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cylpose::calibration::{evaluate_calibration, refine_focal, CalibrationInput, CalibrationReport};
use cylpose::harness::{
    centering_error, emit_sweep, orientation_error, run_pipeline, run_sweep, CloudSampleParams,
    PipelineParams, RunError, SceneConfig, StageTimings, SweepConfig,
};
use cylpose::io;
use cylpose::matcher::{compute_disparity_map, MatchParams};
use cylpose::pose::{estimate_pose, PoseConfig, PoseError};
use cylpose::reconstruction::reconstruct_cloud;
use cylpose::scene::{render_stereo_pair, sample_cylinder_cloud, GroundTruth};
use cylpose::Point3;

const EXIT_OCCLUSION: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;
const EXIT_BAD_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "cylpose", version, about = "Stereo localization of cylindrical workpieces")]
struct Cli {
    /// JSON config file; omitted fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed (texture / sampling / sweep master).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Per-stage timeout in seconds; 0 disables.
    #[arg(long = "timeout-s", global = true)]
    timeout_s: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic stereo pair with ground truth and a sampled cloud.
    Simulate(FrameArgs),
    /// Dense SAD block matching on a rectified pair.
    Disparity {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    /// Triangulate a disparity map into a point cloud.
    Reconstruct {
        #[arg(long)]
        disparity: PathBuf,
    },
    /// Extract the end-face pose from a point cloud.
    Pose {
        #[arg(long)]
        cloud: PathBuf,
    },
    /// End-to-end: render (or load) a pair, match, reconstruct, fit pose.
    Run(RunArgs),
    /// Tilt-angle sweep with CSV/JSON/SVG reports.
    Sweep,
    /// Depth-based focal refinement from known-depth observations.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct FrameArgs {
    /// Tilt angle in degrees; overrides the config.
    #[arg(long)]
    angle: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    frame: FrameArgs,
    /// Use an existing left image instead of rendering.
    #[arg(long, requires = "right")]
    left: Option<PathBuf>,
    #[arg(long, requires = "left")]
    right: Option<PathBuf>,
    /// Ground truth JSON for error reporting alongside --left/--right.
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Scene and pipeline settings shared by `simulate` and `run`.
#[derive(Serialize, Deserialize)]
#[serde(default)]
struct FrameConfig {
    scene: SceneConfig,
    angle_deg: f64,
    roll: f64,
    seed: u64,
    cloud: CloudSampleParams,
    pipeline: PipelineParams,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            angle_deg: 34.0,
            roll: 0.0,
            seed: 0,
            cloud: CloudSampleParams::default(),
            pipeline: PipelineParams::image_defaults(),
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn bad_input(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_BAD_INPUT, message: message.to_string() }
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::bad_input(e)
    }
}

fn load_config<T: Default + DeserializeOwned>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::bad_input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::bad_input(format!("{}: {e}", p.display())))
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(CliError::bad_input)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out).map_err(CliError::bad_input)?;
    match &cli.command {
        Command::Simulate(frame) => simulate(cli, frame),
        Command::Disparity { left, right } => disparity(cli, left, right),
        Command::Reconstruct { disparity } => reconstruct(cli, disparity),
        Command::Pose { cloud } => pose(cli, cloud),
        Command::Run(args) => run(cli, args),
        Command::Sweep => sweep(cli),
        Command::Calibrate { input } => calibrate(cli, input),
    }
}

fn frame_config(cli: &Cli, frame: &FrameArgs) -> Result<FrameConfig, CliError> {
    let mut cfg: FrameConfig = load_config(cli.config.as_deref())?;
    if let Some(angle) = frame.angle {
        cfg.angle_deg = angle;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.timeout_s {
        cfg.pipeline.timeout_s = t;
    }
    Ok(cfg)
}

fn simulate(cli: &Cli, frame: &FrameArgs) -> Result<(), CliError> {
    let cfg = frame_config(cli, frame)?;
    let cyl = cfg.scene.cylinder_at(cfg.angle_deg, cfg.roll);
    let (left, right, truth) = render_stereo_pair(&cyl, &cfg.scene.rig, cfg.seed)?;
    io::write_pgm(&left, &cli.out.join("left.pgm"))?;
    io::write_pgm(&right, &cli.out.join("right.pgm"))?;
    write_json(&truth, &cli.out.join("truth.json"))?;
    let (cloud, _) = sample_cylinder_cloud(
        &cyl,
        &cfg.scene.rig,
        cfg.cloud.n_face,
        cfg.cloud.n_body,
        cfg.cloud.noise_sigma,
        cfg.seed,
    )?;
    io::write_ply(&cloud, &cli.out.join("cloud.ply"))?;
    println!(
        "simulate: angle {:.1} deg, face {}, {} cloud points",
        truth.angle_deg,
        if truth.face_visible { "visible" } else { "occluded" },
        cloud.len()
    );
    Ok(())
}

fn disparity(cli: &Cli, left: &Path, right: &Path) -> Result<(), CliError> {
    let params: MatchParams = load_config(cli.config.as_deref())?;
    let left = io::read_pgm(left)?;
    let right = io::read_pgm(right)?;
    let map = compute_disparity_map(&left, &right, &params)?;
    io::write_disparity_csv(&map, &cli.out.join("disparity.csv"))?;
    io::write_disparity_pgm(&map, &cli.out.join("disparity.pgm"))?;
    println!("disparity: {} valid of {} pixels", map.valid_count(), map.width() * map.height());
    Ok(())
}

fn reconstruct(cli: &Cli, disparity: &Path) -> Result<(), CliError> {
    let cfg: FrameConfig = load_config(cli.config.as_deref())?;
    let map = io::read_disparity_csv(disparity)?;
    let result = reconstruct_cloud(&map, &cfg.scene.rig.stereo_pair());
    io::write_ply(&result.cloud, &cli.out.join("cloud.ply"))?;
    io::write_cloud_csv(&result.cloud, &cli.out.join("cloud.csv"))?;
    println!(
        "reconstruct: {} points ({} degenerate pixels skipped)",
        result.cloud.len(),
        result.skipped
    );
    Ok(())
}

fn pose(cli: &Cli, cloud_path: &Path) -> Result<(), CliError> {
    let cfg: PoseConfig = load_config(cli.config.as_deref())?;
    let cloud = io::read_ply(cloud_path)?;
    match estimate_pose(&cloud, &cfg, &Vector3::z()) {
        Ok(pose) => {
            write_json(&pose, &cli.out.join("pose.json"))?;
            println!(
                "pose: center ({:.3}, {:.3}, {:.3}), radius {:.3}",
                pose.center[0], pose.center[1], pose.center[2], pose.radius
            );
            Ok(())
        }
        Err(e @ PoseError::FaceNotFound { .. }) => {
            Err(CliError { code: EXIT_OCCLUSION, message: e.to_string() })
        }
        Err(e) => Err(e.into()),
    }
}

/// Summary written by `run` next to the stage artifacts.
#[derive(Serialize)]
struct RunReport {
    pose: cylpose::CylinderPose,
    timings: StageTimings,
    valid_disparities: usize,
    cloud_size: usize,
    orientation_error_deg: Option<f64>,
    centering_error_mm: Option<f64>,
}

fn run(cli: &Cli, args: &RunArgs) -> Result<(), CliError> {
    let cfg = frame_config(cli, &args.frame)?;
    let (left, right, truth) = match (&args.left, &args.right) {
        (Some(l), Some(r)) => {
            let truth: Option<GroundTruth> = match &args.truth {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(CliError::bad_input)?;
                    Some(serde_json::from_str(&text)?)
                }
                None => None,
            };
            (io::read_pgm(l)?, io::read_pgm(r)?, truth)
        }
        _ => {
            let cyl = cfg.scene.cylinder_at(cfg.angle_deg, cfg.roll);
            let (l, r, t) = render_stereo_pair(&cyl, &cfg.scene.rig, cfg.seed)?;
            (l, r, Some(t))
        }
    };

    let result = run_pipeline(&left, &right, &cfg.scene.rig, &cfg.pipeline);
    let run = match result {
        Ok(run) => run,
        Err(e @ RunError::FaceNotFound(_)) => {
            return Err(CliError { code: EXIT_OCCLUSION, message: e.to_string() })
        }
        Err(e @ RunError::Timeout { .. }) => {
            return Err(CliError { code: EXIT_TIMEOUT, message: e.to_string() })
        }
        Err(e) => return Err(CliError::bad_input(e)),
    };

    let (orient, center) = match &truth {
        Some(t) if t.face_visible => (
            orientation_error(&run.pose.axis_vector(), &t.axis_vector()).ok(),
            Some(centering_error(&run.pose.center_point(), &t.face_center_point())),
        ),
        _ => (None, None),
    };
    let report = RunReport {
        pose: run.pose.clone(),
        timings: run.timings,
        valid_disparities: run.valid_disparities,
        cloud_size: run.cloud_size,
        orientation_error_deg: orient,
        centering_error_mm: center,
    };
    write_json(&run.pose, &cli.out.join("pose.json"))?;
    write_json(&report, &cli.out.join("run.json"))?;
    println!(
        "run: {} disparities, {} points, pose in {:.2} s{}",
        run.valid_disparities,
        run.cloud_size,
        run.timings.total_s(),
        match (orient, center) {
            (Some(o), Some(c)) => format!(", orient err {o:.3} deg, center err {c:.3} mm"),
            _ => String::new(),
        }
    );
    Ok(())
}

fn sweep(cli: &Cli) -> Result<(), CliError> {
    let mut cfg: SweepConfig = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = cli.timeout_s {
        cfg.pipeline.timeout_s = t;
    }
    let output = run_sweep(&cfg);
    emit_sweep(&output, &cli.out)?;
    for row in &output.report.rows {
        println!(
            "angle {:5.1}: {} ok, {} occluded, {} failed, {} timed out",
            row.angle_deg, row.successes, row.occlusions, row.failures, row.timeouts
        );
    }
    Ok(())
}

fn calibrate(cli: &Cli, input: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CliError::bad_input(format!("{}: {e}", input.display())))?;
    let cal: CalibrationInput = serde_json::from_str(&text)?;
    if cal.observations.is_empty() {
        return Err(CliError::bad_input("no observations"));
    }
    let mut f_sum = 0.0;
    for obs in &cal.observations {
        f_sum += refine_focal(cal.f, obs.z_measured, obs.z_true)?;
    }
    let f_after = f_sum / cal.observations.len() as f64;

    // Depth is linear in f for fixed disparity, so corrected depths are
    // the measured ones rescaled; lateral coordinates are unaffected.
    let corrected: Vec<Point3> =
        cal.observations.iter().map(|o| Point3::new(0.0, 0.0, o.z_measured * f_after / cal.f)).collect();
    let truth: Vec<Point3> =
        cal.observations.iter().map(|o| Point3::new(0.0, 0.0, o.z_true)).collect();
    let residuals = evaluate_calibration(&corrected, &truth)?;
    let report = CalibrationReport {
        xy_error: residuals.xy_error,
        z_error: residuals.z_error,
        f_before: cal.f,
        f_after,
    };
    write_json(&report, &cli.out.join("calibration.json"))?;
    println!(
        "calibrate: f {:.3} -> {:.3}, worst z residual {:.4} mm",
        report.f_before, report.f_after, report.z_error
    );
    Ok(())
}
