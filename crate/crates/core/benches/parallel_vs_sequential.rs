//! Parallel vs sequential execution of the per-pixel and per-point
//! pipeline stages. Run with `cargo bench --features parallel`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cylpose::harness::SceneConfig;
use cylpose::matcher::{compute_disparity_map_with, MatchParams};
use cylpose::parallel::ExecMode;
use cylpose::pose::{estimate_pose_with, PoseConfig};
use cylpose::reconstruction::reconstruct_cloud_with;
use cylpose::scene::{render_stereo_pair, sample_cylinder_cloud};

const MODES: [(&str, ExecMode); 2] =
    [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn bench_disparity(c: &mut Criterion) {
    let scene = SceneConfig::default();
    let cyl = scene.cylinder_at(30.0, 0.0);
    let (left, right, _) = render_stereo_pair(&cyl, &scene.rig, 7).unwrap();
    let params = MatchParams { max_disparity: 192, ..MatchParams::default() };

    let mut group = c.benchmark_group("disparity_map");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| compute_disparity_map_with(&left, &right, &params, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_reconstruction(c: &mut Criterion) {
    let scene = SceneConfig::default();
    let cyl = scene.cylinder_at(30.0, 0.0);
    let (left, right, _) = render_stereo_pair(&cyl, &scene.rig, 7).unwrap();
    let params = MatchParams { max_disparity: 192, ..MatchParams::default() };
    let dmap = compute_disparity_map_with(&left, &right, &params, ExecMode::Parallel).unwrap();
    let pair = scene.rig.stereo_pair();

    let mut group = c.benchmark_group("reconstruction");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| reconstruct_cloud_with(&dmap, &pair, mode))
        });
    }
    group.finish();
}

fn bench_pose(c: &mut Criterion) {
    let scene = SceneConfig::default();
    let cyl = scene.cylinder_at(30.0, 0.0);
    let (cloud, _) = sample_cylinder_cloud(&cyl, &scene.rig, 6500, 6000, 0.3, 7).unwrap();
    let cfg = PoseConfig::default();
    let view = nalgebra::Vector3::z();

    let mut group = c.benchmark_group("pose");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| estimate_pose_with(&cloud, &cfg, &view, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_disparity, bench_reconstruction, bench_pose);
criterion_main!(benches);
