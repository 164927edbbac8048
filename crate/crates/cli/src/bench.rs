//! Localization benchmark: a hovering UAV at lateral distance `w` from one
//! insulator fuses three detections and every method localizes the same
//! cloud.

use insulator_inspect::fusion::{filter_by_bbox, project_cloud, DetectionBuffer, PointCloud};
use insulator_inspect::geometry::{Frame, RigidTransform, Vec3};
use insulator_inspect::localization::{localize, LocalizerParams, Method};
use insulator_inspect::rng::{mix64, unit_from_hash, SeedStream};
use insulator_inspect::scene::{
    simulate_detection, simulate_lidar_scan_windowed, InsulatorSpec, Scene, SceneConfig, ScanWindow, TowerKind,
};
use serde::Serialize;

use crate::stats::{mean, std_dev};

pub const DEFAULT_TRIALS: usize = 150;
pub const DEFAULT_WS: [f64; 3] = [8.0, 9.0, 10.0];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub scene: SceneConfig,
    pub tower_kind: TowerKind,
    pub methods: Vec<Method>,
    pub ws: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub localizer: LocalizerParams,
    /// Uniform jitter of the viewing azimuth around the lateral normal.
    pub azimuth_jitter_deg: f64,
    /// Uniform jitter of the hover height around the insulator center.
    pub height_jitter: f64,
    pub event_period: f64,
    /// Detection attempts before a trial is abandoned.
    pub max_events: usize,
    pub scan_margin_deg: f64,
}

impl BenchConfig {
    pub fn new(scene: SceneConfig, tower_kind: TowerKind, seed: u64) -> Self {
        Self {
            scene,
            tower_kind,
            methods: Method::ALL.to_vec(),
            ws: DEFAULT_WS.to_vec(),
            trials: DEFAULT_TRIALS,
            seed,
            localizer: LocalizerParams::default(),
            azimuth_jitter_deg: 15.0,
            height_jitter: 0.5,
            event_period: 0.5,
            max_events: 8,
            scan_margin_deg: 5.0,
        }
    }
}

/// One (method, w, tower) cell. Errors are Euclidean distances between the
/// estimated and true centers; failed trials are excluded from the moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub w: f64,
    pub tower_kind: String,
    pub n_trials: usize,
    pub n_failed: usize,
    pub mean_error_m: f64,
    pub std_error_m: f64,
    pub mean_xy_error_m: f64,
    pub std_xy_error_m: f64,
    pub mean_z_error_m: f64,
    pub std_z_error_m: f64,
}

/// Per-trial outcome: `None` for a method that produced no estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub insulator_id: u32,
    pub errors: Vec<Option<Vec3>>,
}

fn jitter(stream: &SeedStream, k: u64) -> f64 {
    2.0 * unit_from_hash(mix64(stream.seed() ^ mix64(k))) - 1.0
}

/// Hover pose facing `ins` from distance `w` on its outward lateral side.
pub fn hover_pose(scene: &Scene, ins: &InsulatorSpec, w: f64, az_offset: f64, dz: f64) -> RigidTransform {
    let tower = &scene.config().towers[0];
    let pose = tower.pose();
    let lateral = pose.transform_vector(&Vec3::y());
    let side = if (ins.center - tower.base()).dot(&lateral) < 0.0 { -1.0 } else { 1.0 };
    let base_az = (lateral.y * side).atan2(lateral.x * side);
    let az = base_az + az_offset;
    let position = ins.center + Vec3::new(az.cos(), az.sin(), 0.0) * w + Vec3::new(0.0, 0.0, dz);
    let to = ins.center - position;
    RigidTransform::from_yaw(to.y.atan2(to.x), position, Frame::Body, Frame::World)
}

/// Fused body-frame cloud of the target, or `None` when three consecutive
/// detections never occurred within `max_events` attempts.
pub fn collect_cloud(
    scene: &Scene,
    ins: &InsulatorSpec,
    body: &RigidTransform,
    cfg: &BenchConfig,
    stream: &SeedStream,
) -> Option<PointCloud> {
    let mut det_rng = stream.child("detector").rng();
    let mut lidar_rng = stream.child("lidar").rng();
    let mut buffer = DetectionBuffer::default();
    let cam = scene.camera_pose(body);
    let lidar = scene.lidar_pose(body);
    let k = *scene.camera();
    let t_bl = *scene.t_bl();
    let t_cb = scene.t_cb();
    let margin = cfg.scan_margin_deg.to_radians();
    for e in 0..cfg.max_events {
        let t = e as f64 * cfg.event_period;
        let dets = simulate_detection(scene, &cam, &k, t, &mut det_rng);
        // the harness picks the target's box; localization never sees the tag
        let Some(det) = dets.into_iter().find(|d| d.true_insulator_id == Some(ins.id)) else {
            continue;
        };
        let window = ScanWindow::from_bbox(scene, &det.bbox, margin);
        let cloud = simulate_lidar_scan_windowed(scene, &lidar, t, &mut lidar_rng, &[window]);
        let proj = project_cloud(&cloud, &t_bl, &t_cb, &k);
        let fc = filter_by_bbox(&cloud, &proj, &det.bbox, &t_bl).with_body_pose(*body);
        if let Ok(Some(fused)) = buffer.push_and_poll(fc) {
            debug_assert_eq!(fused.frame, Frame::Body);
            return Some(fused);
        }
    }
    None
}

/// Runs one trial; errors are `estimate - truth` in the world frame.
pub fn run_trial(scene: &Scene, cfg: &BenchConfig, w_index: usize, trial: usize) -> TrialResult {
    let w = cfg.ws[w_index];
    let insulators: Vec<InsulatorSpec> = scene.config().towers[0].insulators.clone();
    let ins = insulators[trial % insulators.len()];
    let stream = SeedStream::new(cfg.seed)
        .child("bench")
        .index(w_index as u64)
        .index(trial as u64);
    let az = jitter(&stream, 1) * cfg.azimuth_jitter_deg.to_radians();
    let dz = jitter(&stream, 2) * cfg.height_jitter;
    let body = hover_pose(scene, &ins, w, az, dz);
    let cloud = collect_cloud(scene, &ins, &body, cfg, &stream);
    let errors = cfg
        .methods
        .iter()
        .map(|&m| {
            let cloud = cloud.as_ref()?;
            let mut params = cfg.localizer;
            params.rng_seed = stream.child("ransac").seed();
            let est = localize(m, cloud, &params).ok()?;
            Some(body.transform_point(&est.center) - ins.center)
        })
        .collect();
    TrialResult {
        insulator_id: ins.id,
        errors,
    }
}

fn tower_name(kind: TowerKind) -> String {
    format!("{kind:?}")
}

/// Full sweep; rows are ordered by w, then by method in `cfg.methods` order.
pub fn run_bench(cfg: &BenchConfig) -> anyhow::Result<Vec<BenchRow>> {
    anyhow::ensure!(cfg.trials > 0, "trials must be positive");
    anyhow::ensure!(!cfg.methods.is_empty(), "no methods selected");
    anyhow::ensure!(cfg.ws.iter().all(|w| *w > 0.0), "distances must be positive");
    let scene = Scene::new(cfg.scene.clone())?;
    anyhow::ensure!(
        !scene.config().towers[0].insulators.is_empty(),
        "tower 0 carries no insulators"
    );
    let mut rows = Vec::new();
    for (wi, &w) in cfg.ws.iter().enumerate() {
        let results: Vec<TrialResult> = (0..cfg.trials).map(|t| run_trial(&scene, cfg, wi, t)).collect();
        for (mi, m) in cfg.methods.iter().enumerate() {
            let errs: Vec<Vec3> = results.iter().filter_map(|r| r.errors[mi]).collect();
            let full: Vec<f64> = errs.iter().map(|e| e.norm()).collect();
            let xy: Vec<f64> = errs.iter().map(|e| e.x.hypot(e.y)).collect();
            let z: Vec<f64> = errs.iter().map(|e| e.z.abs()).collect();
            rows.push(BenchRow {
                method: m.name().to_string(),
                w,
                tower_kind: tower_name(cfg.tower_kind),
                n_trials: cfg.trials,
                n_failed: cfg.trials - errs.len(),
                mean_error_m: mean(&full),
                std_error_m: std_dev(&full),
                mean_xy_error_m: mean(&xy),
                std_xy_error_m: std_dev(&xy),
                mean_z_error_m: mean(&z),
                std_z_error_m: std_dev(&z),
            });
        }
    }
    Ok(rows)
}
