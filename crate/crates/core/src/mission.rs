//! Online single-flight inspection: an event-driven simulation of the
//! explore / inspect / return state machine.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{filter_by_bbox, project_cloud, DetectionTracker, FilteredCloud, DEFAULT_MAX_GAP};
use crate::geometry::{project_to_image, CameraIntrinsics, Frame, RigidTransform, Vec3};
use crate::localization::{localize, InsulatorEstimate, LocalizerParams, Method};
use crate::planner::{
    build_exploration_path, check_safety, compute_inspection_waypoints, plan_safe, DynamicLimits,
    ExplorationPath, InspectionWaypoint, PlanningError, SafetyRegion, Trajectory, DEFAULT_SAFETY_DT,
    DEFAULT_SAFETY_MARGIN,
};
use crate::rng::{SeedStream, SimRng};
use crate::scene::{
    simulate_detection, simulate_lidar_scan_windowed, BBox, Scene, SceneConfig, SceneError, ScanWindow,
    INSULATOR_LENGTH, INSULATOR_RADIUS,
};

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error("invalid mission configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissionState {
    Exploring,
    FlyingToInspection,
    Capturing,
    ReturningToPath,
    Finished,
}

impl MissionState {
    /// Edges of the inspection state graph. Any state may abort to
    /// `Finished` on a planning failure.
    pub fn can_transition(self, to: MissionState) -> bool {
        use MissionState::*;
        matches!(
            (self, to),
            (Exploring, FlyingToInspection)
                | (FlyingToInspection, Capturing)
                | (Capturing, FlyingToInspection)
                | (Capturing, ReturningToPath)
                | (ReturningToPath, Exploring)
                | (_, Finished)
        ) && self != Finished
    }
}

impl fmt::Display for MissionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MissionState::Exploring => "Exploring",
            MissionState::FlyingToInspection => "FlyingToInspection",
            MissionState::Capturing => "Capturing",
            MissionState::ReturningToPath => "ReturningToPath",
            MissionState::Finished => "Finished",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub limits: DynamicLimits,
    /// Horizontal distance of the exploration sweeps from the tower axis.
    pub exploration_standoff: f64,
    /// Distance of inspection views from the insulator center.
    pub inspection_standoff: f64,
    pub per_insulator: usize,
    pub safety_margin: f64,
    pub detection_rate_hz: f64,
    pub capture_dwell: f64,
    pub merge_radius: f64,
    pub arrival_tolerance: f64,
    pub method: Method,
    pub localizer: LocalizerParams,
    pub track_radius: f64,
    pub max_gap: f64,
    pub scan_margin_deg: f64,
    /// Estimates whose reprojected insulator overlaps the detection bbox
    /// less than this are discarded as foreground clutter.
    pub min_reprojection_iou: f64,
    /// Spacing of the logged flight-path samples.
    pub log_dt: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            limits: DynamicLimits::default(),
            exploration_standoff: 12.0,
            inspection_standoff: 8.0,
            per_insulator: 2,
            safety_margin: DEFAULT_SAFETY_MARGIN,
            detection_rate_hz: 2.0,
            capture_dwell: 2.0,
            merge_radius: 1.0,
            arrival_tolerance: 0.2,
            method: Method::DbscanRansac,
            localizer: LocalizerParams::default(),
            track_radius: 1.0,
            max_gap: DEFAULT_MAX_GAP,
            scan_margin_deg: 5.0,
            min_reprojection_iou: 0.5,
            log_dt: 0.1,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), MissionError> {
        let positive = [
            ("exploration_standoff", self.exploration_standoff),
            ("inspection_standoff", self.inspection_standoff),
            ("safety_margin", self.safety_margin),
            ("detection_rate_hz", self.detection_rate_hz),
            ("merge_radius", self.merge_radius),
            ("log_dt", self.log_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(MissionError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.capture_dwell < 0.0 {
            return Err(MissionError::InvalidConfig("capture_dwell must be non-negative".into()));
        }
        Ok(())
    }
}

/// FIFO of pending inspection views.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaypointBuffer {
    entries: VecDeque<InspectionWaypoint>,
}

impl WaypointBuffer {
    /// Appends unless an entry with the same insulator and position exists.
    pub fn push(&mut self, wp: InspectionWaypoint) -> bool {
        let dup = self
            .entries
            .iter()
            .any(|e| e.insulator_id == wp.insulator_id && (e.position - wp.position).norm() <= 1e-6);
        if !dup {
            self.entries.push_back(wp);
        }
        !dup
    }

    pub fn front(&self) -> Option<&InspectionWaypoint> {
        self.entries.front()
    }

    pub fn back(&self) -> Option<&InspectionWaypoint> {
        self.entries.back()
    }

    pub fn pop(&mut self) -> Option<InspectionWaypoint> {
        self.entries.pop_front()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: u32,
    pub world_center: Vec3,
    pub orientation: Vec3,
    pub inspected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsulatorRegistry {
    pub entries: Vec<RegistryEntry>,
    pub merge_radius: f64,
}

impl InsulatorRegistry {
    pub fn new(merge_radius: f64) -> Self {
        Self {
            entries: Vec::new(),
            merge_radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Registration {
    New(u32),
    Duplicate(u32),
    FarSide,
}

/// Registers a world-frame estimate unless it duplicates an entry or lies
/// on the far side of the tower as seen from the vehicle.
pub fn register_insulator(
    reg: &mut InsulatorRegistry,
    est: &InsulatorEstimate,
    uav: &Vec3,
    tower_center: &Vec3,
) -> Registration {
    if let Some(e) = reg
        .entries
        .iter()
        .filter(|e| (e.world_center - est.center).norm() <= reg.merge_radius)
        .min_by(|a, b| {
            (a.world_center - est.center)
                .norm()
                .total_cmp(&(b.world_center - est.center).norm())
        })
    {
        return Registration::Duplicate(e.id);
    }
    let a = est.center - tower_center;
    let b = uav - tower_center;
    if a.x * b.x + a.y * b.y < 0.0 {
        return Registration::FarSide;
    }
    let id = reg.entries.len() as u32;
    reg.entries.push(RegistryEntry {
        id,
        world_center: est.center,
        orientation: est.orientation,
        inspected: false,
    });
    Registration::New(id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    Transition { from: MissionState, to: MissionState },
    Registered { id: u32, center: Vec3, orientation: Vec3 },
    Duplicate { id: u32 },
    FarSide { center: Vec3 },
    Rejected { center: Vec3, iou: f64 },
    WaypointsQueued { id: u32, count: usize },
    Capture { insulator_id: u32, position: Vec3 },
    Failure { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSample {
    pub t: f64,
    pub position: Vec3,
    pub state: MissionState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub insulator_id: u32,
    pub waypoint: InspectionWaypoint,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub events: Vec<LogEvent>,
    pub flight_path: Vec<FlightSample>,
    /// T_fusion.
    pub total_duration: f64,
    pub captures: Vec<CaptureRecord>,
    pub registry: InsulatorRegistry,
    /// Sum of executed trajectory durations.
    pub flight_time: f64,
    /// Sum of capture dwell times.
    pub dwell_time: f64,
    pub failed: bool,
}

impl MissionLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }

    /// Flight path as CSV with header `t,x,y,z,state`.
    pub fn flight_path_csv(&self) -> String {
        let mut s = String::from("t,x,y,z,state\n");
        for p in &self.flight_path {
            s.push_str(&format!("{},{},{},{},{}\n", p.t, p.position.x, p.position.y, p.position.z, p.state));
        }
        s
    }

    pub fn transitions(&self) -> Vec<(MissionState, MissionState)> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Transition { from, to } => Some((from, to)),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Activity {
    Fly { traj: Trajectory, start: f64 },
    Dwell { start: f64, until: f64 },
    Idle,
}

/// Stepped simulation state.
pub struct MissionSim {
    scene: Scene,
    cfg: MissionConfig,
    safety: SafetyRegion,
    path: ExplorationPath,
    state: MissionState,
    t: f64,
    position: Vec3,
    yaw: f64,
    activity: Activity,
    explore_idx: usize,
    resume_idx: usize,
    next_tick: f64,
    tick_period: f64,
    buffer: WaypointBuffer,
    registry: InsulatorRegistry,
    tracker: DetectionTracker,
    captures_per_entry: Vec<usize>,
    det_rng: SimRng,
    lidar_rng: SimRng,
    ransac: SeedStream,
    estimates: u64,
    log: MissionLog,
}

impl MissionSim {
    pub fn new(scene: &SceneConfig, cfg: &MissionConfig) -> Result<Self, MissionError> {
        cfg.validate()?;
        let scene = Scene::new(scene.clone())?;
        let tower = &scene.config().towers[0];
        let neighbors = &scene.config().neighbors;
        let safety = SafetyRegion::new(tower, neighbors, cfg.safety_margin);
        let path = build_exploration_path(tower, neighbors, cfg.exploration_standoff, &cfg.limits, &safety)?;
        let seeds = SeedStream::new(scene.config().seed);
        let start = path.waypoints[0];
        let log = MissionLog {
            events: Vec::new(),
            flight_path: vec![FlightSample {
                t: 0.0,
                position: start.position,
                state: MissionState::Exploring,
            }],
            total_duration: 0.0,
            captures: Vec::new(),
            registry: InsulatorRegistry::new(cfg.merge_radius),
            flight_time: 0.0,
            dwell_time: 0.0,
            failed: false,
        };
        Ok(Self {
            cfg: cfg.clone(),
            safety,
            state: MissionState::Exploring,
            t: 0.0,
            position: start.position,
            yaw: start.gaze_yaw,
            activity: Activity::Idle,
            explore_idx: 0,
            resume_idx: 0,
            next_tick: 0.0,
            tick_period: 1.0 / cfg.detection_rate_hz,
            buffer: WaypointBuffer::default(),
            registry: InsulatorRegistry::new(cfg.merge_radius),
            tracker: DetectionTracker::new(cfg.track_radius, cfg.max_gap),
            captures_per_entry: Vec::new(),
            det_rng: seeds.child("detector").rng(),
            lidar_rng: seeds.child("lidar").rng(),
            ransac: seeds.child("ransac"),
            estimates: 0,
            path,
            scene,
            log,
        })
    }

    pub fn state(&self) -> MissionState {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn safety(&self) -> &SafetyRegion {
        &self.safety
    }

    pub fn exploration_path(&self) -> &ExplorationPath {
        &self.path
    }

    pub fn registry(&self) -> &InsulatorRegistry {
        &self.registry
    }

    pub fn buffer(&self) -> &WaypointBuffer {
        &self.buffer
    }

    /// Queues an inspection view directly, bypassing perception.
    pub fn enqueue_waypoint(&mut self, wp: InspectionWaypoint) -> bool {
        self.buffer.push(wp)
    }

    fn activity_end(&self) -> f64 {
        match &self.activity {
            Activity::Fly { traj, start } => start + traj.total_duration(),
            Activity::Dwell { until, .. } => *until,
            Activity::Idle => self.t,
        }
    }

    fn set_state(&mut self, to: MissionState) {
        debug_assert!(self.state.can_transition(to), "{} -> {}", self.state, to);
        self.log.events.push(LogEvent {
            t: self.t,
            kind: EventKind::Transition { from: self.state, to },
        });
        self.state = to;
    }

    fn update_pose(&mut self) {
        if let Activity::Fly { traj, start } = &self.activity {
            self.position = traj.sample(self.t - start).0;
        }
    }

    fn record_flight(&mut self, traj: &Trajectory, start: f64) {
        let total = traj.total_duration();
        let n = (total / self.cfg.log_dt).ceil() as usize;
        for k in 1..=n {
            let dt = (k as f64 * self.cfg.log_dt).min(total);
            self.log.flight_path.push(FlightSample {
                t: start + dt,
                position: traj.sample(dt).0,
                state: self.state,
            });
        }
        self.log.flight_time += total;
    }

    fn fly_to(&mut self, goal: Vec3) -> bool {
        match plan_safe(&self.position, &goal, &self.safety, &self.cfg.limits) {
            Ok(traj) => {
                self.activity = Activity::Fly { traj, start: self.t };
                true
            }
            Err(e) => {
                self.fail(format!("planning failed toward {goal:?}: {e}"));
                false
            }
        }
    }

    fn fail(&mut self, reason: String) {
        self.log.failed = true;
        self.log.events.push(LogEvent {
            t: self.t,
            kind: EventKind::Failure { reason },
        });
        self.buffer.clear();
        self.activity = Activity::Idle;
        self.set_state(MissionState::Finished);
    }

    fn start_next_inspection(&mut self) {
        let wp = *self.buffer.front().expect("buffer checked non-empty");
        self.yaw = wp.gaze_yaw();
        self.fly_to(wp.position);
    }

    /// Handles arrival at exploration waypoint `k`.
    fn arrive_at_path(&mut self, k: usize) {
        if !self.buffer.is_empty() {
            self.resume_idx = (k + 1).min(self.path.waypoints.len() - 1);
            self.set_state(MissionState::FlyingToInspection);
            self.start_next_inspection();
        } else if k + 1 < self.path.waypoints.len() {
            self.explore_idx = k + 1;
            let p = self.path.waypoints[k + 1];
            self.yaw = p.gaze_yaw;
            self.fly_to(p.position);
        } else {
            self.activity = Activity::Idle;
            self.set_state(MissionState::Finished);
        }
    }

    fn finish_activity(&mut self) {
        let act = std::mem::replace(&mut self.activity, Activity::Idle);
        match &act {
            Activity::Fly { traj, start } => {
                self.record_flight(traj, *start);
                self.position = traj.goal().unwrap_or(self.position);
            }
            Activity::Dwell { start, until } => {
                self.log.dwell_time += until - start;
                self.log.flight_path.push(FlightSample {
                    t: *until,
                    position: self.position,
                    state: self.state,
                });
            }
            Activity::Idle => {}
        }
        match self.state {
            MissionState::Exploring => {
                let k = self.explore_idx;
                self.arrive_at_path(k);
            }
            MissionState::FlyingToInspection => {
                let wp = *self.buffer.front().expect("flying toward a queued view");
                if (self.position - wp.position).norm() > self.cfg.arrival_tolerance {
                    self.fail("inspection waypoint not reached".into());
                    return;
                }
                self.set_state(MissionState::Capturing);
                self.activity = Activity::Dwell {
                    start: self.t,
                    until: self.t + self.cfg.capture_dwell,
                };
            }
            MissionState::Capturing => {
                let wp = self.buffer.pop().expect("capturing a queued view");
                self.log.captures.push(CaptureRecord {
                    insulator_id: wp.insulator_id,
                    waypoint: wp,
                    t: self.t,
                });
                self.log.events.push(LogEvent {
                    t: self.t,
                    kind: EventKind::Capture {
                        insulator_id: wp.insulator_id,
                        position: wp.position,
                    },
                });
                if let Some(n) = self.captures_per_entry.get_mut(wp.insulator_id as usize) {
                    *n += 1;
                    if *n >= self.cfg.per_insulator {
                        self.registry.entries[wp.insulator_id as usize].inspected = true;
                    }
                }
                if self.buffer.is_empty() {
                    self.set_state(MissionState::ReturningToPath);
                    let p = self.path.waypoints[self.resume_idx];
                    self.yaw = p.gaze_yaw;
                    self.fly_to(p.position);
                } else {
                    self.set_state(MissionState::FlyingToInspection);
                    self.start_next_inspection();
                }
            }
            MissionState::ReturningToPath => {
                self.set_state(MissionState::Exploring);
                let k = self.resume_idx;
                self.explore_idx = k;
                self.arrive_at_path(k);
            }
            MissionState::Finished => {}
        }
    }

    /// Where the current activity leaves the vehicle.
    fn next_stop(&self) -> Vec3 {
        match &self.activity {
            Activity::Fly { traj, .. } => traj.goal().unwrap_or(self.position),
            _ => self.position,
        }
    }

    fn body_pose(&self) -> RigidTransform {
        RigidTransform::from_yaw(self.yaw, self.position, Frame::Body, Frame::World)
    }

    fn detection_tick(&mut self) {
        let body = self.body_pose();
        let cam = self.scene.camera_pose(&body);
        let k = *self.scene.camera();
        let dets = simulate_detection(&self.scene, &cam, &k, self.t, &mut self.det_rng);
        if dets.is_empty() {
            return;
        }
        let margin = self.cfg.scan_margin_deg.to_radians();
        let windows: Vec<ScanWindow> = dets
            .iter()
            .map(|d| ScanWindow::from_bbox(&self.scene, &d.bbox, margin))
            .collect();
        let lidar_pose = self.scene.lidar_pose(&body);
        let cloud = simulate_lidar_scan_windowed(&self.scene, &lidar_pose, self.t, &mut self.lidar_rng, &windows);
        let t_bl = *self.scene.t_bl();
        let t_cb = self.scene.t_cb();
        let proj = project_cloud(&cloud, &t_bl, &t_cb, &k);
        for det in &dets {
            let fc = filter_by_bbox(&cloud, &proj, &det.bbox, &t_bl).with_body_pose(body);
            let Some(anchor) = bbox_anchor(&self.scene, &fc) else {
                continue;
            };
            let Ok(Some(cum)) = self.tracker.push(anchor, fc) else {
                continue;
            };
            let mut params = self.cfg.localizer;
            params.rng_seed = self.ransac.index(self.estimates).seed();
            self.estimates += 1;
            let Ok(est) = localize(self.cfg.method, &cum, &params) else {
                continue;
            };
            let world = InsulatorEstimate {
                center: body.transform_point(&est.center),
                orientation: body.transform_vector(&est.orientation),
                ..est
            };
            let iou = reprojection_iou(&world, &cam, &k, &det.bbox);
            if iou < self.cfg.min_reprojection_iou {
                self.log.events.push(LogEvent {
                    t: self.t,
                    kind: EventKind::Rejected { center: world.center, iou },
                });
                continue;
            }
            self.handle_estimate(&world);
        }
    }

    fn handle_estimate(&mut self, est: &InsulatorEstimate) {
        let tower = self.safety.tower_center;
        match register_insulator(&mut self.registry, est, &self.position, &tower) {
            Registration::New(id) => {
                self.captures_per_entry.push(0);
                self.log.events.push(LogEvent {
                    t: self.t,
                    kind: EventKind::Registered {
                        id,
                        center: est.center,
                        orientation: est.orientation,
                    },
                });
                match compute_inspection_waypoints(
                    &est.center,
                    id,
                    self.cfg.inspection_standoff,
                    self.cfg.per_insulator,
                    &self.safety,
                ) {
                    Ok(mut wps) => {
                        // Views lie on an arc; walk it from the end nearest
                        // to where the vehicle will be when it gets there.
                        let from = self.buffer.back().map_or_else(|| self.next_stop(), |w| w.position);
                        if let (Some(first), Some(last)) = (wps.first(), wps.last()) {
                            if (last.position - from).norm() < (first.position - from).norm() {
                                wps.reverse();
                            }
                        }
                        let count = wps.into_iter().filter(|w| self.buffer.push(*w)).count();
                        self.log.events.push(LogEvent {
                            t: self.t,
                            kind: EventKind::WaypointsQueued { id, count },
                        });
                    }
                    Err(e) => self.log.events.push(LogEvent {
                        t: self.t,
                        kind: EventKind::Failure {
                            reason: format!("no inspection views for insulator {id}: {e}"),
                        },
                    }),
                }
            }
            Registration::Duplicate(id) => self.log.events.push(LogEvent {
                t: self.t,
                kind: EventKind::Duplicate { id },
            }),
            Registration::FarSide => self.log.events.push(LogEvent {
                t: self.t,
                kind: EventKind::FarSide { center: est.center },
            }),
        }
    }

    /// Advances the simulation clock by `dt`, processing every arrival,
    /// dwell end and detection tick inside the interval in time order.
    pub fn step(&mut self, dt: f64) {
        let target = self.t + dt;
        if matches!(self.activity, Activity::Idle) && self.state != MissionState::Finished {
            self.finish_activity();
        }
        while self.state != MissionState::Finished {
            let end = self.activity_end();
            let tick = self.next_tick;
            if end.min(tick) > target {
                break;
            }
            if end <= tick {
                self.t = end;
                self.finish_activity();
            } else {
                self.t = tick;
                self.update_pose();
                self.detection_tick();
                self.next_tick = tick + self.tick_period;
            }
        }
        if self.state != MissionState::Finished {
            self.t = target;
            self.update_pose();
        }
    }

    pub fn is_finished(&self) -> bool {
        self.state == MissionState::Finished
    }

    pub fn into_log(mut self) -> MissionLog {
        self.log.total_duration = self.t;
        self.log.registry = self.registry.clone();
        self.log
    }
}

/// World point on the bbox-center ray at the median depth of the filtered
/// points; keys detections of the same insulator across ticks.
fn bbox_anchor(scene: &Scene, fc: &FilteredCloud) -> Option<Vec3> {
    if fc.points.is_empty() {
        return None;
    }
    let t_cb = scene.t_cb();
    let mut depths: Vec<f64> = fc.points.iter().map(|p| t_cb.transform_point(p).z).collect();
    depths.sort_by(f64::total_cmp);
    let z = depths[depths.len() / 2];
    let ray = scene.camera().pixel_ray(&fc.source_bbox.center());
    let p_b = t_cb.inverse().transform_point(&(ray * z));
    Some(fc.body_pose.transform_point(&p_b))
}

/// Intersection over union of `bbox` with the image hull of a nominal
/// insulator placed at the estimate. Zero when the estimate is behind the
/// camera.
pub fn reprojection_iou(
    est: &InsulatorEstimate,
    camera_pose: &RigidTransform,
    k: &CameraIntrinsics,
    bbox: &BBox,
) -> f64 {
    let to_cam = camera_pose.inverse();
    let half = est.orientation * (0.5 * INSULATOR_LENGTH);
    let mut hull: Option<BBox> = None;
    for end in [est.center - half, est.center + half] {
        let p = to_cam.transform_point(&end);
        let Ok(px) = project_to_image(k, &p) else {
            return 0.0;
        };
        let r = k.fx() * INSULATOR_RADIUS / p.z;
        let b = BBox {
            u_min: px.u - r,
            v_min: px.v - r,
            u_max: px.u + r,
            v_max: px.v + r,
        };
        hull = Some(match hull {
            None => b,
            Some(h) => BBox {
                u_min: h.u_min.min(b.u_min),
                v_min: h.v_min.min(b.v_min),
                u_max: h.u_max.max(b.u_max),
                v_max: h.v_max.max(b.v_max),
            },
        });
    }
    let h = hull.expect("two endpoints");
    let iw = (h.u_max.min(bbox.u_max) - h.u_min.max(bbox.u_min)).max(0.0);
    let ih = (h.v_max.min(bbox.v_max) - h.v_min.max(bbox.v_min)).max(0.0);
    let inter = iw * ih;
    let area = |b: &BBox| (b.u_max - b.u_min).max(0.0) * (b.v_max - b.v_min).max(0.0);
    let union = area(&h) + area(bbox) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Runs the inspection mission to completion.
pub fn run_mission(scene: &SceneConfig, cfg: &MissionConfig) -> Result<MissionLog, MissionError> {
    let mut sim = MissionSim::new(scene, cfg)?;
    let period = 1.0 / cfg.detection_rate_hz;
    while !sim.is_finished() {
        sim.step(period);
    }
    Ok(sim.into_log())
}

/// True when no logged position lies inside the safety region.
pub fn log_is_safe(log: &MissionLog, safety: &SafetyRegion) -> bool {
    log.flight_path.iter().all(|s| !safety.contains(&s.position))
}

/// Exploration-only flight time of the mission path (no stops).
pub fn exploration_duration(path: &ExplorationPath, limits: &DynamicLimits, safety: &SafetyRegion) -> Result<f64, PlanningError> {
    let mut total = 0.0;
    for w in path.waypoints.windows(2) {
        let traj = plan_safe(&w[0].position, &w[1].position, safety, limits)?;
        debug_assert!(check_safety(&traj, safety, DEFAULT_SAFETY_DT));
        total += traj.total_duration();
    }
    Ok(total)
}
