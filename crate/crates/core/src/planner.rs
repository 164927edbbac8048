//! Exploration paths, inspection waypoints, safety regions and
//! point-mass time-optimal trajectories.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::scene::TowerModel;

pub const DEFAULT_SAFETY_MARGIN: f64 = 1.5;
pub const DEFAULT_OVERFLIGHT_CLEARANCE: f64 = 2.0;
pub const DEFAULT_SAFETY_DT: f64 = 0.05;
pub const DEFAULT_AZIMUTH_OFFSET_DEG: f64 = 35.0;
/// Largest altitude step between exploration passes.
pub const MAX_SWEEP_SPACING: f64 = 4.0;
const PUSH_STEP: f64 = 0.25;
const PUSH_LIMIT: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanningError {
    #[error("standoff {standoff} m does not clear the safety half-width {min} m")]
    InfeasibleStandoff { standoff: f64, min: f64 },
    #[error("no feasible inspection waypoint")]
    NoFeasibleWaypoint,
    #[error("no feasible detour")]
    NoFeasibleDetour,
    #[error("exploration path violates the safety region")]
    UnsafePath,
}

/// Per-axis velocity and acceleration bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicLimits {
    pub v_max_h: f64,
    pub v_max_v: f64,
    pub a_max_h: f64,
    pub a_max_v: f64,
}

impl Default for DynamicLimits {
    /// Simulation limits: 3 m/s, 12 m/s².
    fn default() -> Self {
        Self::uniform(3.0, 12.0)
    }
}

impl DynamicLimits {
    pub fn uniform(v: f64, a: f64) -> Self {
        Self {
            v_max_h: v,
            v_max_v: v,
            a_max_h: a,
            a_max_v: a,
        }
    }

    /// Limits used on the real platform: 1 m/s, 3 m/s².
    pub fn real_world() -> Self {
        Self::uniform(1.0, 3.0)
    }

    fn axis(&self, k: usize) -> (f64, f64) {
        if k < 2 {
            (self.v_max_h, self.a_max_h)
        } else {
            (self.v_max_v, self.a_max_v)
        }
    }
}

/// Rest-to-rest time-optimal duration of a 1-D move.
pub fn min_time_1d(distance: f64, v_max: f64, a_max: f64) -> f64 {
    let d = distance.abs();
    if d == 0.0 {
        0.0
    } else if d >= v_max * v_max / a_max {
        d / v_max + v_max / a_max
    } else {
        2.0 * (d / a_max).sqrt()
    }
}

/// Trapezoidal (or triangular) rest-to-rest profile of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisProfile {
    pub start: f64,
    pub distance: f64,
    pub v_peak: f64,
    pub accel: f64,
    pub t_acc: f64,
    pub duration: f64,
}

impl AxisProfile {
    /// Profile covering `distance` in exactly `duration` seconds with
    /// acceleration `a`; `duration` must not undercut the 1-D optimum.
    fn with_duration(start: f64, distance: f64, v_max: f64, a: f64, duration: f64) -> Self {
        let d = distance.abs();
        if d == 0.0 || duration <= 0.0 {
            return Self {
                start,
                distance,
                v_peak: 0.0,
                accel: a,
                t_acc: 0.0,
                duration,
            };
        }
        let disc = (a * a * duration * duration - 4.0 * a * d).max(0.0);
        let v = ((a * duration - disc.sqrt()) / 2.0).min(v_max);
        Self {
            start,
            distance,
            v_peak: v,
            accel: a,
            t_acc: v / a,
            duration,
        }
    }

    /// Position and velocity at time `t`.
    pub fn sample(&self, t: f64) -> (f64, f64) {
        let sgn = self.distance.signum();
        if t <= 0.0 || self.v_peak == 0.0 {
            return (self.start, 0.0);
        }
        if t >= self.duration {
            return (self.start + self.distance, 0.0);
        }
        let d = self.distance.abs();
        let (s, v) = if t < self.t_acc {
            (0.5 * self.accel * t * t, self.accel * t)
        } else if t <= self.duration - self.t_acc {
            (
                0.5 * self.accel * self.t_acc * self.t_acc + self.v_peak * (t - self.t_acc),
                self.v_peak,
            )
        } else {
            let r = self.duration - t;
            (d - 0.5 * self.accel * r * r, self.accel * r)
        };
        (self.start + sgn * s.min(d), sgn * v)
    }

    /// Acceleration at time `t`.
    pub fn acceleration(&self, t: f64) -> f64 {
        if self.v_peak == 0.0 || t <= 0.0 || t >= self.duration {
            0.0
        } else if t < self.t_acc {
            self.distance.signum() * self.accel
        } else if t <= self.duration - self.t_acc {
            0.0
        } else {
            -self.distance.signum() * self.accel
        }
    }
}

/// One rest-to-rest segment with time-synchronized axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Vec3,
    pub goal: Vec3,
    pub axes: [AxisProfile; 3],
    pub duration: f64,
}

impl Segment {
    pub fn sample(&self, t: f64) -> (Vec3, Vec3) {
        if t >= self.duration {
            return (self.goal, Vec3::zeros());
        }
        let mut p = Vec3::zeros();
        let mut v = Vec3::zeros();
        for k in 0..3 {
            let (pk, vk) = self.axes[k].sample(t);
            p[k] = pk;
            v[k] = vk;
        }
        (p, v)
    }
}

/// Chain of rest-to-rest segments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn start(&self) -> Option<Vec3> {
        self.segments.first().map(|s| s.start)
    }

    pub fn goal(&self) -> Option<Vec3> {
        self.segments.last().map(|s| s.goal)
    }

    /// Position and velocity at `t`, clamped to the trajectory span.
    pub fn sample(&self, t: f64) -> (Vec3, Vec3) {
        let mut t = t.max(0.0);
        for (i, s) in self.segments.iter().enumerate() {
            if t < s.duration || i + 1 == self.segments.len() {
                return s.sample(t);
            }
            t -= s.duration;
        }
        (Vec3::zeros(), Vec3::zeros())
    }

    pub fn then(mut self, other: Trajectory) -> Trajectory {
        self.segments.extend(other.segments);
        self
    }

    /// Waypoints at the segment boundaries, including start and goal.
    pub fn knots(&self) -> Vec<Vec3> {
        let mut out: Vec<Vec3> = self.segments.iter().map(|s| s.start).collect();
        if let Some(g) = self.goal() {
            out.push(g);
        }
        out
    }
}

/// Per-axis time-optimal profiles stretched to the slowest axis.
pub fn plan_segment(start: &Vec3, goal: &Vec3, limits: &DynamicLimits) -> Trajectory {
    let delta = goal - start;
    let mut duration = 0.0f64;
    for k in 0..3 {
        let (v, a) = limits.axis(k);
        duration = duration.max(min_time_1d(delta[k], v, a));
    }
    let axes = std::array::from_fn(|k| {
        let (v, a) = limits.axis(k);
        if min_time_1d(delta[k], v, a) == duration && delta[k].abs() >= v * v / a {
            // the limiting trapezoidal axis keeps its exact cruise speed
            AxisProfile {
                start: start[k],
                distance: delta[k],
                v_peak: v,
                accel: a,
                t_acc: v / a,
                duration,
            }
        } else {
            AxisProfile::with_duration(start[k], delta[k], v, a, duration)
        }
    });
    Trajectory {
        segments: vec![Segment {
            start: *start,
            goal: *goal,
            axes,
            duration,
        }],
    }
}

/// Plans rest-to-rest through every point of `points` in order.
pub fn plan_through(points: &[Vec3], limits: &DynamicLimits) -> Trajectory {
    let mut t = Trajectory::default();
    for w in points.windows(2) {
        t = t.then(plan_segment(&w[0], &w[1], limits));
    }
    t
}

/// Box with a vertical axis, rotated by `yaw` about z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
}

impl SafetyBox {
    /// Strict interior test; the boundary counts as outside.
    pub fn contains(&self, p: &Vec3) -> bool {
        let d = p - self.center;
        let (s, c) = self.yaw.sin_cos();
        let lx = c * d.x + s * d.y;
        let ly = -s * d.x + c * d.y;
        lx.abs() < self.half_extents.x && ly.abs() < self.half_extents.y && d.z.abs() < self.half_extents.z
    }
}

/// Tower envelope plus conductor corridors the vehicle must stay out of.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyRegion {
    /// Tower base point.
    pub tower_center: Vec3,
    pub half_width: f64,
    /// Top of the envelope above the base.
    pub height: f64,
    pub margin: f64,
    /// Horizontal unit vector along the power line.
    pub line_direction: Vec3,
    pub tower_box: SafetyBox,
    pub line_corridors: Vec<SafetyBox>,
    pub clearance: f64,
}

/// Horizontal unit vector along the line, from neighbor positions when
/// available, else from the tower's own x axis.
pub fn line_direction(tower: &TowerModel, neighbors: &[Vec3]) -> Vec3 {
    let base = tower.base();
    let horiz = |v: Vec3| Vec3::new(v.x, v.y, 0.0).try_normalize(1e-9);
    let dir = match neighbors {
        [] => None,
        [n] => horiz(n - base),
        [a, b, ..] => horiz(a - b),
    };
    let d = dir.unwrap_or_else(|| {
        let x = tower.pose().transform_vector(&Vec3::x());
        horiz(x).unwrap_or(Vec3::x())
    });
    // canonical orientation keeps lateral sides stable
    if d.x < -1e-12 || (d.x.abs() <= 1e-12 && d.y < 0.0) {
        -d
    } else {
        d
    }
}

impl SafetyRegion {
    pub fn new(tower: &TowerModel, neighbors: &[Vec3], margin: f64) -> Self {
        let base = tower.base();
        let dir = line_direction(tower, neighbors);
        let yaw = dir.y.atan2(dir.x);
        let half_width = tower.width / 2.0 + margin;
        let height = tower.height + margin;
        let tower_box = SafetyBox {
            center: Vec3::new(base.x, base.y, base.z + 0.5 * (height - margin)),
            half_extents: Vec3::new(half_width, half_width, 0.5 * (height + margin)),
            yaw,
        };
        let mut line_corridors = Vec::new();
        let tips: Vec<Vec3> = tower
            .insulators
            .iter()
            .map(|i| i.center + i.axis * (i.length * 0.5))
            .collect();
        if !tips.is_empty() {
            for n in neighbors {
                let to_n = Vec3::new(n.x - base.x, n.y - base.y, 0.0);
                let span = to_n.norm();
                if span <= 2.0 * half_width {
                    continue;
                }
                let d = to_n / span;
                let lat = Vec3::z().cross(&d);
                let reach = tips.iter().map(|t| (t - base).dot(&lat).abs()).fold(0.0, f64::max);
                let z_lo = tips.iter().map(|t| t.z).fold(f64::INFINITY, f64::min) - margin;
                let z_hi = tips.iter().map(|t| t.z).fold(f64::NEG_INFINITY, f64::max) + margin;
                let len = span - 2.0 * half_width;
                let mid = base + d * (half_width + 0.5 * len);
                line_corridors.push(SafetyBox {
                    center: Vec3::new(mid.x, mid.y, 0.5 * (z_lo + z_hi)),
                    half_extents: Vec3::new(0.5 * len, reach + margin, 0.5 * (z_hi - z_lo)),
                    yaw: d.y.atan2(d.x),
                });
            }
        }
        Self {
            tower_center: base,
            half_width,
            height,
            margin,
            line_direction: dir,
            tower_box,
            line_corridors,
            clearance: DEFAULT_OVERFLIGHT_CLEARANCE,
        }
    }

    /// Outward lateral unit vector on the +lateral side.
    pub fn lateral(&self) -> Vec3 {
        Vec3::z().cross(&self.line_direction)
    }

    pub fn overflight_altitude(&self) -> f64 {
        self.tower_center.z + self.height + self.clearance
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.tower_box.contains(p) || self.line_corridors.iter().any(|c| c.contains(p))
    }
}

/// True iff no sample at spacing `dt` (plus the endpoint) is inside the region.
pub fn check_safety(traj: &Trajectory, safety: &SafetyRegion, dt: f64) -> bool {
    let total = traj.total_duration();
    let steps = (total / dt).ceil() as usize;
    for k in 0..=steps {
        let t = (k as f64 * dt).min(total);
        if safety.contains(&traj.sample(t).0) {
            return false;
        }
    }
    true
}

/// Route over the tower: a single apex above the tower center, or, when
/// that clips the envelope, climb / traverse / descend at the same altitude.
pub fn detour_via_overflight(
    start: &Vec3,
    goal: &Vec3,
    safety: &SafetyRegion,
    limits: &DynamicLimits,
) -> Result<Trajectory, PlanningError> {
    let alt = safety.overflight_altitude();
    let apex = Vec3::new(safety.tower_center.x, safety.tower_center.y, alt);
    let via_apex = plan_through(&[*start, apex, *goal], limits);
    if check_safety(&via_apex, safety, DEFAULT_SAFETY_DT) {
        return Ok(via_apex);
    }
    let up = Vec3::new(start.x, start.y, alt.max(start.z));
    let over = Vec3::new(goal.x, goal.y, alt.max(goal.z));
    let stepped = plan_through(&[*start, up, apex, over, *goal], limits);
    if check_safety(&stepped, safety, DEFAULT_SAFETY_DT) {
        return Ok(stepped);
    }
    Err(PlanningError::NoFeasibleDetour)
}

/// Direct segment when it is safe, otherwise the overflight detour.
pub fn plan_safe(start: &Vec3, goal: &Vec3, safety: &SafetyRegion, limits: &DynamicLimits) -> Result<Trajectory, PlanningError> {
    let direct = plan_segment(start, goal, limits);
    if check_safety(&direct, safety, DEFAULT_SAFETY_DT) {
        Ok(direct)
    } else {
        detour_via_overflight(start, goal, safety, limits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub position: Vec3,
    pub gaze_yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationPath {
    pub waypoints: Vec<PathPoint>,
    pub standoff: f64,
}

/// Lawnmower passes on both lateral sides of the line: the +lateral side
/// bottom-up, over the top, then the -lateral side top-down.
pub fn build_exploration_path(
    tower: &TowerModel,
    neighbors: &[Vec3],
    standoff: f64,
    limits: &DynamicLimits,
    safety: &SafetyRegion,
) -> Result<ExplorationPath, PlanningError> {
    if !(standoff > safety.half_width) {
        return Err(PlanningError::InfeasibleStandoff {
            standoff,
            min: safety.half_width,
        });
    }
    let base = tower.base();
    let dir = line_direction(tower, neighbors);
    let lat = Vec3::z().cross(&dir);
    let z_lo = base.z + 0.4 * tower.height;
    let z_hi = base.z + 1.05 * tower.height;
    let levels = ((z_hi - z_lo) / MAX_SWEEP_SPACING).ceil().max(1.0) as usize + 1;
    let alts: Vec<f64> = (0..levels)
        .map(|i| z_lo + (z_hi - z_lo) * i as f64 / (levels - 1) as f64)
        .collect();
    let half_pass = tower.width / 2.0;
    let mut waypoints = Vec::new();
    for (side, order) in [(1.0, alts.clone()), (-1.0, alts.iter().rev().copied().collect())] {
        let normal = lat * side;
        let gaze = (-normal.y).atan2(-normal.x);
        let anchor = base + normal * standoff;
        if side < 0.0 {
            // cross over the top before sweeping the second side
            let cross = safety.overflight_altitude();
            let last = waypoints.last().map(|p: &PathPoint| p.position).unwrap_or(anchor);
            waypoints.push(PathPoint {
                position: Vec3::new(last.x, last.y, cross),
                gaze_yaw: gaze + std::f64::consts::PI,
            });
            waypoints.push(PathPoint {
                position: Vec3::new(anchor.x, anchor.y, cross) + dir * half_pass,
                gaze_yaw: gaze,
            });
        }
        for (i, z) in order.iter().enumerate() {
            let s = if i % 2 == 0 { -1.0 } else { 1.0 } * side;
            for e in [s, -s] {
                let p = anchor + dir * (e * half_pass);
                waypoints.push(PathPoint {
                    position: Vec3::new(p.x, p.y, *z),
                    gaze_yaw: gaze,
                });
            }
        }
    }
    waypoints.dedup_by(|a, b| (a.position - b.position).norm() < 1e-9);
    let path = ExplorationPath { waypoints, standoff };
    for w in path.waypoints.windows(2) {
        let seg = plan_segment(&w[0].position, &w[1].position, limits);
        if !check_safety(&seg, safety, DEFAULT_SAFETY_DT) {
            return Err(PlanningError::UnsafePath);
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InspectionWaypoint {
    pub position: Vec3,
    pub gaze_target: Vec3,
    pub insulator_id: u32,
}

impl InspectionWaypoint {
    pub fn gaze_yaw(&self) -> f64 {
        let d = self.gaze_target - self.position;
        d.y.atan2(d.x)
    }
}

/// Azimuth offsets (radians) for `n` views spread over ±`spread`.
pub fn view_azimuths(n: usize, spread: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -spread + 2.0 * spread * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Views on a horizontal circle of radius `standoff` around `center`,
/// symmetric about the outward normal of the tower side holding it.
pub fn compute_inspection_waypoints(
    center: &Vec3,
    insulator_id: u32,
    standoff: f64,
    per_insulator: usize,
    safety: &SafetyRegion,
) -> Result<Vec<InspectionWaypoint>, PlanningError> {
    if !(standoff > 0.0) {
        return Err(PlanningError::NoFeasibleWaypoint);
    }
    let lat = safety.lateral();
    let side = if (center - safety.tower_center).dot(&lat) < 0.0 { -1.0 } else { 1.0 };
    let normal = lat * side;
    let tangent = Vec3::z().cross(&normal);
    let mut out = Vec::with_capacity(per_insulator);
    for a in view_azimuths(per_insulator, DEFAULT_AZIMUTH_OFFSET_DEG.to_radians()) {
        let mut p = center + (normal * a.cos() + tangent * a.sin()) * standoff;
        let mut pushes = 0;
        while safety.contains(&p) {
            if pushes == PUSH_LIMIT {
                return Err(PlanningError::NoFeasibleWaypoint);
            }
            p += normal * PUSH_STEP;
            pushes += 1;
        }
        out.push(InspectionWaypoint {
            position: p,
            gaze_target: *center,
            insulator_id,
        });
    }
    Ok(out)
}

/// Yaw of the gaze toward the tower from the +lateral side.
pub fn facing_yaw(normal: &Vec3) -> f64 {
    (-normal.y).atan2(-normal.x)
}

/// Heading of a horizontal vector, with a vertical fallback.
pub fn heading(v: &Vec3) -> f64 {
    if v.x.abs() < 1e-12 && v.y.abs() < 1e-12 {
        FRAC_PI_2
    } else {
        v.y.atan2(v.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Frame, RigidTransform};
    use crate::rng::SeedStream;
    use crate::scene::{build_tower, TowerKind};
    use proptest::prelude::*;
    use rand::Rng;

    fn tower(kind: TowerKind) -> TowerModel {
        build_tower(kind, &RigidTransform::identity(Frame::World, Frame::World), 25.0, 10.0).unwrap()
    }

    fn neighbors() -> Vec<Vec3> {
        vec![Vec3::new(50.0, 0.0, 0.0), Vec3::new(-50.0, 0.0, 0.0)]
    }

    #[test]
    fn closed_form_examples() {
        let l = DynamicLimits::default();
        let t = plan_segment(&Vec3::zeros(), &Vec3::new(9.0, 0.0, 0.0), &l);
        assert!((t.total_duration() - 3.25).abs() < 1e-12);
        let t = plan_segment(&Vec3::zeros(), &Vec3::new(0.1, 0.0, 0.0), &l);
        assert!((t.total_duration() - 2.0 * (0.1f64 / 12.0).sqrt()).abs() < 1e-12);
        let t = plan_segment(&Vec3::new(1.0, 2.0, 3.0), &Vec3::new(1.0, 2.0, 3.0), &l);
        assert_eq!(t.total_duration(), 0.0);
        assert_eq!(t.sample(0.0).0, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn endpoints_and_bounds_hold() {
        let l = DynamicLimits { v_max_h: 3.0, v_max_v: 2.0, a_max_h: 12.0, a_max_v: 4.0 };
        let mut rng = SeedStream::new(3).rng();
        for _ in 0..200 {
            let a = Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(0.0..30.0));
            let b = Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(0.0..30.0));
            let t = plan_segment(&a, &b, &l);
            let (p0, v0) = t.sample(0.0);
            let (p1, v1) = t.sample(t.total_duration());
            assert!((p0 - a).norm() < 1e-9 && v0.norm() < 1e-9);
            assert!((p1 - b).norm() < 1e-9 && v1.norm() < 1e-9);
            // per-axis bounds cap the speed at the norm of the axis limits
            let v_norm = (2.0 * 3.0f64 * 3.0 + 2.0 * 2.0).sqrt();
            assert!(t.total_duration() >= (b - a).norm() / v_norm - 1e-9);
            let seg = &t.segments[0];
            let n = 400;
            let mut prev = p0;
            for i in 0..=n {
                let s = t.total_duration() * i as f64 / n as f64;
                let (p, v) = t.sample(s);
                for k in 0..3 {
                    let (vm, am) = l.axis(k);
                    assert!(v[k].abs() <= vm + 1e-9);
                    assert!(seg.axes[k].acceleration(s).abs() <= am + 1e-9);
                }
                assert!((p - prev).norm() <= 3.0 * 1.8 * t.total_duration() / n as f64 + 1e-9);
                prev = p;
            }
        }
    }

    #[test]
    fn safety_region_layout() {
        let tw = tower(TowerKind::A);
        let s = SafetyRegion::new(&tw, &neighbors(), 1.5);
        assert!((s.half_width - 6.5).abs() < 1e-12);
        assert!(s.contains(&Vec3::new(0.0, 0.0, 10.0)));
        assert!(s.contains(&Vec3::new(6.4, -6.4, 26.4)));
        assert!(!s.contains(&Vec3::new(0.0, 0.0, 26.6)));
        assert!(!s.contains(&Vec3::new(0.0, 6.5, 10.0)));
        assert_eq!(s.line_corridors.len(), 2);
        // conductors toward a neighbor are inside a corridor
        assert!(s.contains(&Vec3::new(30.0, 4.0, 18.5)));
        assert!(!s.contains(&Vec3::new(30.0, 12.0, 18.5)));
    }

    #[test]
    fn safety_check_examples() {
        let s = SafetyRegion::new(&tower(TowerKind::B), &neighbors(), 1.5);
        let l = DynamicLimits::default();
        let pierce = plan_segment(&Vec3::new(0.0, 12.0, 10.0), &Vec3::new(0.0, -12.0, 10.0), &l);
        assert!(!check_safety(&pierce, &s, 0.05));
        let outside = plan_segment(&Vec3::new(-5.0, 12.0, 10.0), &Vec3::new(5.0, 12.0, 22.0), &l);
        assert!(check_safety(&outside, &s, 0.05));
    }

    #[test]
    fn grazing_segments_match_dense_oracle() {
        let s = SafetyRegion::new(&tower(TowerKind::B), &[], 1.5);
        let l = DynamicLimits::default();
        for (k, off) in [6.5, 6.49, 6.51, 6.45, 6.55].iter().enumerate() {
            let t = plan_segment(&Vec3::new(-10.0, *off, 5.0), &Vec3::new(10.0, *off, 8.0), &l);
            let dense = {
                let total = t.total_duration();
                let n = (total / 0.0005).ceil() as usize;
                (0..=n).all(|i| !s.contains(&t.sample((i as f64 * 0.0005).min(total)).0))
            };
            assert_eq!(check_safety(&t, &s, 0.05), dense, "case {k}");
        }
    }

    #[test]
    fn exploration_path_layout() {
        let tw = tower(TowerKind::A);
        let s = SafetyRegion::new(&tw, &neighbors(), 1.5);
        let l = DynamicLimits::default();
        let path = build_exploration_path(&tw, &neighbors(), 12.0, &l, &s).unwrap();
        let sweep: Vec<&PathPoint> = path.waypoints.iter().filter(|p| (p.position.y.abs() - 12.0).abs() < 1e-9 && p.position.z < s.overflight_altitude()).collect();
        assert!(sweep.iter().any(|p| p.position.y > 0.0));
        assert!(sweep.iter().any(|p| p.position.y < 0.0));
        for p in &sweep {
            // gaze points at the tower axis
            let g = Vec3::new(p.gaze_yaw.cos(), p.gaze_yaw.sin(), 0.0);
            assert!(g.dot(&(-Vec3::new(0.0, p.position.y, 0.0)).normalize()) > 1.0 - 1e-9);
        }
        let zs: Vec<f64> = sweep.iter().map(|p| p.position.z).collect();
        assert!((zs.iter().cloned().fold(f64::INFINITY, f64::min) - 10.0).abs() < 1e-9);
        assert!((zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 26.25).abs() < 1e-9);
        let pts: Vec<Vec3> = path.waypoints.iter().map(|p| p.position).collect();
        assert!(check_safety(&plan_through(&pts, &l), &s, 0.05));
    }

    #[test]
    fn infeasible_standoff() {
        let tw = tower(TowerKind::A);
        let s = SafetyRegion::new(&tw, &neighbors(), 1.0);
        let l = DynamicLimits::default();
        assert!(build_exploration_path(&tw, &neighbors(), 8.0, &l, &s).is_ok());
        assert!(matches!(
            build_exploration_path(&tw, &neighbors(), 5.0, &l, &s),
            Err(PlanningError::InfeasibleStandoff { .. })
        ));
    }

    #[test]
    fn inspection_waypoint_examples() {
        let s = SafetyRegion::new(&tower(TowerKind::A), &neighbors(), 1.5);
        let c = Vec3::new(0.0, 4.0, 20.0);
        let wps = compute_inspection_waypoints(&c, 3, 5.0, 2, &s).unwrap();
        assert_eq!(wps.len(), 2);
        // symmetric about the outward normal
        assert!((wps[0].position.x + wps[1].position.x).abs() < 1e-9);
        assert!((wps[0].position.y - wps[1].position.y).abs() < 1e-9);
        assert!(wps.iter().all(|w| w.position.y > 4.0 && !s.contains(&w.position) && w.gaze_target == c));

        let far = compute_inspection_waypoints(&c, 3, 8.0, 2, &s).unwrap();
        for w in &far {
            assert!(((w.position - c).norm() - 8.0).abs() < 1e-9);
        }
        let one = compute_inspection_waypoints(&c, 3, 8.0, 1, &s).unwrap();
        assert!((one[0].position - Vec3::new(0.0, 12.0, 20.0)).norm() < 1e-9);
        let lower = compute_inspection_waypoints(&Vec3::new(0.9, -4.0, 15.0), 1, 8.0, 1, &s).unwrap();
        assert!(lower[0].position.y < -4.0);
    }

    #[test]
    fn waypoint_inside_region_is_pushed_out() {
        let s = SafetyRegion::new(&tower(TowerKind::B), &neighbors(), 1.5);
        let c = Vec3::new(0.0, 1.8, 21.25);
        let wps = compute_inspection_waypoints(&c, 0, 2.0, 2, &s).unwrap();
        for w in &wps {
            assert!(!s.contains(&w.position));
            assert_eq!(w.gaze_target, c);
        }
    }

    #[test]
    fn detour_examples() {
        let tw = tower(TowerKind::A);
        let s = SafetyRegion::new(&tw, &neighbors(), 1.5);
        let l = DynamicLimits::default();
        let a = Vec3::new(4.0, 10.0, 20.0);
        let b = Vec3::new(-4.0, -10.0, 15.0);
        assert!(!check_safety(&plan_segment(&a, &b, &l), &s, 0.05));
        let d = detour_via_overflight(&a, &b, &s, &l).unwrap();
        assert!(check_safety(&d, &s, 0.05));
        let apex = d.knots().into_iter().find(|p| p.x.abs() < 1e-12 && p.y.abs() < 1e-12).unwrap();
        assert!((apex.z - 28.5).abs() < 1e-6);
        let sum: f64 = d.knots().windows(2).map(|w| plan_segment(&w[0], &w[1], &l).total_duration()).sum();
        assert!((d.total_duration() - sum).abs() < 1e-9);

        // high endpoints reach the apex directly
        let hi = detour_via_overflight(&Vec3::new(0.0, 12.0, 27.0), &Vec3::new(0.0, -12.0, 27.0), &s, &l).unwrap();
        assert_eq!(hi.segments.len(), 2);

        let same = detour_via_overflight(&Vec3::new(-5.0, 12.0, 20.0), &Vec3::new(5.0, 12.0, 20.0), &s, &l).unwrap();
        assert!(same.total_duration() > plan_segment(&Vec3::new(-5.0, 12.0, 20.0), &Vec3::new(5.0, 12.0, 20.0), &l).total_duration());
    }

    proptest! {
        #[test]
        fn one_dimensional_closed_form(d in -50.0f64..50.0, v in 0.5f64..5.0, a in 1.0f64..20.0) {
            let l = DynamicLimits::uniform(v, a);
            let t = plan_segment(&Vec3::zeros(), &Vec3::new(d, 0.0, 0.0), &l).total_duration();
            let dd = d.abs();
            let expected = if dd >= v * v / a { dd / v + v / a } else { 2.0 * (dd / a).sqrt() };
            prop_assert!((t - expected).abs() < 1e-9);
        }

        #[test]
        fn sync_keeps_axes_within_limits(x in -30.0f64..30.0, y in -30.0f64..30.0, z in -10.0f64..10.0) {
            let l = DynamicLimits { v_max_h: 3.0, v_max_v: 1.0, a_max_h: 12.0, a_max_v: 3.0 };
            let t = plan_segment(&Vec3::zeros(), &Vec3::new(x, y, z), &l);
            let seg = &t.segments[0];
            for k in 0..3 {
                let (vm, _) = l.axis(k);
                prop_assert!(seg.axes[k].v_peak <= vm + 1e-9);
                prop_assert!((seg.axes[k].duration - t.total_duration()).abs() < 1e-12);
            }
            let (p, _) = t.sample(t.total_duration());
            prop_assert!((p - Vec3::new(x, y, z)).norm() < 1e-9);
            let (pm, _) = t.sample(0.5 * t.total_duration());
            for k in 0..3 {
                // each axis moves monotonically between its endpoints
                prop_assert!(pm[k].min(0.0) - 1e-9 <= pm[k] && pm[k] <= pm[k].max(0.0) + 1e-9);
                prop_assert!(pm[k].abs() <= [x, y, z][k].abs() + 1e-9);
            }
        }
    }
}
