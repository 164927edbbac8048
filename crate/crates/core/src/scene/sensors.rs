//! Simulated LiDAR and bounding-box detector.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Scene, SurfaceTag};
use crate::fusion::PointCloud;
use crate::geometry::{
    project_to_image, CameraIntrinsics, Frame, ImagePoint, RigidTransform, Vec3,
};
use crate::rng::{mix64, normal_from_hash, unit_from_hash, SimRng};

const LIDAR_MIN_RANGE: f64 = 0.1;
const INDEX_BIN_DEG: f64 = 2.0;

/// Axis-aligned image rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox {
    pub fn contains(&self, p: &ImagePoint) -> bool {
        p.u >= self.u_min && p.u <= self.u_max && p.v >= self.v_min && p.v <= self.v_max
    }

    pub fn center(&self) -> ImagePoint {
        ImagePoint {
            u: 0.5 * (self.u_min + self.u_max),
            v: 0.5 * (self.v_min + self.v_max),
        }
    }

    /// Shrinks each side by `px` (negative grows).
    pub fn shrink(&self, px: f64) -> BBox {
        BBox {
            u_min: self.u_min + px,
            v_min: self.v_min + px,
            u_max: self.u_max - px,
            v_max: self.v_max - px,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub bbox: BBox,
    pub timestamp: f64,
    pub camera_pose_world: RigidTransform,
    /// Ground-truth tag for evaluation only; the pipeline never reads it.
    pub true_insulator_id: Option<u32>,
}

/// Angular window in the LiDAR frame (radians); azimuth may wrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanWindow {
    pub az_min: f64,
    pub az_max: f64,
    pub el_min: f64,
    pub el_max: f64,
}

impl ScanWindow {
    /// Window covering the LiDAR rays that can land inside `bbox`, padded by
    /// `margin` radians to absorb LiDAR-camera parallax.
    pub fn from_bbox(scene: &Scene, bbox: &BBox, margin: f64) -> ScanWindow {
        let k = scene.camera();
        let r_lc = scene.t_bl().inverse().rotation() * scene.t_cb().inverse().rotation();
        let mut dirs = Vec::with_capacity(20);
        for s in 0..5 {
            let f = s as f64 / 4.0;
            let u = bbox.u_min + f * (bbox.u_max - bbox.u_min);
            let v = bbox.v_min + f * (bbox.v_max - bbox.v_min);
            for p in [
                ImagePoint { u, v: bbox.v_min },
                ImagePoint { u, v: bbox.v_max },
                ImagePoint { u: bbox.u_min, v },
                ImagePoint { u: bbox.u_max, v },
            ] {
                dirs.push((r_lc * k.pixel_ray(&p)).normalize());
            }
        }
        let center = (r_lc * k.pixel_ray(&bbox.center())).normalize();
        let az_c = center.y.atan2(center.x);
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let (mut el_lo, mut el_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for d in &dirs {
            let az = d.y.atan2(d.x);
            let delta = (az - az_c + PI).rem_euclid(TAU) - PI;
            lo = lo.min(delta);
            hi = hi.max(delta);
            let el = d.z.clamp(-1.0, 1.0).asin();
            el_lo = el_lo.min(el);
            el_hi = el_hi.max(el);
        }
        ScanWindow {
            az_min: az_c + lo - margin,
            az_max: az_c + hi + margin,
            el_min: el_lo - margin,
            el_max: el_hi + margin,
        }
    }
}

struct RayGrid {
    h: usize,
    v: usize,
    hfov: f64,
    vfov: f64,
    d_az: f64,
    d_el: f64,
    off_az: f64,
    off_el: f64,
    wraps: bool,
}

impl RayGrid {
    fn new(scene: &Scene, scan_seed: u64) -> Self {
        let p = &scene.config().lidar;
        let hfov = p.horizontal_fov.to_radians();
        let vfov = p.vertical_fov.to_radians();
        let h = p.horizontal_rays as usize;
        let v = p.vertical_rays as usize;
        Self {
            h,
            v,
            hfov,
            vfov,
            d_az: hfov / h as f64,
            d_el: vfov / v as f64,
            // per-scan sub-cell jitter emulates a non-repetitive pattern
            off_az: unit_from_hash(mix64(scan_seed ^ 0xA5A5)),
            off_el: unit_from_hash(mix64(scan_seed ^ 0x5A5A)),
            wraps: p.horizontal_fov >= 360.0,
        }
    }

    fn angles(&self, idx: usize) -> (f64, f64) {
        let i = idx % self.h;
        let j = idx / self.h;
        let az = -0.5 * self.hfov + (i as f64 + self.off_az) * self.d_az;
        let el = -0.5 * self.vfov + (j as f64 + self.off_el) * self.d_el;
        (az, el)
    }

    fn window_indices(&self, w: &ScanWindow, out: &mut BTreeSet<usize>) {
        let j0 = ((w.el_min + 0.5 * self.vfov) / self.d_el - self.off_el).ceil().max(0.0) as i64;
        let j1 = ((w.el_max + 0.5 * self.vfov) / self.d_el - self.off_el)
            .floor()
            .min(self.v as f64 - 1.0) as i64;
        let mut i0 = ((w.az_min + 0.5 * self.hfov) / self.d_az - self.off_az).ceil() as i64;
        let mut i1 = ((w.az_max + 0.5 * self.hfov) / self.d_az - self.off_az).floor() as i64;
        if self.wraps {
            if i1 - i0 + 1 >= self.h as i64 {
                i0 = 0;
                i1 = self.h as i64 - 1;
            }
        } else {
            i0 = i0.max(0);
            i1 = i1.min(self.h as i64 - 1);
        }
        for j in j0..=j1 {
            for i in i0..=i1 {
                let i = i.rem_euclid(self.h as i64) as usize;
                out.insert(j as usize * self.h + i);
            }
        }
    }
}

/// Full scan from a LiDAR at `sensor_pose` (maps L into W). Points are
/// returned in the LiDAR frame, ordered by ray index.
pub fn simulate_lidar_scan(
    scene: &Scene,
    sensor_pose: &RigidTransform,
    timestamp: f64,
    rng: &mut SimRng,
) -> PointCloud {
    let scan_seed: u64 = rng.random();
    let grid = RayGrid::new(scene, scan_seed);
    cast_rays(scene, sensor_pose, timestamp, scan_seed, &grid, 0..grid.h * grid.v)
}

/// Same scan as [`simulate_lidar_scan`] restricted to the rays inside the
/// given windows. Every returned point is bit-identical to the matching
/// point of the full scan drawn from the same generator state.
pub fn simulate_lidar_scan_windowed(
    scene: &Scene,
    sensor_pose: &RigidTransform,
    timestamp: f64,
    rng: &mut SimRng,
    windows: &[ScanWindow],
) -> PointCloud {
    let scan_seed: u64 = rng.random();
    let grid = RayGrid::new(scene, scan_seed);
    let mut idx = BTreeSet::new();
    for w in windows {
        grid.window_indices(w, &mut idx);
    }
    cast_rays(scene, sensor_pose, timestamp, scan_seed, &grid, idx.into_iter())
}

fn cast_rays(
    scene: &Scene,
    sensor_pose: &RigidTransform,
    timestamp: f64,
    scan_seed: u64,
    grid: &RayGrid,
    rays: impl Iterator<Item = usize>,
) -> PointCloud {
    let params = &scene.config().lidar;
    let mut points = Vec::new();
    let caster = scene.caster();
    if caster.is_empty() {
        return PointCloud::new(points, Frame::Lidar, timestamp);
    }
    let origin = *sensor_pose.translation();
    let r_wl = sensor_pose.rotation();
    let index = caster.angular_index(&origin, &r_wl.transpose(), params.max_range, INDEX_BIN_DEG);
    for idx in rays {
        let (az, el) = grid.angles(idx);
        let d_l = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        let d_w = r_wl * d_l;
        let Some(hit) =
            caster.cast_indexed(&index, az, el, &origin, &d_w, LIDAR_MIN_RANGE, params.max_range)
        else {
            continue;
        };
        let key = scan_seed ^ mix64(idx as u64);
        if params.dropout_prob > 0.0 && unit_from_hash(mix64(key ^ 1)) < params.dropout_prob {
            continue;
        }
        let mut range = hit.t;
        if params.range_noise_sigma > 0.0 {
            range += params.range_noise_sigma * normal_from_hash(mix64(key ^ 2), mix64(key ^ 3));
        }
        if range > LIDAR_MIN_RANGE {
            points.push(d_l * range);
        }
    }
    PointCloud::new(points, Frame::Lidar, timestamp)
}

/// Image-space extremes of a projected circle.
fn circle_extremes(
    k: &CameraIntrinsics,
    center: &Vec3,
    e1: &Vec3,
    e2: &Vec3,
    r: f64,
) -> Option<[f64; 4]> {
    let min_z = center.z - r * (e1.z * e1.z + e2.z * e2.z).sqrt();
    if min_z <= 1e-6 {
        return None;
    }
    let point = |t: f64| center + (e1 * t.cos() + e2 * t.sin()) * r;
    let mut ts: Vec<f64> = (0..8).map(|i| i as f64 * TAU / 8.0).collect();
    if k.distortion().is_zero() {
        // stationary points of x/z and y/z along the circle
        for axis in 0..2 {
            let (a0, a1, a2) = (center[axis], r * e1[axis], r * e2[axis]);
            let (b0, b1, b2) = (center.z, r * e1.z, r * e2.z);
            let p = a0 * b1 - a1 * b0;
            let q = a2 * b0 - a0 * b2;
            let c = a2 * b1 - a1 * b2;
            let rho = p.hypot(q);
            if rho > 1e-15 && (c / rho).abs() <= 1.0 {
                let phi = q.atan2(p);
                let s = (-c / rho).asin();
                ts.push(s - phi);
                ts.push(PI - s - phi);
            }
        }
    } else {
        ts = (0..64).map(|i| i as f64 * TAU / 64.0).collect();
    }
    let mut ext = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for t in ts {
        let s = project_to_image(k, &point(t)).ok()?;
        ext[0] = ext[0].min(s.u);
        ext[1] = ext[1].min(s.v);
        ext[2] = ext[2].max(s.u);
        ext[3] = ext[3].max(s.v);
    }
    Some(ext)
}

/// Detector stand-in: one noisy bounding box per visible insulator.
pub fn simulate_detection(
    scene: &Scene,
    camera_pose: &RigidTransform,
    k: &CameraIntrinsics,
    timestamp: f64,
    rng: &mut SimRng,
) -> Vec<DetectionEvent> {
    let params = &scene.config().detector;
    let t_cw = camera_pose.inverse();
    let origin = *camera_pose.translation();
    let mut out = Vec::new();
    for ins in scene.insulators() {
        let c_cam = t_cw.transform_point(&ins.center);
        if c_cam.z <= 0.0 || c_cam.norm() > params.detection_range {
            continue;
        }
        let Ok(center_px) = project_to_image(k, &c_cam) else {
            continue;
        };
        if !k.contains(&center_px) {
            continue;
        }
        let to_center = ins.center - origin;
        let dist = to_center.norm();
        let dir = to_center / dist;
        match scene.caster().cast(&origin, &dir, 0.0, dist) {
            Some(hit) if hit.tag == SurfaceTag::Insulator(ins.id) => {}
            _ => continue,
        }
        let axis_c = t_cw.transform_vector(&ins.axis);
        let helper = if axis_c.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = axis_c.cross(&helper).normalize();
        let e2 = axis_c.cross(&e1);
        let half = axis_c * (ins.length * 0.5);
        let ends = [c_cam - half, c_cam + half];
        let Some(a) = circle_extremes(k, &ends[0], &e1, &e2, ins.radius) else {
            continue;
        };
        let Some(b) = circle_extremes(k, &ends[1], &e1, &e2, ins.radius) else {
            continue;
        };
        let miss: f64 = rng.random();
        let noise: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if miss < params.false_negative_prob {
            continue;
        }
        let s = params.bbox_pixel_noise_sigma;
        let infl = params.bbox_inflation;
        let w = f64::from(k.width());
        let h = f64::from(k.height());
        let bbox = BBox {
            u_min: (a[0].min(b[0]) - infl + s * noise[0]).clamp(0.0, w),
            v_min: (a[1].min(b[1]) - infl + s * noise[1]).clamp(0.0, h),
            u_max: (a[2].max(b[2]) + infl + s * noise[2]).clamp(0.0, w),
            v_max: (a[3].max(b[3]) + infl + s * noise[3]).clamp(0.0, h),
        };
        if bbox.u_min >= bbox.u_max || bbox.v_min >= bbox.v_max {
            continue;
        }
        out.push(DetectionEvent {
            bbox,
            timestamp,
            camera_pose_world: *camera_pose,
            true_insulator_id: Some(ins.id),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::compose;
    use crate::rng::SeedStream;
    use crate::scene::{
        build_tower, DetectorParams, LidarParams, Primitive, RigConfig, SceneConfig, TowerKind,
        TowerModel,
    };
    use crate::geometry::PoseConfig;
    use crate::scene::tower::{InsulatorSpec, StructureSegment};

    fn bare_config(insulators: Vec<InsulatorSpec>, segments: Vec<StructureSegment>) -> SceneConfig {
        SceneConfig {
            seed: 1,
            towers: vec![TowerModel {
                kind: TowerKind::B,
                pose: PoseConfig {
                    translation: [0.0; 3],
                    ypr_deg: [0.0; 3],
                },
                height: 25.0,
                width: 10.0,
                insulators,
                structure_segments: segments,
            }],
            neighbors: vec![],
            lidar: LidarParams::default().noiseless(),
            detector: DetectorParams::default().noiseless(),
            camera: CameraIntrinsics::pinhole(450.0, 450.0, 320.0, 240.0, 640, 480).unwrap(),
            rig: RigConfig::default(),
        }
    }

    fn vertical_insulator(at: Vec3) -> InsulatorSpec {
        InsulatorSpec {
            id: 0,
            center: at,
            axis: Vec3::new(0.0, 0.0, -1.0),
            length: 1.2,
            radius: 0.12,
        }
    }

    fn body_at(p: Vec3, yaw: f64) -> RigidTransform {
        RigidTransform::from_yaw(yaw, p, Frame::Body, Frame::World)
    }

    #[test]
    fn empty_scene_gives_empty_cloud() {
        let scene = Scene::new_unchecked(bare_config(vec![], vec![])).unwrap();
        let pose = scene.lidar_pose(&body_at(Vec3::zeros(), 0.0));
        let cloud = simulate_lidar_scan(&scene, &pose, 0.0, &mut SeedStream::new(1).rng());
        assert!(cloud.points.is_empty());
    }

    #[test]
    fn noiseless_points_lie_on_cylinder() {
        let ins = vertical_insulator(Vec3::new(5.0, 0.0, 0.12));
        let scene = Scene::new_unchecked(bare_config(vec![ins], vec![])).unwrap();
        let lidar = scene.lidar_pose(&body_at(Vec3::zeros(), 0.0));
        let cloud = simulate_lidar_scan(&scene, &lidar, 0.0, &mut SeedStream::new(2).rng());
        assert!(cloud.points.len() > 20, "got {}", cloud.points.len());
        let prim = Primitive {
            a: ins.center - ins.axis * 0.6,
            b: ins.center + ins.axis * 0.6,
            radius: ins.radius,
            tag: SurfaceTag::Insulator(0),
        };
        for p in &cloud.points {
            let w = lidar.transform_point(p);
            assert!(prim.surface_distance(&w) < 1e-6);
        }
    }

    #[test]
    fn occluded_cylinder_returns_nothing() {
        let ins = vertical_insulator(Vec3::new(5.0, 0.0, 0.12));
        let wall = StructureSegment {
            a: Vec3::new(2.0, 0.0, -5.0),
            b: Vec3::new(2.0, 0.0, 5.0),
            radius: 1.5,
            conductor: false,
        };
        let scene = Scene::new_unchecked(bare_config(vec![ins], vec![wall])).unwrap();
        let lidar = scene.lidar_pose(&body_at(Vec3::zeros(), 0.0));
        let cloud = simulate_lidar_scan(&scene, &lidar, 0.0, &mut SeedStream::new(3).rng());
        let prim = Primitive {
            a: ins.center - ins.axis * 0.6,
            b: ins.center + ins.axis * 0.6,
            radius: ins.radius,
            tag: SurfaceTag::Insulator(0),
        };
        assert!(!cloud.points.is_empty());
        for p in &cloud.points {
            assert!(prim.surface_distance(&lidar.transform_point(p)) > 1e-3);
        }
    }

    #[test]
    fn scans_are_deterministic() {
        let tower = build_tower(TowerKind::A, &RigidTransform::identity(Frame::World, Frame::World), 25.0, 10.0).unwrap();
        let scene = Scene::new(SceneConfig::single_tower(tower, 50.0, 9)).unwrap();
        let lidar = scene.lidar_pose(&body_at(Vec3::new(0.8, 12.0, 18.0), -std::f64::consts::FRAC_PI_2));
        let a = simulate_lidar_scan(&scene, &lidar, 0.0, &mut SeedStream::new(4).rng());
        let b = simulate_lidar_scan(&scene, &lidar, 0.0, &mut SeedStream::new(4).rng());
        assert_eq!(a, b);
        assert!(a.points.len() > 500);
    }

    #[test]
    fn windowed_scan_is_subset_of_full_scan() {
        let tower = build_tower(TowerKind::A, &RigidTransform::identity(Frame::World, Frame::World), 25.0, 10.0).unwrap();
        let mut cfg = SceneConfig::single_tower(tower, 50.0, 9);
        cfg.lidar = LidarParams::default();
        let scene = Scene::new(cfg).unwrap();
        let body = body_at(Vec3::new(0.8, 12.0, 18.0), -std::f64::consts::FRAC_PI_2);
        let lidar = scene.lidar_pose(&body);
        let full = simulate_lidar_scan(&scene, &lidar, 0.0, &mut SeedStream::new(5).rng());
        let window = ScanWindow {
            az_min: -1.9,
            az_max: -1.2,
            el_min: -0.1,
            el_max: 0.2,
        };
        let part = simulate_lidar_scan_windowed(&scene, &lidar, 0.0, &mut SeedStream::new(5).rng(), &[window]);
        assert!(!part.points.is_empty());
        for p in &part.points {
            assert!(full.points.contains(p));
        }
        let expected = full
            .points
            .iter()
            .filter(|p| {
                let az = p.y.atan2(p.x);
                let el = (p.z / p.norm()).asin();
                az > window.az_min + 0.01 && az < window.az_max - 0.01 && el > window.el_min + 0.01 && el < window.el_max - 0.01
            })
            .count();
        assert!(part.points.len() >= expected);
    }

    #[test]
    fn detection_examples() {
        let ins = vertical_insulator(Vec3::new(8.0, 0.0, 0.0));
        let scene = Scene::new_unchecked(bare_config(vec![ins], vec![])).unwrap();
        let k = *scene.camera();
        let mut rng = SeedStream::new(6).rng();

        // facing the insulator
        let body = body_at(Vec3::new(0.0, 0.0, 0.05), 0.0);
        let cam = scene.camera_pose(&body);
        let dets = simulate_detection(&scene, &cam, &k, 1.0, &mut rng);
        assert_eq!(dets.len(), 1);
        let proj = project_to_image(&k, &cam.inverse().transform_point(&ins.center)).unwrap();
        let c = dets[0].bbox.center();
        assert!((c.u - proj.u).abs() < 1.0 && (c.v - proj.v).abs() < 1.0);
        assert_eq!(dets[0].true_insulator_id, Some(0));

        // facing away: behind the camera
        let cam = scene.camera_pose(&body_at(Vec3::zeros(), PI));
        assert!(simulate_detection(&scene, &cam, &k, 1.0, &mut rng).is_empty());

        // looking sideways: outside the field of view
        let cam = scene.camera_pose(&body_at(Vec3::zeros(), 1.4));
        assert!(simulate_detection(&scene, &cam, &k, 1.0, &mut rng).is_empty());
    }

    #[test]
    fn noiseless_bbox_contains_lidar_projections() {
        let tower = build_tower(TowerKind::A, &RigidTransform::identity(Frame::World, Frame::World), 25.0, 10.0).unwrap();
        let mut cfg = SceneConfig::single_tower(tower, 50.0, 9);
        cfg.lidar = cfg.lidar.noiseless();
        cfg.detector = cfg.detector.noiseless();
        cfg.detector.bbox_inflation = 0.0;
        let scene = Scene::new(cfg).unwrap();
        let body = body_at(Vec3::new(2.0, 13.0, 17.0), -1.7);
        let cam = scene.camera_pose(&body);
        let lidar = scene.lidar_pose(&body);
        let k = *scene.camera();
        let dets = simulate_detection(&scene, &cam, &k, 0.0, &mut SeedStream::new(1).rng());
        assert!(!dets.is_empty());
        let cloud = simulate_lidar_scan(&scene, &lidar, 0.0, &mut SeedStream::new(2).rng());
        let t_cl = compose(&cam.inverse(), &lidar).unwrap();
        let mut checked = 0;
        for det in &dets {
            let id = det.true_insulator_id.unwrap();
            let spec = scene.insulators().find(|i| i.id == id).unwrap();
            let prim = Primitive {
                a: spec.center - spec.axis * 0.6,
                b: spec.center + spec.axis * 0.6,
                radius: spec.radius,
                tag: SurfaceTag::Insulator(id),
            };
            for p in &cloud.points {
                if prim.surface_distance(&lidar.transform_point(p)) < 1e-6 {
                    let s = project_to_image(&k, &t_cl.transform_point(p)).unwrap();
                    if k.contains(&s) && det.bbox.u_min > 0.0 && det.bbox.u_max < 640.0 {
                        assert!(det.bbox.shrink(-1e-6).contains(&s));
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 10);
    }
}
