//! Synthetic transmission-tower world plus simulated LiDAR and detector.

mod raycast;
mod sensors;
mod tower;

pub use raycast::{intersect_capped_cylinder, Hit, Primitive, RayCaster, SurfaceTag};
pub use sensors::{
    simulate_detection, simulate_lidar_scan, simulate_lidar_scan_windowed, BBox, DetectionEvent,
    ScanWindow,
};
pub use tower::{
    build_tower, InsulatorSpec, StructureSegment, TowerKind, TowerModel, INSULATOR_LENGTH, INSULATOR_RADIUS,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeedStream;

use crate::geometry::{
    compose, CameraIntrinsics, Frame, GeometryError, PoseConfig, RigidTransform, Vec3,
};

/// Tower height of the standard scene family.
pub const STANDARD_HEIGHT: f64 = 25.0;
/// Tower width of the standard scene family.
pub const STANDARD_WIDTH: f64 = 10.0;

/// Radius of the conductors strung between towers.
pub const CONDUCTOR_RADIUS: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid tower dimensions: height {height}, width {width}")]
    InvalidDimensions { height: f64, width: f64 },
    #[error("invalid insulator {id}: {reason}")]
    InvalidInsulator { id: u32, reason: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarParams {
    pub horizontal_rays: u32,
    pub vertical_rays: u32,
    pub horizontal_fov: f64,
    pub vertical_fov: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
    pub dropout_prob: f64,
}

impl Default for LidarParams {
    fn default() -> Self {
        Self {
            horizontal_rays: 720,
            vertical_rays: 120,
            horizontal_fov: 360.0,
            vertical_fov: 60.0,
            max_range: 40.0,
            range_noise_sigma: 0.02,
            dropout_prob: 0.05,
        }
    }
}

impl LidarParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        let fov_ok = |f: f64| f > 0.0 && f <= 360.0;
        if self.horizontal_rays == 0 || self.vertical_rays == 0 {
            return Err(SceneError::Invalid("lidar ray counts must be positive".into()));
        }
        if !fov_ok(self.horizontal_fov) || !(self.vertical_fov > 0.0 && self.vertical_fov <= 180.0) {
            return Err(SceneError::Invalid("lidar field of view out of range".into()));
        }
        if !(self.range_noise_sigma >= 0.0) || !(0.0..=1.0).contains(&self.dropout_prob) || !(self.max_range > 0.0) {
            return Err(SceneError::Invalid("lidar noise parameters out of range".into()));
        }
        Ok(())
    }

    /// Noise-free copy.
    pub fn noiseless(mut self) -> Self {
        self.range_noise_sigma = 0.0;
        self.dropout_prob = 0.0;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub detection_range: f64,
    pub false_negative_prob: f64,
    pub bbox_pixel_noise_sigma: f64,
    pub bbox_inflation: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            detection_range: 12.0,
            false_negative_prob: 0.05,
            bbox_pixel_noise_sigma: 2.0,
            bbox_inflation: 4.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(0.0..=1.0).contains(&self.false_negative_prob)
            || !(self.bbox_pixel_noise_sigma >= 0.0)
            || !(self.detection_range > 0.0)
        {
            return Err(SceneError::Invalid("detector parameters out of range".into()));
        }
        Ok(())
    }

    pub fn noiseless(mut self) -> Self {
        self.false_negative_prob = 0.0;
        self.bbox_pixel_noise_sigma = 0.0;
        self
    }
}

/// Sensor mounting on the airframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigConfig {
    /// LiDAR pose in the body frame (maps L into B).
    pub lidar_in_body: PoseConfig,
    /// Camera pose in the body frame (maps C into B).
    pub camera_in_body: PoseConfig,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self {
            lidar_in_body: PoseConfig {
                translation: [0.0, 0.0, 0.12],
                ypr_deg: [0.0, 0.0, 0.0],
            },
            camera_in_body: PoseConfig {
                translation: [0.15, 0.0, -0.05],
                ypr_deg: [-90.0, 0.0, -90.0],
            },
        }
    }
}

fn default_camera() -> CameraIntrinsics {
    CameraIntrinsics::pinhole(450.0, 450.0, 320.0, 240.0, 640, 480).expect("valid default intrinsics")
}

/// Scene description as stored in JSON scene files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    pub towers: Vec<TowerModel>,
    #[serde(default)]
    pub neighbors: Vec<Vec3>,
    #[serde(default)]
    pub lidar: LidarParams,
    #[serde(default)]
    pub detector: DetectorParams,
    #[serde(default = "default_camera")]
    pub camera: CameraIntrinsics,
    #[serde(default)]
    pub rig: RigConfig,
}

impl SceneConfig {
    /// A single tower with neighbors placed `span` meters away along its
    /// local x axis on both sides.
    pub fn single_tower(tower: TowerModel, span: f64, seed: u64) -> Self {
        let pose = tower.pose();
        let neighbors = [span, -span]
            .iter()
            .map(|s| pose.transform_point(&Vec3::new(*s, 0.0, 0.0)))
            .collect();
        Self {
            seed,
            towers: vec![tower],
            neighbors,
            lidar: LidarParams::default(),
            detector: DetectorParams::default(),
            camera: default_camera(),
            rig: RigConfig::default(),
        }
    }

    /// Member of the standard benchmark family: a 25 m x 10 m tower of the
    /// given kind at the origin with a seeded yaw in [0, 360) degrees and a
    /// seeded span in [40, 60) m to both neighbors.
    pub fn standard(kind: TowerKind, seed: u64) -> Self {
        let mut rng = SeedStream::new(seed).child("scene").rng();
        let yaw: f64 = rng.random_range(0.0..360.0);
        let span: f64 = rng.random_range(40.0..60.0);
        let pose = RigidTransform::from_ypr_deg([yaw, 0.0, 0.0], Vec3::zeros(), Frame::World, Frame::World);
        let tower = build_tower(kind, &pose, STANDARD_HEIGHT, STANDARD_WIDTH).expect("standard dimensions are valid");
        Self::single_tower(tower, span, seed)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.towers.is_empty() {
            return Err(SceneError::Invalid("scene needs at least one tower".into()));
        }
        for t in &self.towers {
            t.validate()?;
        }
        self.lidar.validate()?;
        self.detector.validate()?;
        Ok(())
    }
}

/// Immutable runtime world built from a [`SceneConfig`].
#[derive(Debug, Clone)]
pub struct Scene {
    config: SceneConfig,
    caster: RayCaster,
    t_bl: RigidTransform,
    t_bc: RigidTransform,
}

impl Scene {
    pub fn new(config: SceneConfig) -> Result<Self, SceneError> {
        config.validate()?;
        Self::build(config)
    }

    /// Builds a world without the per-tower layout checks; used for
    /// hand-made fixtures (bare cylinders, empty worlds).
    pub fn new_unchecked(config: SceneConfig) -> Result<Self, SceneError> {
        Self::build(config)
    }

    fn build(config: SceneConfig) -> Result<Self, SceneError> {
        let mut prims = Vec::new();
        for tower in &config.towers {
            for ins in &tower.insulators {
                prims.push(Primitive {
                    a: ins.center - ins.axis * (ins.length * 0.5),
                    b: ins.center + ins.axis * (ins.length * 0.5),
                    radius: ins.radius,
                    tag: SurfaceTag::Insulator(ins.id),
                });
            }
            for seg in &tower.structure_segments {
                prims.push(Primitive {
                    a: seg.a,
                    b: seg.b,
                    radius: seg.radius,
                    tag: if seg.conductor {
                        SurfaceTag::Conductor
                    } else {
                        SurfaceTag::Lattice
                    },
                });
            }
            prims.extend(power_lines(tower, &config.neighbors));
        }
        let t_bl = config.rig.lidar_in_body.to_transform(Frame::Lidar, Frame::Body);
        let t_bc = config.rig.camera_in_body.to_transform(Frame::Camera, Frame::Body);
        RigidTransform::new(*t_bl.rotation(), *t_bl.translation(), Frame::Lidar, Frame::Body)?;
        RigidTransform::new(*t_bc.rotation(), *t_bc.translation(), Frame::Camera, Frame::Body)?;
        Ok(Self {
            caster: RayCaster::new(prims),
            config,
            t_bl,
            t_bc,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn caster(&self) -> &RayCaster {
        &self.caster
    }

    pub fn camera(&self) -> &CameraIntrinsics {
        &self.config.camera
    }

    /// LiDAR-to-body extrinsic.
    pub fn t_bl(&self) -> &RigidTransform {
        &self.t_bl
    }

    /// Body-to-camera extrinsic.
    pub fn t_cb(&self) -> RigidTransform {
        self.t_bc.inverse()
    }

    pub fn camera_pose(&self, body_pose: &RigidTransform) -> RigidTransform {
        compose(body_pose, &self.t_bc).expect("body pose maps B into W")
    }

    pub fn lidar_pose(&self, body_pose: &RigidTransform) -> RigidTransform {
        compose(body_pose, &self.t_bl).expect("body pose maps B into W")
    }

    pub fn insulators(&self) -> impl Iterator<Item = &InsulatorSpec> {
        self.config.towers.iter().flat_map(|t| t.insulators.iter())
    }
}

/// Conductors leave the line-side tip of each insulator and run
/// horizontally toward the neighbor tower on that side.
fn power_lines(tower: &TowerModel, neighbors: &[Vec3]) -> Vec<Primitive> {
    let base = tower.pose().transform_point(&Vec3::zeros());
    let mut out = Vec::new();
    for ins in &tower.insulators {
        let tip = ins.center + ins.axis * (ins.length * 0.5);
        let horiz = Vec3::new(ins.axis.x, ins.axis.y, 0.0);
        for n in neighbors {
            let to_n = Vec3::new(n.x - base.x, n.y - base.y, 0.0);
            let span = to_n.norm();
            if span < 1e-6 {
                continue;
            }
            let dir = to_n / span;
            // strain strings only feed the neighbor they point at
            if horiz.norm() > 0.3 && horiz.dot(&dir) <= 0.0 {
                continue;
            }
            let offset = tip - base;
            let end = Vec3::new(n.x, n.y, base.z) + Vec3::new(offset.x, offset.y, offset.z);
            let start = tip + dir * tower::CONDUCTOR_STUB;
            if (end - start).dot(&dir) > 0.0 {
                out.push(Primitive {
                    a: start,
                    b: Vec3::new(end.x, end.y, start.z),
                    radius: CONDUCTOR_RADIUS,
                    tag: SurfaceTag::Conductor,
                });
            }
        }
    }
    out
}

/// Ground-truth insulator poses of every tower, in id order.
pub fn ground_truth(config: &SceneConfig) -> Vec<(u32, Vec3, Vec3)> {
    let mut gt: Vec<_> = config
        .towers
        .iter()
        .flat_map(|t| t.insulators.iter())
        .map(|i| (i.id, i.center, i.axis))
        .collect();
    gt.sort_by_key(|g| g.0);
    gt
}
