//! Procedural lattice towers.
//!
//! Tower-local axes: x along the line, y across it, z up, origin at the
//! base center. Tower A is a strain tower with three crossarm levels and
//! twelve nearly horizontal strings; tower B is a suspension tower with a
//! single crossarm carrying four vertical strings.

use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::geometry::{PoseConfig, RigidTransform, Vec3, Frame};

pub const INSULATOR_LENGTH: f64 = 1.2;
pub const INSULATOR_RADIUS: f64 = 0.12;
pub const LATTICE_RADIUS: f64 = 0.05;
/// Length of the conductor stub hanging off each string's line-side tip.
pub const CONDUCTOR_STUB: f64 = 1.0;
/// Spacing between the outer and inner suspension strings of a tower B arm.
const INNER_STRING_OFFSET: f64 = 1.6;
/// Drop of a suspension string below its crossarm. The link itself is too
/// thin to return LiDAR points and is not modeled.
const HANGER_LENGTH: f64 = 0.35;

const STRAIN_TILT_DEG: f64 = 10.0;
const ARM_HALF_SPACING: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TowerKind {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsulatorSpec {
    pub id: u32,
    pub center: Vec3,
    /// Unit axis pointing from the tower attachment toward the conductor.
    pub axis: Vec3,
    pub length: f64,
    pub radius: f64,
}

impl InsulatorSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let fail = |reason: &str| SceneError::InvalidInsulator {
            id: self.id,
            reason: reason.into(),
        };
        if (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(fail("axis is not unit length"));
        }
        if !(self.radius > 0.0 && self.length > 2.0 * self.radius) {
            return Err(fail("length must exceed the diameter"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureSegment {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
    #[serde(default)]
    pub conductor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerModel {
    pub kind: TowerKind,
    pub pose: PoseConfig,
    pub height: f64,
    pub width: f64,
    pub insulators: Vec<InsulatorSpec>,
    pub structure_segments: Vec<StructureSegment>,
}

impl TowerModel {
    /// Tower-local to world transform.
    pub fn pose(&self) -> RigidTransform {
        self.pose.to_transform(Frame::World, Frame::World)
    }

    pub fn base(&self) -> Vec3 {
        Vec3::from(self.pose.translation)
    }

    /// Checks the layout invariants of the generated tower kinds.
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.height > 0.0 && self.width > 0.0) {
            return Err(SceneError::InvalidDimensions {
                height: self.height,
                width: self.width,
            });
        }
        let expected = match self.kind {
            TowerKind::A => 12,
            TowerKind::B => 4,
        };
        // A bare tower (no insulators) is allowed for exploration-only runs.
        if !self.insulators.is_empty() && self.insulators.len() != expected {
            return Err(SceneError::Invalid(format!(
                "tower {:?} must carry {expected} insulators (or none), found {}",
                self.kind,
                self.insulators.len()
            )));
        }
        let inv = self.pose().inverse();
        for ins in &self.insulators {
            ins.validate()?;
            let ok = match self.kind {
                TowerKind::A => ins.axis.z.abs() < 0.3,
                TowerKind::B => ins.axis.z.abs() > 0.95,
            };
            if !ok {
                return Err(SceneError::InvalidInsulator {
                    id: ins.id,
                    reason: "axis orientation does not match tower kind".into(),
                });
            }
            let local = inv.transform_point(&ins.center);
            let half = self.width * 0.5;
            if local.x.abs() > half || local.y.abs() > half || local.z < 0.0 || local.z > self.height {
                return Err(SceneError::InvalidInsulator {
                    id: ins.id,
                    reason: "center outside the tower envelope".into(),
                });
            }
        }
        Ok(())
    }
}

struct Builder {
    pose: RigidTransform,
    segments: Vec<StructureSegment>,
    insulators: Vec<InsulatorSpec>,
}

impl Builder {
    fn member(&mut self, a: Vec3, b: Vec3) {
        self.segments.push(StructureSegment {
            a: self.pose.transform_point(&a),
            b: self.pose.transform_point(&b),
            radius: LATTICE_RADIUS,
            conductor: false,
        });
    }

    fn stub(&mut self, a: Vec3, b: Vec3) {
        self.segments.push(StructureSegment {
            a: self.pose.transform_point(&a),
            b: self.pose.transform_point(&b),
            radius: super::CONDUCTOR_RADIUS,
            conductor: true,
        });
    }

    fn insulator(&mut self, root: Vec3, axis: Vec3) {
        let axis = axis.normalize();
        let center = root + axis * (INSULATOR_LENGTH * 0.5);
        self.insulators.push(InsulatorSpec {
            id: self.insulators.len() as u32,
            center: self.pose.transform_point(&center),
            axis: self.pose.transform_vector(&axis).normalize(),
            length: INSULATOR_LENGTH,
            radius: INSULATOR_RADIUS,
        });
    }
}

/// Half-width of the tower body at height `z`.
fn body_half(z: f64, height: f64, width: f64) -> f64 {
    let base = 0.3 * width;
    let top = 0.08 * width;
    base + (top - base) * (z / height).clamp(0.0, 1.0)
}

/// Builds a tower of the given kind placed at `pose` (tower-local to world).
pub fn build_tower(
    kind: TowerKind,
    pose: &RigidTransform,
    height: f64,
    width: f64,
) -> Result<TowerModel, SceneError> {
    if !(height > 0.0 && width > 0.0) || !height.is_finite() || !width.is_finite() {
        return Err(SceneError::InvalidDimensions { height, width });
    }
    let mut b = Builder {
        pose: pose.with_frames(Frame::World, Frame::World),
        segments: Vec::new(),
        insulators: Vec::new(),
    };

    let corners = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
    let at = |sx: f64, sy: f64, z: f64| {
        let h = body_half(z, height, width);
        Vec3::new(sx * h, sy * h, z)
    };

    // legs
    for &(sx, sy) in &corners {
        b.member(at(sx, sy, 0.0), at(sx, sy, height));
    }
    let levels: Vec<f64> = match kind {
        TowerKind::A => vec![0.6, 0.75, 0.9],
        TowerKind::B => vec![0.85],
    }
    .into_iter()
    .map(|f| f * height)
    .collect();

    // horizontal rings and one face diagonal per panel
    let mut rings = vec![0.2 * height, 0.4 * height];
    rings.extend(levels.iter().copied());
    rings.push(height);
    for (k, &z) in rings.iter().enumerate() {
        for i in 0..4 {
            let (ax, ay) = corners[i];
            let (bx, by) = corners[(i + 1) % 4];
            b.member(at(ax, ay, z), at(bx, by, z));
        }
        let z0 = if k == 0 { 0.0 } else { rings[k - 1] };
        for i in 0..4 {
            let (ax, ay) = corners[i];
            let (bx, by) = corners[(i + 1) % 4];
            b.member(at(ax, ay, z0), at(bx, by, z));
        }
    }

    let arm_tip = 0.4 * width;
    let cos_t = STRAIN_TILT_DEG.to_radians().cos();
    let sin_t = STRAIN_TILT_DEG.to_radians().sin();
    for &z in &levels {
        let inner = body_half(z, height, width);
        for side in [1.0, -1.0] {
            for dx in [ARM_HALF_SPACING, -ARM_HALF_SPACING] {
                b.member(Vec3::new(dx, side * inner, z), Vec3::new(dx, side * arm_tip, z));
            }
            b.member(
                Vec3::new(-ARM_HALF_SPACING, side * arm_tip, z),
                Vec3::new(ARM_HALF_SPACING, side * arm_tip, z),
            );
        }
    }

    match kind {
        TowerKind::A => {
            for &z in &levels {
                for side in [1.0, -1.0] {
                    for dir in [1.0, -1.0] {
                        let root = Vec3::new(dir * ARM_HALF_SPACING, side * arm_tip, z);
                        let axis = Vec3::new(dir * cos_t, 0.0, -sin_t);
                        b.insulator(root, axis);
                        let tip = root + axis * INSULATOR_LENGTH;
                        b.stub(tip, tip + Vec3::new(dir * CONDUCTOR_STUB, 0.0, 0.0));
                    }
                }
            }
        }
        TowerKind::B => {
            let z = levels[0];
            for side in [1.0, -1.0] {
                for y in [arm_tip, arm_tip - INNER_STRING_OFFSET] {
                    let y = side * y;
                    b.member(
                        Vec3::new(-ARM_HALF_SPACING, y, z),
                        Vec3::new(ARM_HALF_SPACING, y, z),
                    );
                    let root = Vec3::new(0.0, y, z - HANGER_LENGTH);
                    let axis = Vec3::new(0.0, 0.0, -1.0);
                    b.insulator(root, axis);
                    let tip = root + axis * INSULATOR_LENGTH;
                    for dir in [1.0, -1.0] {
                        b.stub(tip, tip + Vec3::new(dir * CONDUCTOR_STUB, 0.0, 0.0));
                    }
                }
            }
        }
    }

    let (yaw, pitch, roll) = {
        let [y, p, r] = pose.ypr_deg();
        (y, p, r)
    };
    let t = pose.translation();
    Ok(TowerModel {
        kind,
        pose: PoseConfig {
            translation: [t.x, t.y, t.z],
            ypr_deg: [yaw, pitch, roll],
        },
        height,
        width,
        insulators: b.insulators,
        structure_segments: b.segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn id() -> RigidTransform {
        RigidTransform::identity(Frame::World, Frame::World)
    }

    #[test]
    fn tower_a_layout() {
        let t = build_tower(TowerKind::A, &id(), 25.0, 10.0).unwrap();
        assert_eq!(t.insulators.len(), 12);
        t.validate().unwrap();
        let plus = t.insulators.iter().filter(|i| i.center.y > 0.0).count();
        assert_eq!(plus, 6);
        let mut levels: Vec<i64> = t.insulators.iter().map(|i| (i.center.z * 10.0).round() as i64).collect();
        levels.sort();
        levels.dedup();
        assert_eq!(levels.len(), 3);
        for i in &t.insulators {
            assert!(i.axis.z.abs() < 0.3);
        }
    }

    #[test]
    fn tower_b_layout() {
        let t = build_tower(TowerKind::B, &id(), 25.0, 10.0).unwrap();
        assert_eq!(t.insulators.len(), 4);
        t.validate().unwrap();
        for i in &t.insulators {
            assert_relative_eq!(i.axis, Vec3::new(0.0, 0.0, -1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn insulators_symmetric_about_axis() {
        let t = build_tower(TowerKind::A, &id(), 25.0, 10.0).unwrap();
        for i in &t.insulators {
            let mirror = Vec3::new(i.center.x, -i.center.y, i.center.z);
            assert!(t.insulators.iter().any(|j| (j.center - mirror).norm() < 1e-9));
        }
    }

    #[test]
    fn rigid_shift_moves_insulators() {
        let base = build_tower(TowerKind::A, &id(), 25.0, 10.0).unwrap();
        let shifted = build_tower(
            TowerKind::A,
            &RigidTransform::from_translation(Vec3::new(5.0, 0.0, 0.0), Frame::World, Frame::World),
            25.0,
            10.0,
        )
        .unwrap();
        for (a, b) in base.insulators.iter().zip(&shifted.insulators) {
            assert_relative_eq!(b.center - a.center, Vec3::new(5.0, 0.0, 0.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            build_tower(TowerKind::A, &id(), 0.0, 10.0),
            Err(SceneError::InvalidDimensions { .. })
        ));
        assert!(build_tower(TowerKind::B, &id(), 25.0, -1.0).is_err());
    }

    #[test]
    fn distinct_insulators_are_well_separated() {
        for kind in [TowerKind::A, TowerKind::B] {
            let t = build_tower(kind, &id(), 25.0, 10.0).unwrap();
            for (k, a) in t.insulators.iter().enumerate() {
                for b in &t.insulators[k + 1..] {
                    assert!((a.center - b.center).norm() > 1.5);
                }
            }
        }
    }
}
