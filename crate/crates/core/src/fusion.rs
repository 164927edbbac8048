//! LiDAR-to-image projection, bounding-box filtering and accumulation of
//! consecutive detections.

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::{compose, project_to_image, CameraIntrinsics, Frame, ImagePoint, RigidTransform, Vec3};
use crate::scene::BBox;

/// Number of detection events fused into one localization input.
pub const EVENTS_PER_ESTIMATE: usize = 3;
/// Default bound between consecutive detection events.
pub const DEFAULT_MAX_GAP: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("timestamp {got} precedes last buffered timestamp {last}")]
    NonMonotonicTimestamp { last: f64, got: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: Frame,
    pub timestamp: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame, timestamp: f64) -> Self {
        Self {
            points,
            frame,
            timestamp,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// ASCII dump, one `x y z` line per point.
    pub fn to_xyz(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 32);
        for p in &self.points {
            s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
        s
    }
}

/// Points of one scan that fell inside one bbox, in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredCloud {
    pub points: Vec<Vec3>,
    pub source_bbox: BBox,
    pub detection_timestamp: f64,
    /// Body pose (B into W) at scan time; identity unless set.
    pub body_pose: RigidTransform,
}

impl FilteredCloud {
    pub fn with_body_pose(mut self, pose: RigidTransform) -> Self {
        self.body_pose = pose;
        self
    }
}

/// Projects every point with positive camera depth; indices refer to the
/// input cloud.
pub fn project_cloud(
    cloud: &PointCloud,
    t_bl: &RigidTransform,
    t_cb: &RigidTransform,
    k: &CameraIntrinsics,
) -> Vec<(usize, ImagePoint)> {
    let t_cl = match compose(t_cb, t_bl) {
        Ok(t) => t,
        Err(_) => return Vec::new(),
    };
    cloud
        .points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let pc = t_cl.transform_point(p);
            project_to_image(k, &pc).ok().map(|s| (i, s))
        })
        .collect()
}

/// Keeps the points projecting inside `bbox` (closed), re-expressed in B.
pub fn filter_by_bbox(
    cloud: &PointCloud,
    projections: &[(usize, ImagePoint)],
    bbox: &BBox,
    t_bl: &RigidTransform,
) -> FilteredCloud {
    let points = projections
        .iter()
        .filter(|(_, s)| bbox.contains(s))
        .map(|(i, _)| t_bl.transform_point(&cloud.points[*i]))
        .collect();
    FilteredCloud {
        points,
        source_bbox: *bbox,
        detection_timestamp: cloud.timestamp,
        body_pose: RigidTransform::identity(Frame::Body, Frame::World),
    }
}

/// FIFO of up to three filtered clouds from consecutive detections.
#[derive(Debug, Clone)]
pub struct DetectionBuffer {
    entries: VecDeque<FilteredCloud>,
    max_gap: f64,
}

impl Default for DetectionBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_GAP)
    }
}

impl DetectionBuffer {
    pub fn new(max_gap: f64) -> Self {
        Self {
            entries: VecDeque::with_capacity(EVENTS_PER_ESTIMATE),
            max_gap,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.entries.back().map(|e| e.detection_timestamp)
    }

    /// Appends `fc`; returns the cumulated cloud once three entries are held.
    /// The result is expressed in the body frame of the newest entry.
    pub fn push_and_poll(&mut self, fc: FilteredCloud) -> Result<Option<PointCloud>, FusionError> {
        if let Some(last) = self.last_timestamp() {
            if fc.detection_timestamp < last {
                return Err(FusionError::NonMonotonicTimestamp {
                    last,
                    got: fc.detection_timestamp,
                });
            }
            if fc.detection_timestamp - last > self.max_gap {
                self.entries.clear();
            }
        }
        self.entries.push_back(fc);
        if self.entries.len() < EVENTS_PER_ESTIMATE {
            return Ok(None);
        }
        let latest = self.entries.back().expect("non-empty");
        let to_latest = latest.body_pose.inverse();
        let timestamp = latest.detection_timestamp;
        let total = self.entries.iter().map(|e| e.points.len()).sum();
        let mut points = Vec::with_capacity(total);
        for e in &self.entries {
            for p in &e.points {
                points.push(to_latest.transform_point(&e.body_pose.transform_point(p)));
            }
        }
        self.entries.clear();
        Ok(Some(PointCloud::new(points, Frame::Body, timestamp)))
    }
}

#[derive(Debug, Clone)]
struct Track {
    anchor: Vec3,
    buffer: DetectionBuffer,
}

/// One [`DetectionBuffer`] per insulator candidate, associated by a world
/// anchor point.
#[derive(Debug, Clone)]
pub struct DetectionTracker {
    tracks: Vec<Track>,
    radius: f64,
    max_gap: f64,
}

impl DetectionTracker {
    pub fn new(radius: f64, max_gap: f64) -> Self {
        Self {
            tracks: Vec::new(),
            radius,
            max_gap,
        }
    }

    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    /// Routes `fc` to the track whose anchor lies within the association
    /// radius of `anchor`, opening a new one if none does.
    pub fn push(&mut self, anchor: Vec3, fc: FilteredCloud) -> Result<Option<PointCloud>, FusionError> {
        let now = fc.detection_timestamp;
        let gap = self.max_gap;
        self.tracks
            .retain(|t| t.buffer.last_timestamp().is_some_and(|l| now - l <= gap));
        let best = self
            .tracks
            .iter()
            .enumerate()
            .map(|(i, t)| (i, (t.anchor - anchor).norm()))
            .filter(|(_, d)| *d <= self.radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        let i = match best {
            Some(i) => i,
            None => {
                self.tracks.push(Track {
                    anchor,
                    buffer: DetectionBuffer::new(gap),
                });
                self.tracks.len() - 1
            }
        };
        self.tracks[i].anchor = anchor;
        let out = self.tracks[i].buffer.push_and_poll(fc)?;
        if out.is_some() {
            self.tracks.remove(i);
        }
        Ok(out)
    }

    pub fn clear(&mut self) {
        self.tracks.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lidar_to_camera;
    use crate::rng::SeedStream;
    use proptest::prelude::*;
    use rand::Rng;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::pinhole(450.0, 450.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn rig() -> (RigidTransform, RigidTransform) {
        let t_bl = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.12), Frame::Lidar, Frame::Body);
        let t_bc = RigidTransform::from_ypr_deg([-90.0, 0.0, -90.0], Vec3::new(0.15, 0.0, -0.05), Frame::Camera, Frame::Body);
        (t_bl, t_bc.inverse())
    }

    fn fc(n: usize, t: f64) -> FilteredCloud {
        FilteredCloud {
            points: vec![Vec3::new(1.0, 0.0, 0.0); n],
            source_bbox: BBox { u_min: 0.0, v_min: 0.0, u_max: 1.0, v_max: 1.0 },
            detection_timestamp: t,
            body_pose: RigidTransform::identity(Frame::Body, Frame::World),
        }
    }

    #[test]
    fn empty_cloud_projects_to_nothing() {
        let (t_bl, t_cb) = rig();
        assert!(project_cloud(&PointCloud::new(vec![], Frame::Lidar, 0.0), &t_bl, &t_cb, &k()).is_empty());
    }

    #[test]
    fn optical_axis_point_hits_principal_point() {
        let t_bl = RigidTransform::identity(Frame::Lidar, Frame::Body);
        let t_cb = RigidTransform::identity(Frame::Body, Frame::Camera);
        let cloud = PointCloud::new(vec![Vec3::new(0.0, 0.0, 4.0)], Frame::Lidar, 0.0);
        let out = project_cloud(&cloud, &t_bl, &t_cb, &k());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, 0);
        assert!((out[0].1.u - 320.0).abs() < 1e-12 && (out[0].1.v - 240.0).abs() < 1e-12);
    }

    #[test]
    fn projection_matches_per_point_chain() {
        let (t_bl, t_cb) = rig();
        let mut rng = SeedStream::new(11).rng();
        let pts: Vec<Vec3> = (0..100)
            .map(|_| Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-3.0..3.0)))
            .collect();
        let cloud = PointCloud::new(pts.clone(), Frame::Lidar, 0.0);
        let out = project_cloud(&cloud, &t_bl, &t_cb, &k());
        let mut expected = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            let pc = lidar_to_camera(p, &t_bl, &t_cb).unwrap();
            if let Ok(s) = project_to_image(&k(), &pc) {
                expected.push((i, s));
            }
        }
        assert_eq!(out.len(), expected.len());
        for (a, b) in out.iter().zip(&expected) {
            assert_eq!(a.0, b.0);
            assert!((a.1.u - b.1.u).abs() < 1e-9 && (a.1.v - b.1.v).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_matches_brute_force_membership() {
        let (t_bl, t_cb) = rig();
        let mut rng = SeedStream::new(12).rng();
        let pts: Vec<Vec3> = (0..500)
            .map(|_| Vec3::new(rng.random_range(-2.0..12.0), rng.random_range(-4.0..4.0), rng.random_range(-3.0..3.0)))
            .collect();
        let cloud = PointCloud::new(pts.clone(), Frame::Lidar, 2.0);
        let bbox = BBox { u_min: 200.0, v_min: 150.0, u_max: 420.0, v_max: 330.0 };
        let proj = project_cloud(&cloud, &t_bl, &t_cb, &k());
        let out = filter_by_bbox(&cloud, &proj, &bbox, &t_bl);
        let expected: Vec<Vec3> = pts
            .iter()
            .filter(|p| {
                let pc = lidar_to_camera(p, &t_bl, &t_cb).unwrap();
                pc.z > 0.0 && {
                    let u = 450.0 * pc.x / pc.z + 320.0;
                    let v = 450.0 * pc.y / pc.z + 240.0;
                    (200.0..=420.0).contains(&u) && (150.0..=330.0).contains(&v)
                }
            })
            .map(|p| t_bl.transform_point(p))
            .collect();
        assert!(!expected.is_empty());
        assert_eq!(out.points, expected);
        assert_eq!(out.detection_timestamp, 2.0);
    }

    #[test]
    fn behind_camera_point_is_dropped() {
        let (t_bl, t_cb) = rig();
        let cloud = PointCloud::new(vec![Vec3::new(-5.0, 0.0, 0.0), Vec3::new(5.0, 0.0, -0.07)], Frame::Lidar, 0.0);
        let proj = project_cloud(&cloud, &t_bl, &t_cb, &k());
        assert_eq!(proj.len(), 1);
        let bbox = BBox { u_min: 0.0, v_min: 0.0, u_max: 640.0, v_max: 480.0 };
        let out = filter_by_bbox(&cloud, &proj, &bbox, &t_bl);
        assert_eq!(out.points.len(), 1);
        assert!(out.points[0].x > 0.0);
    }

    #[test]
    fn three_events_cumulate() {
        let mut buf = DetectionBuffer::default();
        assert_eq!(buf.push_and_poll(fc(10, 0.0)).unwrap(), None);
        assert_eq!(buf.push_and_poll(fc(12, 0.5)).unwrap(), None);
        let out = buf.push_and_poll(fc(8, 1.0)).unwrap().unwrap();
        assert_eq!(out.len(), 30);
        assert_eq!(out.frame, Frame::Body);
        assert!(buf.is_empty());
    }

    #[test]
    fn gap_resets_buffer() {
        let mut buf = DetectionBuffer::default();
        buf.push_and_poll(fc(10, 0.0)).unwrap();
        buf.push_and_poll(fc(10, 0.5)).unwrap();
        assert_eq!(buf.push_and_poll(fc(10, 2.0)).unwrap(), None);
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn non_monotonic_timestamp_is_rejected() {
        let mut buf = DetectionBuffer::default();
        buf.push_and_poll(fc(1, 1.0)).unwrap();
        assert!(matches!(buf.push_and_poll(fc(1, 0.5)), Err(FusionError::NonMonotonicTimestamp { .. })));
    }

    #[test]
    fn cumulation_compensates_motion() {
        let mut buf = DetectionBuffer::default();
        let world_pt = Vec3::new(10.0, 2.0, 5.0);
        let mut out = None;
        for (i, x) in [0.0, 0.4, 0.8].iter().enumerate() {
            let pose = RigidTransform::from_yaw(0.1 * i as f64, Vec3::new(*x, 0.0, 5.0), Frame::Body, Frame::World);
            let mut f = fc(0, i as f64 * 0.5);
            f.points.push(pose.inverse().transform_point(&world_pt));
            f.body_pose = pose;
            out = buf.push_and_poll(f).unwrap();
        }
        let out = out.unwrap();
        let last = RigidTransform::from_yaw(0.2, Vec3::new(0.8, 0.0, 5.0), Frame::Body, Frame::World);
        for p in &out.points {
            assert!((last.transform_point(p) - world_pt).norm() < 1e-9);
        }
    }

    #[test]
    fn tracker_separates_candidates() {
        let mut tr = DetectionTracker::new(1.0, 1.0);
        let a = Vec3::new(0.0, 0.0, 10.0);
        let b = Vec3::new(0.0, 3.0, 10.0);
        for i in 0..2 {
            assert!(tr.push(a, fc(5, i as f64 * 0.5)).unwrap().is_none());
            assert!(tr.push(b, fc(7, i as f64 * 0.5)).unwrap().is_none());
        }
        assert_eq!(tr.push(a, fc(5, 1.0)).unwrap().unwrap().len(), 15);
        assert_eq!(tr.push(b, fc(7, 1.0)).unwrap().unwrap().len(), 21);
        assert_eq!(tr.track_count(), 0);
    }

    proptest! {
        #[test]
        fn filter_is_subset_idempotent_and_monotone(
            seed in 0u64..1000,
            u0 in 0.0f64..600.0, v0 in 0.0f64..440.0,
            du in 1.0f64..300.0, dv in 1.0f64..300.0,
            shrink in 0.0f64..0.5,
        ) {
            let t_bl = RigidTransform::identity(Frame::Lidar, Frame::Body);
            let t_cb = RigidTransform::identity(Frame::Body, Frame::Camera);
            let mut rng = SeedStream::new(seed).rng();
            let pts: Vec<Vec3> = (0..200)
                .map(|_| Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-1.0..8.0)))
                .collect();
            let cloud = PointCloud::new(pts.clone(), Frame::Lidar, 0.0);
            let bbox = BBox { u_min: u0, v_min: v0, u_max: u0 + du, v_max: v0 + dv };
            let proj = project_cloud(&cloud, &t_bl, &t_cb, &k());
            let once = filter_by_bbox(&cloud, &proj, &bbox, &t_bl);
            for p in &once.points {
                prop_assert!(pts.contains(p));
            }
            let again_cloud = PointCloud::new(once.points.clone(), Frame::Lidar, 0.0);
            let again = filter_by_bbox(&again_cloud, &project_cloud(&again_cloud, &t_bl, &t_cb, &k()), &bbox, &t_bl);
            prop_assert_eq!(&again.points, &once.points);
            let inner = bbox.shrink(shrink * du.min(dv));
            let smaller = filter_by_bbox(&cloud, &proj, &inner, &t_bl);
            prop_assert!(smaller.points.len() <= once.points.len());
        }

        #[test]
        fn cumulated_size_is_sum(a in 0usize..50, b in 0usize..50, c in 0usize..50) {
            let mut buf = DetectionBuffer::default();
            buf.push_and_poll(fc(a, 0.0)).unwrap();
            buf.push_and_poll(fc(b, 0.2)).unwrap();
            let out = buf.push_and_poll(fc(c, 0.4)).unwrap().unwrap();
            prop_assert_eq!(out.len(), a + b + c);
        }
    }
}
