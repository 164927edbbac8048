//! Insulator center/axis estimation from a cumulated body-frame cloud.
//!
//! Four methods share the same building blocks: density clustering,
//! two-point RANSAC line fitting, principal-axis fitting and a median of
//! projections onto the fitted axis.

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::PointCloud;
use crate::geometry::Vec3;
use crate::rng::SimRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("no cluster found")]
    NoCluster,
    #[error("degenerate input")]
    DegenerateInput,
    #[error("no points within tau of the line")]
    NoPointsWithinTau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Ascending indices into the source points.
    pub point_indices: Vec<usize>,
    pub center: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineModel {
    pub anchor: Vec3,
    pub direction: Vec3,
}

impl LineModel {
    pub fn distance(&self, p: &Vec3) -> f64 {
        let d = p - self.anchor;
        (d - self.direction * d.dot(&self.direction)).norm()
    }

    pub fn parameter(&self, p: &Vec3) -> f64 {
        (p - self.anchor).dot(&self.direction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizerParams {
    pub tau: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub ransac_iters: usize,
    pub ransac_inlier_dist: f64,
    pub rng_seed: u64,
}

impl Default for LocalizerParams {
    fn default() -> Self {
        Self {
            tau: 0.3,
            dbscan_eps: 0.25,
            dbscan_min_pts: 4,
            ransac_iters: 200,
            ransac_inlier_dist: 0.15,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Dbscan,
    Ransac,
    DbscanRansac,
    DbscanPca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dbscan, Method::Ransac, Method::DbscanRansac, Method::DbscanPca];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dbscan => "DBSCAN",
            Method::Ransac => "RANSAC",
            Method::DbscanRansac => "DBSCAN_RANSAC",
            Method::DbscanPca => "DBSCAN_PCA",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsulatorEstimate {
    pub center: Vec3,
    pub orientation: Vec3,
    pub method: Method,
    pub timestamp: f64,
}

fn mean(points: &[Vec3], idx: &[usize]) -> Vec3 {
    idx.iter().fold(Vec3::zeros(), |acc, i| acc + points[*i]) / idx.len() as f64
}

type Cell = (i64, i64, i64);

struct Grid {
    eps: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl Grid {
    fn new(points: &[Vec3], eps: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, eps)).or_default().push(i);
        }
        Self { eps, cells }
    }

    fn key(p: &Vec3, eps: f64) -> Cell {
        (
            (p.x / eps).floor() as i64,
            (p.y / eps).floor() as i64,
            (p.z / eps).floor() as i64,
        )
    }

    /// Indices within `eps` of point `i` (itself included), ascending.
    fn neighbors(&self, points: &[Vec3], i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = &points[i];
        let (cx, cy, cz) = Self::key(p, self.eps);
        let eps2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(c) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(c.iter().copied().filter(|&j| (points[j] - p).norm_squared() <= eps2));
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// Density clustering; neighborhoods are closed balls of radius `eps` that
/// include the query point. Clusters are reported in discovery order.
pub fn dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Vec<Cluster> {
    if points.is_empty() || !(eps > 0.0) {
        return Vec::new();
    }
    const UNSEEN: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let grid = Grid::new(points, eps);
    let mut label = vec![UNSEEN; points.len()];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut nbrs = Vec::new();
    let mut queue = Vec::new();
    for i in 0..points.len() {
        if label[i] != UNSEEN {
            continue;
        }
        grid.neighbors(points, i, &mut nbrs);
        if nbrs.len() < min_pts {
            label[i] = NOISE;
            continue;
        }
        let c = members.len();
        members.push(vec![i]);
        label[i] = c;
        queue.clear();
        queue.extend(nbrs.iter().copied().filter(|&j| j != i));
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            if label[j] == NOISE {
                label[j] = c;
                members[c].push(j);
                continue;
            }
            if label[j] != UNSEEN {
                continue;
            }
            label[j] = c;
            members[c].push(j);
            grid.neighbors(points, j, &mut nbrs);
            if nbrs.len() >= min_pts {
                queue.extend(nbrs.iter().copied().filter(|&k| label[k] == UNSEEN || label[k] == NOISE));
            }
        }
    }
    members
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            let center = mean(points, &idx);
            Cluster {
                point_indices: idx,
                center,
            }
        })
        .collect()
}

/// Cluster whose mean is closest to `origin`; ties go to the lowest
/// first index.
pub fn nearest_cluster<'a>(clusters: &'a [Cluster], origin: &Vec3) -> Result<&'a Cluster, LocalizationError> {
    clusters
        .iter()
        .min_by(|a, b| {
            let da = (a.center - origin).norm();
            let db = (b.center - origin).norm();
            da.total_cmp(&db).then(a.point_indices[0].cmp(&b.point_indices[0]))
        })
        .ok_or(LocalizationError::NoCluster)
}

/// Flips `v` so its largest-magnitude component is positive.
pub fn canonical_sign(v: Vec3) -> Vec3 {
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

fn all_coincide(points: &[Vec3]) -> bool {
    points.iter().all(|p| (p - points[0]).norm() <= 1e-12)
}

/// Centroid and dominant covariance eigenvector.
pub fn pca_axis(points: &[Vec3]) -> Result<(Vec3, Vec3), LocalizationError> {
    if points.len() < 2 || all_coincide(points) {
        return Err(LocalizationError::DegenerateInput);
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(k).normalize();
    Ok((c, canonical_sign(v)))
}

/// Best two-point line by inlier count, refined by PCA over its inliers.
/// Returns the refined line and the inliers of the winning hypothesis.
pub fn ransac_line(points: &[Vec3], params: &LocalizerParams) -> Result<(LineModel, Vec<usize>), LocalizationError> {
    if points.len() < 2 || all_coincide(points) {
        return Err(LocalizationError::DegenerateInput);
    }
    let mut rng = SimRng::seed_from_u64(params.rng_seed);
    let n = points.len();
    let thr = params.ransac_inlier_dist;
    let mut best: Option<(usize, LineModel)> = None;
    for _ in 0..params.ransac_iters.max(1) {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let d = points[j] - points[i];
        if d.norm() <= 1e-12 {
            continue;
        }
        let line = LineModel {
            anchor: points[i],
            direction: d.normalize(),
        };
        let count = points.iter().filter(|p| line.distance(p) <= thr).count();
        if best.as_ref().is_none_or(|b| count > b.0) {
            best = Some((count, line));
        }
    }
    let line = match best {
        Some((_, l)) => l,
        None => {
            // every draw hit a duplicate pair; fall back to the farthest pair
            let far = (1..n)
                .max_by(|a, b| (points[*a] - points[0]).norm().total_cmp(&(points[*b] - points[0]).norm()))
                .expect("n >= 2");
            LineModel {
                anchor: points[0],
                direction: (points[far] - points[0]).normalize(),
            }
        }
    };
    let inliers: Vec<usize> = (0..n).filter(|i| line.distance(&points[*i]) <= thr).collect();
    let sel: Vec<Vec3> = inliers.iter().map(|i| points[*i]).collect();
    let refined = match pca_axis(&sel) {
        Ok((c, v)) => LineModel { anchor: c, direction: v },
        Err(_) => LineModel {
            anchor: line.anchor,
            direction: canonical_sign(line.direction),
        },
    };
    Ok((refined, inliers))
}

/// Median of the line parameters of points within `tau` of the line.
pub fn median_projection_center(points: &[Vec3], line: &LineModel, tau: f64) -> Result<Vec3, LocalizationError> {
    let mut ts: Vec<f64> = points
        .iter()
        .filter(|p| line.distance(p) <= tau)
        .map(|p| line.parameter(p))
        .collect();
    if ts.is_empty() {
        return Err(LocalizationError::NoPointsWithinTau);
    }
    ts.sort_by(f64::total_cmp);
    let m = ts.len();
    let t = if m % 2 == 1 {
        ts[m / 2]
    } else {
        0.5 * (ts[m / 2 - 1] + ts[m / 2])
    };
    Ok(line.anchor + line.direction * t)
}

fn nearest_points(cloud: &PointCloud, params: &LocalizerParams) -> Result<Vec<Vec3>, LocalizationError> {
    let clusters = dbscan(&cloud.points, params.dbscan_eps, params.dbscan_min_pts);
    let nearest = nearest_cluster(&clusters, &Vec3::zeros())?;
    Ok(nearest.point_indices.iter().map(|i| cloud.points[*i]).collect())
}

fn estimate(center: Vec3, orientation: Vec3, method: Method, cloud: &PointCloud) -> InsulatorEstimate {
    InsulatorEstimate {
        center,
        orientation,
        method,
        timestamp: cloud.timestamp,
    }
}

/// Nearest DBSCAN cluster; center is its mean, orientation its principal axis.
pub fn localize_dbscan(cloud: &PointCloud, params: &LocalizerParams) -> Result<InsulatorEstimate, LocalizationError> {
    let pts = nearest_points(cloud, params)?;
    let (c, v) = pca_axis(&pts)?;
    Ok(estimate(c, v, Method::Dbscan, cloud))
}

/// RANSAC over the whole cloud; its inlier set acts as the cluster.
pub fn localize_ransac(cloud: &PointCloud, params: &LocalizerParams) -> Result<InsulatorEstimate, LocalizationError> {
    let (line, inliers) = ransac_line(&cloud.points, params)?;
    let sel: Vec<Vec3> = inliers.iter().map(|i| cloud.points[*i]).collect();
    let c = median_projection_center(&sel, &line, params.tau)?;
    Ok(estimate(c, line.direction, Method::Ransac, cloud))
}

/// DBSCAN, then RANSAC on the nearest cluster, then the median projection.
pub fn localize_dbscan_ransac(cloud: &PointCloud, params: &LocalizerParams) -> Result<InsulatorEstimate, LocalizationError> {
    let pts = nearest_points(cloud, params)?;
    let (line, inliers) = ransac_line(&pts, params)?;
    let sel: Vec<Vec3> = inliers.iter().map(|i| pts[*i]).collect();
    let c = median_projection_center(&sel, &line, params.tau)?;
    Ok(estimate(c, line.direction, Method::DbscanRansac, cloud))
}

/// DBSCAN and PCA, re-clustering the near-axis points once when they split.
pub fn localize_dbscan_pca(cloud: &PointCloud, params: &LocalizerParams) -> Result<InsulatorEstimate, LocalizationError> {
    let pts = nearest_points(cloud, params)?;
    let (c, v) = pca_axis(&pts)?;
    let line = LineModel { anchor: c, direction: v };
    let near: Vec<Vec3> = pts.iter().copied().filter(|p| line.distance(p) <= params.tau).collect();
    let sub = dbscan(&near, params.dbscan_eps, params.dbscan_min_pts);
    if sub.len() <= 1 {
        return Ok(estimate(c, v, Method::DbscanPca, cloud));
    }
    let largest = sub
        .iter()
        .max_by(|a, b| {
            a.point_indices
                .len()
                .cmp(&b.point_indices.len())
                .then(b.point_indices[0].cmp(&a.point_indices[0]))
        })
        .expect("non-empty");
    let t: Vec<Vec3> = largest.point_indices.iter().map(|i| near[*i]).collect();
    let (c2, v2) = pca_axis(&t)?;
    let line2 = LineModel { anchor: c2, direction: v2 };
    let center = median_projection_center(&pts, &line2, params.tau)?;
    Ok(estimate(center, v2, Method::DbscanPca, cloud))
}

pub fn localize(method: Method, cloud: &PointCloud, params: &LocalizerParams) -> Result<InsulatorEstimate, LocalizationError> {
    match method {
        Method::Dbscan => localize_dbscan(cloud, params),
        Method::Ransac => localize_ransac(cloud, params),
        Method::DbscanRansac => localize_dbscan_ransac(cloud, params),
        Method::DbscanPca => localize_dbscan_pca(cloud, params),
    }
}
