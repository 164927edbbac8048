//! Two-flight strategy: a full scan flight, then an inspection flight that
//! visits every view in TSP order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::mission::{exploration_duration, MissionConfig};
use crate::planner::{
    build_exploration_path, compute_inspection_waypoints, plan_safe, DynamicLimits, InspectionWaypoint,
    PlanningError, SafetyRegion, DEFAULT_SAFETY_MARGIN,
};
use crate::scene::{SceneConfig, SceneError};

/// Largest matrix (depot included) accepted by the exact solver.
pub const MAX_EXACT_NODES: usize = 13;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("exact TSP limited to {max} nodes, got {n}")]
    TooLargeForExact { n: usize, max: usize },
    #[error("cost matrix is empty")]
    Empty,
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Square matrix of travel durations in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    data[i * n + j] = f(i, j);
                }
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Open-path cost of visiting `order` in sequence.
    pub fn path_cost(&self, order: &[usize]) -> f64 {
        order.windows(2).map(|w| self.get(w[0], w[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TspMode {
    Exact,
    TwoOpt,
}

/// Open tour starting at node 0 (the depot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub order: Vec<usize>,
    pub total_duration: f64,
}

pub fn solve_tsp(costs: &CostMatrix, mode: TspMode) -> Result<Tour, BaselineError> {
    if costs.is_empty() {
        return Err(BaselineError::Empty);
    }
    let order = match mode {
        TspMode::Exact => held_karp(costs)?,
        TspMode::TwoOpt => two_opt(costs, nearest_neighbor(costs)),
    };
    Ok(Tour {
        total_duration: costs.path_cost(&order),
        order,
    })
}

fn held_karp(c: &CostMatrix) -> Result<Vec<usize>, BaselineError> {
    let n = c.len();
    if n > MAX_EXACT_NODES {
        return Err(BaselineError::TooLargeForExact { n, max: MAX_EXACT_NODES });
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    // Bit b of a mask stands for node b + 1.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut dp = vec![f64::INFINITY; (full + 1) * m];
    let mut parent = vec![usize::MAX; (full + 1) * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = c.get(0, j + 1);
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * m + j];
            if !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = cur + c.get(j + 1, k + 1);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                    parent[next * m + k] = j;
                }
            }
        }
    }
    let mut last = 0;
    for j in 1..m {
        if dp[full * m + j] < dp[full * m + last] {
            last = j;
        }
    }
    let mut rev = Vec::with_capacity(n);
    let mut mask = full;
    let mut j = last;
    loop {
        rev.push(j + 1);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if p == usize::MAX {
            break;
        }
        j = p;
    }
    rev.push(0);
    rev.reverse();
    Ok(rev)
}

fn nearest_neighbor(c: &CostMatrix) -> Vec<usize> {
    let n = c.len();
    let mut visited = vec![false; n];
    let mut order = vec![0];
    visited[0] = true;
    for _ in 1..n {
        let cur = *order.last().expect("non-empty");
        let next = (0..n)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| c.get(cur, a).total_cmp(&c.get(cur, b)))
            .expect("unvisited node left");
        visited[next] = true;
        order.push(next);
    }
    order
}

/// 2-opt on an open path with a fixed first node; first improvement until
/// no reversal shortens the path.
fn two_opt(c: &CostMatrix, mut order: Vec<usize>) -> Vec<usize> {
    let n = order.len();
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..n.saturating_sub(1) {
            for k in i + 1..n {
                let a = order[i - 1];
                let (b, d) = (order[i], order[k]);
                let mut delta = c.get(a, d) - c.get(a, b);
                if k + 1 < n {
                    let e = order[k + 1];
                    delta += c.get(b, e) - c.get(d, e);
                }
                if delta < -1e-9 {
                    order[i..=k].reverse();
                    improved = true;
                }
            }
        }
    }
    order
}

/// Durations between the depot (node 0) and the views (nodes 1..).
/// Entries are planned once per unordered pair and mirrored.
pub fn build_cost_matrix(
    waypoints: &[InspectionWaypoint],
    depot: &Vec3,
    safety: &SafetyRegion,
    limits: &DynamicLimits,
) -> Result<CostMatrix, BaselineError> {
    let pts: Vec<Vec3> = std::iter::once(*depot).chain(waypoints.iter().map(|w| w.position)).collect();
    let n = pts.len();
    let mut upper = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            upper[i * n + j] = plan_safe(&pts[i], &pts[j], safety, limits)?.total_duration();
        }
    }
    Ok(CostMatrix::from_fn(n, |i, j| upper[i.min(j) * n + i.max(j)]))
}

/// Duration of the dwell-free exploration flight around tower 0.
pub fn scan_flight_duration(scene: &SceneConfig, limits: &DynamicLimits, standoff: f64) -> Result<f64, BaselineError> {
    scan_flight_with_margin(scene, limits, standoff, DEFAULT_SAFETY_MARGIN).map(|(t, _)| t)
}

fn scan_flight_with_margin(
    scene: &SceneConfig,
    limits: &DynamicLimits,
    standoff: f64,
    margin: f64,
) -> Result<(f64, Vec3), BaselineError> {
    scene.validate()?;
    let tower = &scene.towers[0];
    let safety = SafetyRegion::new(tower, &scene.neighbors, margin);
    let path = build_exploration_path(tower, &scene.neighbors, standoff, limits, &safety)?;
    let t = exploration_duration(&path, limits, &safety)?;
    let end = path.waypoints.last().expect("path is non-empty").position;
    Ok((t, end))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoFlight {
    pub t_scan: f64,
    /// Tour travel plus one capture dwell per view.
    pub t_tsp: f64,
    pub total: f64,
    pub waypoints: usize,
    pub mode: TspMode,
}

/// Scan flight followed by a TSP-ordered inspection of `n` views placed
/// around the ground-truth insulators of tower 0. Each insulator gets
/// `n / insulators` views (at least one); the list is capped at `n`.
pub fn two_flight_duration(scene: &SceneConfig, n: usize, cfg: &MissionConfig) -> Result<TwoFlight, BaselineError> {
    let (t_scan, depot) = scan_flight_with_margin(scene, &cfg.limits, cfg.exploration_standoff, cfg.safety_margin)?;
    let tower = &scene.towers[0];
    let safety = SafetyRegion::new(tower, &scene.neighbors, cfg.safety_margin);
    let per = if tower.insulators.is_empty() {
        0
    } else {
        (n / tower.insulators.len()).max(1)
    };
    let mut views = Vec::new();
    for ins in &tower.insulators {
        views.extend(compute_inspection_waypoints(&ins.center, ins.id, cfg.inspection_standoff, per, &safety)?);
    }
    views.truncate(n);
    let costs = build_cost_matrix(&views, &depot, &safety, &cfg.limits)?;
    let mode = if costs.len() <= MAX_EXACT_NODES {
        TspMode::Exact
    } else {
        TspMode::TwoOpt
    };
    let tour = solve_tsp(&costs, mode)?;
    let t_tsp = tour.total_duration + cfg.capture_dwell * views.len() as f64;
    Ok(TwoFlight {
        t_scan,
        t_tsp,
        total: t_scan + t_tsp,
        waypoints: views.len(),
        mode,
    })
}
