//! Paired single-flight vs two-flight comparison over the standard scene
//! family.

use anyhow::Context;
use insulator_inspect::baseline::two_flight_duration;
use insulator_inspect::mission::{run_mission, MissionConfig};
use insulator_inspect::scene::{SceneConfig, TowerKind};
use serde::Serialize;

use crate::stats::{mean, spearman, Spearman};

pub const DEFAULT_NS: [usize; 6] = [4, 8, 12, 16, 20, 24];

/// Column names are part of the CSV contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub scene_id: String,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T_fusion")]
    pub t_fusion: f64,
    #[serde(rename = "T_scan")]
    pub t_scan: f64,
    #[serde(rename = "T_tsp")]
    pub t_tsp: f64,
    pub total_two_flight: f64,
    /// 100 (total - T_fusion) / total.
    pub savings_pct: f64,
}

pub fn scene_id(kind: TowerKind, seed: u64) -> String {
    format!("std-{kind:?}-{seed}")
}

/// One paired run: the single-flight mission inspects every insulator with
/// `n / insulators` views and the baseline visits the same number of views.
pub fn compare_one(kind: TowerKind, seed: u64, n: usize, base: &MissionConfig) -> anyhow::Result<CompareRow> {
    let scene = SceneConfig::standard(kind, seed);
    let count = scene.towers[0].insulators.len();
    anyhow::ensure!(count > 0, "scene {} carries no insulators", scene_id(kind, seed));
    anyhow::ensure!(
        n > 0 && n % count == 0,
        "N = {n} is not a positive multiple of the {count} insulators of tower {kind:?}"
    );
    let cfg = MissionConfig {
        per_insulator: n / count,
        ..base.clone()
    };
    let log = run_mission(&scene, &cfg).with_context(|| format!("mission on {}", scene_id(kind, seed)))?;
    anyhow::ensure!(!log.failed, "mission on {} failed", scene_id(kind, seed));
    let two = two_flight_duration(&scene, n, &cfg).with_context(|| format!("baseline on {}", scene_id(kind, seed)))?;
    Ok(CompareRow {
        scene_id: scene_id(kind, seed),
        seed,
        n,
        t_fusion: log.total_duration,
        t_scan: two.t_scan,
        t_tsp: two.t_tsp,
        total_two_flight: two.total,
        savings_pct: 100.0 * (two.total - log.total_duration) / two.total,
    })
}

/// All (N, seed) pairs, ordered by N then seed.
pub fn run_compare(kind: TowerKind, ns: &[usize], seeds: &[u64], base: &MissionConfig) -> anyhow::Result<Vec<CompareRow>> {
    anyhow::ensure!(!ns.is_empty() && !seeds.is_empty(), "empty N list or seed list");
    base.validate()?;
    let mut rows = Vec::with_capacity(ns.len() * seeds.len());
    for &n in ns {
        for &seed in seeds {
            rows.push(compare_one(kind, seed, n, base)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    /// (N, mean savings in percent), ascending N.
    pub mean_savings: Vec<(usize, f64)>,
    /// Rank correlation of savings against N over all rows.
    pub trend: Spearman,
}

pub fn summarize(rows: &[CompareRow]) -> CompareSummary {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mean_savings = ns
        .iter()
        .map(|&n| {
            let s: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.savings_pct).collect();
            (n, mean(&s))
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.savings_pct).collect();
    CompareSummary {
        mean_savings,
        trend: spearman(&x, &y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_must_be_a_multiple_of_the_insulator_count() {
        let err = compare_one(TowerKind::B, 0, 6, &MissionConfig::default()).unwrap_err();
        assert!(err.to_string().contains("multiple"));
    }

    #[test]
    fn paired_row_columns_are_consistent() {
        let row = compare_one(TowerKind::B, 1, 8, &MissionConfig::default()).unwrap();
        assert_eq!(row.total_two_flight, row.t_scan + row.t_tsp);
        let s = 100.0 * (row.total_two_flight - row.t_fusion) / row.total_two_flight;
        assert_eq!(row.savings_pct, s);
        assert!(row.t_fusion > 0.0 && row.t_scan > 0.0 && row.t_tsp > 0.0);
    }

    #[test]
    fn summary_groups_by_n() {
        let row = |n, s| CompareRow {
            scene_id: "x".into(),
            seed: 0,
            n,
            t_fusion: 1.0,
            t_scan: 1.0,
            t_tsp: 1.0,
            total_two_flight: 2.0,
            savings_pct: s,
        };
        let rows = vec![row(4, 10.0), row(4, 20.0), row(8, 5.0), row(8, 7.0), row(12, 1.0)];
        let s = summarize(&rows);
        assert_eq!(s.mean_savings, vec![(4, 15.0), (8, 6.0), (12, 1.0)]);
        assert!(s.trend.rho < 0.0);
    }
}
