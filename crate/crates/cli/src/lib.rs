//! Library side of the `insulator-sim` command-line tool. Every subcommand
//! is a pure function from its arguments to output text so that the binary
//! only handles argument parsing and file IO.

pub mod bench;
pub mod compare;
pub mod stats;

use std::path::Path;

use anyhow::Context;
use insulator_inspect::mission::{log_is_safe, run_mission, MissionConfig, MissionLog};
use insulator_inspect::planner::SafetyRegion;
use insulator_inspect::scene::{SceneConfig, TowerKind};
use serde::Serialize;

pub use bench::{run_bench, BenchConfig, BenchRow};
pub use compare::{run_compare, summarize, CompareRow, CompareSummary};

pub fn parse_tower(s: &str) -> anyhow::Result<TowerKind> {
    match s.trim() {
        "A" | "a" => Ok(TowerKind::A),
        "B" | "b" => Ok(TowerKind::B),
        other => anyhow::bail!("unknown tower kind {other:?} (expected A or B)"),
    }
}

/// Tower kind of a loaded scene, judged by the insulator count of tower 0.
pub fn infer_tower_kind(scene: &SceneConfig) -> TowerKind {
    match scene.towers.first().map(|t| t.insulators.len()) {
        Some(4) => TowerKind::B,
        _ => TowerKind::A,
    }
}

pub fn scene_to_json(scene: &SceneConfig) -> String {
    let mut s = serde_json::to_string_pretty(scene).expect("scene serializes");
    s.push('\n');
    s
}

pub fn load_scene(path: &Path) -> anyhow::Result<SceneConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scene: SceneConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    scene.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(scene)
}

pub fn load_mission_config(path: &Path) -> anyhow::Result<MissionConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: MissionConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    cfg.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(cfg)
}

/// Header row followed by one record per row.
pub fn to_csv<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Left-aligned text columns separated by two spaces.
pub fn format_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let s: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.tower_kind.clone(),
                format!("{}", r.w),
                r.method.clone(),
                format!("{:.3} +- {:.3}", r.mean_error_m, r.std_error_m),
                format!("{:.3} +- {:.3}", r.mean_xy_error_m, r.std_xy_error_m),
                format!("{:.3} +- {:.3}", r.mean_z_error_m, r.std_z_error_m),
                format!("{}/{}", r.n_trials - r.n_failed, r.n_trials),
            ]
        })
        .collect();
    format_table(&["tower", "w [m]", "method", "error [m]", "xy [m]", "z [m]", "ok"], &body)
}

pub fn compare_table(rows: &[CompareRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.scene_id.clone(),
                r.n.to_string(),
                format!("{:.1}", r.t_fusion),
                format!("{:.1}", r.t_scan),
                format!("{:.1}", r.t_tsp),
                format!("{:.1}", r.total_two_flight),
                format!("{:.2}", r.savings_pct),
            ]
        })
        .collect();
    let mut out = format_table(
        &["scene", "N", "T_fusion [s]", "T_scan [s]", "T_tsp [s]", "two-flight [s]", "savings [%]"],
        &body,
    );
    let s = summarize(rows);
    out.push('\n');
    let means: Vec<Vec<String>> = s
        .mean_savings
        .iter()
        .map(|(n, m)| vec![n.to_string(), format!("{m:.2}")])
        .collect();
    out += &format_table(&["N", "mean savings [%]"], &means);
    out += &format!(
        "\nSpearman rho(N, savings) = {:.3}, p = {:.3e}, n = {}\n",
        s.trend.rho, s.trend.p_value, s.trend.n
    );
    out
}

/// Mission run plus the artefacts written by `mission-sim`.
pub struct MissionOutput {
    pub log: MissionLog,
    pub json: String,
    pub path_csv: String,
    pub safe: bool,
}

pub fn mission_sim(scene: &SceneConfig, cfg: &MissionConfig) -> anyhow::Result<MissionOutput> {
    let log = run_mission(scene, cfg)?;
    let safety = SafetyRegion::new(&scene.towers[0], &scene.neighbors, cfg.safety_margin);
    let safe = log_is_safe(&log, &safety);
    let json = log.to_json() + "\n";
    let path_csv = log.flight_path_csv();
    Ok(MissionOutput {
        log,
        json,
        path_csv,
        safe,
    })
}

pub fn mission_table(out: &MissionOutput) -> String {
    let log = &out.log;
    let body: Vec<Vec<String>> = log
        .registry
        .entries
        .iter()
        .map(|e| {
            let n = log.captures.iter().filter(|c| c.insulator_id == e.id).count();
            vec![
                e.id.to_string(),
                format!("{:.2}", e.world_center.x),
                format!("{:.2}", e.world_center.y),
                format!("{:.2}", e.world_center.z),
                n.to_string(),
            ]
        })
        .collect();
    let mut s = format_table(&["id", "x [m]", "y [m]", "z [m]", "captures"], &body);
    s += &format!(
        "\nT_fusion = {:.1} s (flight {:.1} s, dwell {:.1} s), {} registered, {} captures, safe = {}, failed = {}\n",
        log.total_duration,
        log.flight_time,
        log.dwell_time,
        log.registry.entries.len(),
        log.captures.len(),
        out.safe,
        log.failed
    );
    s
}
