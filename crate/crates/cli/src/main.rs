use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use insulator_inspect::localization::Method;
use insulator_inspect::mission::MissionConfig;
use insulator_inspect::scene::{SceneConfig, TowerKind};
use insulator_sim::{
    bench_table, compare_table, infer_tower_kind, load_mission_config, load_scene, mission_sim, mission_table,
    parse_tower, run_bench, run_compare, scene_to_json, to_csv, BenchConfig,
};

#[derive(Parser)]
#[command(name = "insulator-sim", version, about = "Insulator localization and inspection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Root seed of every random stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (directory for mission-sim).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a standard scene config as JSON.
    SceneGen {
        #[command(flatten)]
        common: Common,
        /// Tower kind: A (12 insulators) or B (4 insulators).
        #[arg(long, value_parser = parse_tower)]
        tower: TowerKind,
    },
    /// Localization error statistics per method and distance.
    LocalizeBench {
        #[command(flatten)]
        common: Common,
        /// Scene config JSON; defaults to the standard scene of --tower.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_tower, default_value = "A")]
        tower: TowerKind,
        /// Distances from the insulator in meters.
        #[arg(long, value_delimiter = ',', default_values_t = vec![8.0, 9.0, 10.0])]
        w: Vec<f64>,
        /// Methods: DBSCAN, RANSAC, DBSCAN_RANSAC, DBSCAN_PCA.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Vec<Method>,
        #[arg(long, default_value_t = insulator_sim::bench::DEFAULT_TRIALS)]
        trials: usize,
        /// Disable LiDAR and detector noise.
        #[arg(long)]
        noiseless: bool,
    },
    /// Run one single-flight mission; writes mission_log.json and flight_path.csv.
    MissionSim {
        #[command(flatten)]
        common: Common,
        /// Scene config JSON; defaults to the standard scene of --tower.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_tower, default_value = "B")]
        tower: TowerKind,
        /// Mission parameters JSON; missing fields take defaults.
        #[arg(long)]
        mission: Option<PathBuf>,
    },
    /// Single-flight vs two-flight durations over the standard scene family.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Mission parameters JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_tower, default_value = "B")]
        tower: TowerKind,
        /// Total inspection waypoint counts.
        #[arg(long = "n", value_delimiter = ',', default_values_t = insulator_sim::compare::DEFAULT_NS.to_vec())]
        ns: Vec<usize>,
        /// Number of scene seeds, starting at --seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?}"))
}

fn scene_from(config: Option<&Path>, tower: TowerKind, seed: u64) -> anyhow::Result<(SceneConfig, TowerKind)> {
    match config {
        Some(p) => {
            let mut scene = load_scene(p)?;
            scene.seed = seed;
            let kind = infer_tower_kind(&scene);
            Ok((scene, kind))
        }
        None => Ok((SceneConfig::standard(tower, seed), tower)),
    }
}

fn mission_cfg(path: Option<&Path>) -> anyhow::Result<MissionConfig> {
    path.map_or_else(|| Ok(MissionConfig::default()), load_mission_config)
}

/// Writes `csv` to `out`, or to stdout when no file is given.
fn emit(out: Option<&Path>, csv: &str, table: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
            print!("{table}");
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::SceneGen { common, tower } => {
            let json = scene_to_json(&SceneConfig::standard(tower, common.seed));
            match common.out {
                Some(p) => std::fs::write(&p, json).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{json}"),
            }
        }
        Command::LocalizeBench {
            common,
            config,
            tower,
            w,
            methods,
            trials,
            noiseless,
        } => {
            let (mut scene, kind) = scene_from(config.as_deref(), tower, common.seed)?;
            if noiseless {
                scene.lidar = scene.lidar.clone().noiseless();
                scene.detector = scene.detector.clone().noiseless();
            }
            let mut cfg = BenchConfig::new(scene, kind, common.seed);
            cfg.ws = w;
            cfg.trials = trials;
            if !methods.is_empty() {
                cfg.methods = methods;
            }
            let rows = run_bench(&cfg)?;
            emit(common.out.as_deref(), &to_csv(&rows)?, &bench_table(&rows))?;
        }
        Command::MissionSim {
            common,
            config,
            tower,
            mission,
        } => {
            let (scene, _) = scene_from(config.as_deref(), tower, common.seed)?;
            let cfg = mission_cfg(mission.as_deref())?;
            let out = mission_sim(&scene, &cfg)?;
            let dir = common.out.unwrap_or_else(|| PathBuf::from("mission_out"));
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            std::fs::write(dir.join("mission_log.json"), &out.json)?;
            std::fs::write(dir.join("flight_path.csv"), &out.path_csv)?;
            print!("{}", mission_table(&out));
            anyhow::ensure!(!out.log.failed, "mission failed; see {}", dir.join("mission_log.json").display());
        }
        Command::Compare {
            common,
            config,
            tower,
            ns,
            seeds,
        } => {
            let cfg = mission_cfg(config.as_deref())?;
            let seed_list: Vec<u64> = (common.seed..common.seed + seeds).collect();
            let rows = run_compare(tower, &ns, &seed_list, &cfg)?;
            emit(common.out.as_deref(), &to_csv(&rows)?, &compare_table(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
