//! Batch runs and their outputs: `episodes.jsonl` (one record per episode),
//! `summary.tsv` and `curve.dat` (per-episode means, whitespace columns).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use waypref_core::usersim::UserProfile;
use waypref_core::{Pose, WorldMap};

use crate::config::{world_name, RunConfig};
use crate::harness::{run_curriculum, Environment, EpisodeMetrics, HarnessError, Mission};

pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const SUMMARY_FILE: &str = "summary.tsv";
pub const CURVE_FILE: &str = "curve.dat";

/// Episodes averaged at each end of a curve.
pub const WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Learned,
    Frozen,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Learned => "learned",
            Arm::Frozen => "frozen",
        }
    }
}

/// One line of `episodes.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub profile: String,
    pub arm: Arm,
    #[serde(flatten)]
    pub metrics: EpisodeMetrics,
}

pub fn mission_of(cfg: &RunConfig) -> Mission {
    let [x, y, yaw] = cfg.mission.start;
    Mission {
        world_name: world_name(&cfg.world),
        start_pose: Pose::new(x, y, yaw.to_radians()),
        targets: cfg.mission.targets.clone(),
        time_limit: cfg.mission.time_limit,
    }
}

/// Runs every (profile, arm, seed) curriculum. Records come back ordered by
/// profile, arm, seed and episode regardless of scheduling.
pub fn run_batch(
    cfg: &RunConfig,
    world: Arc<WorldMap>,
    profiles: &[UserProfile],
    seeds: u64,
) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let env = Environment::from_config(world.clone(), cfg);
    let mission = mission_of(cfg);
    mission.validate(&world)?;
    let mut arms = vec![Arm::Learned];
    if cfg.baseline {
        arms.push(Arm::Frozen);
    }
    let jobs: Vec<(&UserProfile, Arm, u64)> = profiles
        .iter()
        .flat_map(|p| {
            arms.iter()
                .flat_map(move |&a| (0..seeds).map(move |s| (p, a, cfg.seed_base + s)))
        })
        .collect();
    let runs: Result<Vec<Vec<EpisodeRecord>>, HarnessError> = jobs
        .par_iter()
        .map(|&(profile, arm, seed)| {
            let c = run_curriculum(&env, &mission, profile, cfg.episodes, seed, arm == Arm::Learned)?;
            Ok(c.episodes
                .into_iter()
                .map(|metrics| EpisodeRecord {
                    profile: profile.name.clone(),
                    arm,
                    metrics,
                })
                .collect())
        })
        .collect();
    Ok(runs?.into_iter().flatten().collect())
}

pub fn episodes_jsonl(records: &[EpisodeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_episodes(text: &str) -> Result<Vec<EpisodeRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

/// Per-episode means across seeds for one (profile, arm).
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub profile: String,
    pub arm: Arm,
    pub seeds: usize,
    pub corrections: Vec<f64>,
    pub sim_time: Vec<f64>,
    pub completed: Vec<f64>,
}

impl Curve {
    fn window(series: &[f64], last: bool) -> f64 {
        let n = series.len().min(WINDOW);
        let part = if last {
            &series[series.len() - n..]
        } else {
            &series[..n]
        };
        mean(part)
    }

    pub fn first_corrections(&self) -> f64 {
        Self::window(&self.corrections, false)
    }

    pub fn last_corrections(&self) -> f64 {
        Self::window(&self.corrections, true)
    }

    pub fn first_sim_time(&self) -> f64 {
        Self::window(&self.sim_time, false)
    }

    pub fn last_sim_time(&self) -> f64 {
        Self::window(&self.sim_time, true)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn curves(records: &[EpisodeRecord]) -> Vec<Curve> {
    let mut groups: BTreeMap<(&str, Arm), BTreeMap<usize, Vec<&EpisodeMetrics>>> = BTreeMap::new();
    for r in records {
        groups
            .entry((&r.profile, r.arm))
            .or_default()
            .entry(r.metrics.episode)
            .or_default()
            .push(&r.metrics);
    }
    groups
        .into_iter()
        .map(|((profile, arm), by_ep)| {
            let col = |f: fn(&EpisodeMetrics) -> f64| -> Vec<f64> {
                by_ep
                    .values()
                    .map(|ms| mean(&ms.iter().map(|m| f(m)).collect::<Vec<_>>()))
                    .collect()
            };
            Curve {
                profile: profile.to_string(),
                arm,
                seeds: by_ep.values().map(Vec::len).max().unwrap_or(0),
                corrections: col(|m| m.corrections as f64),
                sim_time: col(|m| m.sim_time),
                completed: col(|m| if m.completed { 1.0 } else { 0.0 }),
            }
        })
        .collect()
}

pub fn summary_tsv(curves: &[Curve]) -> String {
    let mut out = String::from(
        "profile\tarm\tseeds\tepisodes\tcorrections_first10\tcorrections_last10\tsim_time_first10\tsim_time_last10\tcompleted\n",
    );
    for c in curves {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            c.profile,
            c.arm.as_str(),
            c.seeds,
            c.corrections.len(),
            c.first_corrections(),
            c.last_corrections(),
            c.first_sim_time(),
            c.last_sim_time(),
            mean(&c.completed),
        );
    }
    out
}

/// Columns: episode, then corrections and sim_time for each curve.
pub fn curve_dat(curves: &[Curve]) -> String {
    let mut out = String::from("# episode");
    for c in curves {
        let _ = write!(out, " {0}.{1}.corrections {0}.{1}.sim_time", c.profile, c.arm.as_str());
    }
    out.push('\n');
    let n = curves.iter().map(|c| c.corrections.len()).max().unwrap_or(0);
    for e in 0..n {
        let _ = write!(out, "{}", e + 1);
        for c in curves {
            match (c.corrections.get(e), c.sim_time.get(e)) {
                (Some(k), Some(t)) => {
                    let _ = write!(out, " {k:.4} {t:.4}");
                }
                _ => out.push_str(" nan nan"),
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `summary.tsv` and `curve.dat` next to the episode records.
pub fn write_reports(dir: &Path, records: &[EpisodeRecord]) -> io::Result<Vec<Curve>> {
    let cs = curves(records);
    fs::write(dir.join(SUMMARY_FILE), summary_tsv(&cs))?;
    fs::write(dir.join(CURVE_FILE), curve_dat(&cs))?;
    Ok(cs)
}

pub fn write_all(dir: &Path, records: &[EpisodeRecord]) -> io::Result<Vec<Curve>> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(EPISODES_FILE), episodes_jsonl(records))?;
    write_reports(dir, records)
}
