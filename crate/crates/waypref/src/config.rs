//! TOML config and profile files, and world loading.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use waypref_core::usersim::UserProfile;
use waypref_core::{load_world, PlannerConfig, WorldMap};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Invalid {
        path: PathBuf,
        field: &'static str,
        message: String,
    },
    #[error("{path}: {source}")]
    World {
        path: PathBuf,
        source: waypref_core::WorldError,
    },
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}

fn invalid(path: &Path, field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_path_buf(),
        field,
        message: message.into(),
    }
}

pub fn load_world_file(path: &Path) -> Result<WorldMap, ConfigError> {
    load_world(&read(path)?).map_err(|source| ConfigError::World {
        path: path.to_path_buf(),
        source,
    })
}

/// World name used on the wire: the file stem.
pub fn world_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub travel: f64,
    pub goal_dist: f64,
    pub frontal_clearance: f64,
    pub visibility: f64,
    pub coverage: f64,
    pub alignment: f64,
    pub openness: f64,
    pub heading_change: f64,
}

impl Weights {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.travel,
            self.goal_dist,
            self.frontal_clearance,
            self.visibility,
            self.coverage,
            self.alignment,
            self.openness,
            self.heading_change,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        let [travel, goal_dist, frontal_clearance, visibility, coverage, alignment, openness, heading_change] = a;
        Self {
            travel,
            goal_dist,
            frontal_clearance,
            visibility,
            coverage,
            alignment,
            openness,
            heading_change,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub version: u32,
    pub name: String,
    pub weights: Weights,
    pub bias: f64,
    pub accept_tolerance: f64,
    pub noise_temp: f64,
    #[serde(default)]
    pub hidden_weight: f64,
}

impl ProfileFile {
    pub fn of(p: &UserProfile) -> Self {
        Self {
            version: CONFIG_VERSION,
            name: p.name.clone(),
            weights: Weights::from_array(p.true_weights),
            bias: p.true_bias,
            accept_tolerance: p.accept_tolerance,
            noise_temp: p.noise_temp,
            hidden_weight: p.hidden_weight,
        }
    }

    pub fn to_profile(&self) -> UserProfile {
        UserProfile {
            name: self.name.clone(),
            true_weights: self.weights.to_array(),
            true_bias: self.bias,
            accept_tolerance: self.accept_tolerance,
            noise_temp: self.noise_temp,
            hidden_weight: self.hidden_weight,
        }
    }
}

pub fn parse_profile(path: &Path, text: &str) -> Result<UserProfile, ConfigError> {
    let file: ProfileFile = parse_toml(path, text)?;
    if file.version != CONFIG_VERSION {
        return Err(invalid(
            path,
            "version",
            format!("unsupported version {}", file.version),
        ));
    }
    if file.name.trim().is_empty() {
        return Err(invalid(path, "name", "must not be empty"));
    }
    let profile = file.to_profile();
    profile.validate().map_err(|m| {
        let field = if m.starts_with("accept") {
            "accept_tolerance"
        } else if m.starts_with("noise") {
            "noise_temp"
        } else {
            "weights"
        };
        invalid(path, field, m)
    })?;
    Ok(profile)
}

pub fn load_profile(path: &Path) -> Result<UserProfile, ConfigError> {
    parse_profile(path, &read(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    /// `[x_m, y_m, yaw_deg]`.
    pub start: [f64; 3],
    pub targets: Vec<String>,
    /// Seconds of simulated time.
    pub time_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            learning_rate: waypref_core::preference::DEFAULT_LEARNING_RATE,
            epsilon: waypref_core::preference::DEFAULT_EPSILON,
            epsilon_decay: waypref_core::preference::DEFAULT_EPSILON_DECAY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// Travel speed, m/s.
    pub speed: f64,
    /// Seconds charged per utterance.
    pub utterance_cost: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            speed: 0.5,
            utterance_cost: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserveConfig {
    /// Visible fraction of a target's footprint that counts as observed.
    pub threshold: f64,
    pub max_range: f64,
    pub fov_deg: f64,
}

impl Default for ObserveConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            max_range: 5.0,
            fov_deg: 360.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserConfig {
    /// Corrections the simulated user issues per target before moving on.
    pub max_corrections: u32,
}

impl Default for UserConfig {
    fn default() -> Self {
        Self { max_corrections: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub k: usize,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            k: PlannerConfig::default().k,
        }
    }
}

/// A batch experiment: one world, one mission, one or more profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// World file, relative to the config file.
    pub world: PathBuf,
    /// Profile files, relative to the config file.
    pub profiles: Vec<PathBuf>,
    pub episodes: usize,
    /// Number of seeds; seeds are `seed_base .. seed_base + seeds`.
    pub seeds: u64,
    #[serde(default)]
    pub seed_base: u64,
    /// Also run a frozen (never updated) model as a baseline.
    #[serde(default = "yes")]
    pub baseline: bool,
    pub mission: MissionConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub observe: ObserveConfig,
    #[serde(default)]
    pub user: UserConfig,
    #[serde(default)]
    pub planner: PlannerSection,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = parse_toml(path, text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.world = base.join(&cfg.world);
        cfg.profiles = cfg.profiles.iter().map(|p| base.join(p)).collect();
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(path, &read(path)?)
    }

    fn validate(&self, path: &Path) -> Result<(), ConfigError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                path,
                "version",
                format!("unsupported version {}", self.version),
            ));
        }
        if self.profiles.is_empty() {
            return Err(invalid(path, "profiles", "list at least one profile file"));
        }
        if self.episodes == 0 {
            return Err(invalid(path, "episodes", "must be at least 1"));
        }
        if self.seeds == 0 {
            return Err(invalid(path, "seeds", "must be at least 1"));
        }
        if self.mission.targets.is_empty() {
            return Err(invalid(path, "mission.targets", "list at least one landmark"));
        }
        if !positive(self.mission.time_limit) {
            return Err(invalid(path, "mission.time_limit", "must be positive"));
        }
        if !positive(self.learner.learning_rate) {
            return Err(invalid(path, "learner.learning_rate", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.learner.epsilon) {
            return Err(invalid(path, "learner.epsilon", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.learner.epsilon_decay) {
            return Err(invalid(path, "learner.epsilon_decay", "must lie in [0, 1]"));
        }
        if !positive(self.time.speed) {
            return Err(invalid(path, "time.speed", "must be positive"));
        }
        if self.time.utterance_cost.is_nan() || self.time.utterance_cost < 0.0 {
            return Err(invalid(path, "time.utterance_cost", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.observe.threshold) {
            return Err(invalid(path, "observe.threshold", "must lie in [0, 1]"));
        }
        if !positive(self.observe.max_range) || !positive(self.observe.fov_deg) {
            return Err(invalid(path, "observe", "max_range and fov_deg must be positive"));
        }
        if self.planner.k < 2 {
            return Err(invalid(path, "planner.k", "must be at least 2"));
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.seed_base..self.seed_base + self.seeds).collect()
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            k: self.planner.k,
            ..PlannerConfig::default()
        }
    }
}
