//! Missions driven by a simulated user through a bridge session.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use waypref_core::preference::derive_seed;
use waypref_core::usersim::{correction_utterances, oracle_best, simulate_feedback, UserProfile};
use waypref_core::{Landmark, LandmarkKind, Polarity, Pose, PreferenceModel, WorldMap};

use crate::config::{LearnerConfig, ObserveConfig, RunConfig, TimeConfig, UserConfig};
use crate::protocol::{Body, BridgeMessage, ExecutedVia};
use crate::session::{Session, SessionSettings};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("mission target `{0}` is not a landmark of the world")]
    UnknownTarget(String),
    #[error("mission time limit must be positive")]
    BadTimeLimit,
    #[error("mission start pose: {0}")]
    BadStart(waypref_core::WorldError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mission {
    pub world_name: String,
    pub start_pose: Pose,
    /// Landmark names, observed in order.
    pub targets: Vec<String>,
    /// Seconds of simulated time.
    pub time_limit: f64,
}

impl Mission {
    pub fn validate(&self, world: &WorldMap) -> Result<(), HarnessError> {
        if !(self.time_limit.is_finite() && self.time_limit > 0.0) {
            return Err(HarnessError::BadTimeLimit);
        }
        world.check_pose(&self.start_pose).map_err(HarnessError::BadStart)?;
        for t in &self.targets {
            if world.landmark(t).is_none() {
                return Err(HarnessError::UnknownTarget(t.clone()));
            }
        }
        Ok(())
    }
}

/// The instruction a user gives to reach a landmark of each kind.
pub fn instruction_for(lm: &Landmark) -> String {
    let name = &lm.name;
    match lm.kind {
        LandmarkKind::Doorway => format!("Go to the {name}"),
        LandmarkKind::Room => format!("Go into the {name}"),
        LandmarkKind::Object => format!("Move forward until you reach the {name}"),
        LandmarkKind::Obstacle => format!("Move around the {name}"),
        LandmarkKind::Hallway => format!("Go to the end of the {name}"),
    }
}

/// Everything an episode needs besides the mission, profile and model.
#[derive(Clone, Debug)]
pub struct Environment {
    pub world: Arc<WorldMap>,
    pub settings: SessionSettings,
    pub observe: ObserveConfig,
    pub user: UserConfig,
    pub learner: LearnerConfig,
}

impl Environment {
    pub fn new(world: Arc<WorldMap>) -> Self {
        Self {
            world,
            settings: SessionSettings::default(),
            observe: ObserveConfig::default(),
            user: UserConfig::default(),
            learner: LearnerConfig::default(),
        }
    }

    pub fn from_config(world: Arc<WorldMap>, cfg: &RunConfig) -> Self {
        Self {
            world,
            settings: SessionSettings {
                planner: cfg.planner_config(),
                time: cfg.time.clone(),
                learning: true,
            },
            observe: cfg.observe.clone(),
            user: cfg.user.clone(),
            learner: cfg.learner.clone(),
        }
    }

    pub fn fresh_model(&self, user: &str) -> PreferenceModel {
        PreferenceModel {
            learning_rate: self.learner.learning_rate,
            epsilon: self.learner.epsilon,
            ..PreferenceModel::new(user)
        }
    }

    fn observed(&self, pose: &Pose, target: &Landmark) -> bool {
        let fov = self.observe.fov_deg.min(360.0).to_radians();
        self.world
            .visible_fraction(pose, &target.footprint, self.observe.max_range, fov)
            >= self.observe.threshold
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub seed: u64,
    pub completed: bool,
    pub sim_time: f64,
    pub corrections: u64,
    pub instructions: u64,
    pub utterances: u64,
    pub travel: f64,
    pub observed: usize,
    pub targets: usize,
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub model: PreferenceModel,
    pub transcript: Vec<BridgeMessage>,
}

/// Counts recomputed from a transcript alone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TranscriptTally {
    pub instructions: u64,
    pub corrections: u64,
    pub utterances: u64,
    pub travel: f64,
}

impl TranscriptTally {
    pub fn of(transcript: &[BridgeMessage]) -> Self {
        let mut t = Self::default();
        for m in transcript {
            match &m.body {
                Body::Utterance(_) => t.utterances += 1,
                Body::Executed(e) => {
                    t.instructions += 1;
                    t.travel += e.travel;
                    if e.via == ExecutedVia::Correction {
                        t.corrections += 1;
                    }
                }
                _ => {}
            }
        }
        t
    }

    pub fn sim_time(&self, time: &TimeConfig) -> f64 {
        self.travel / time.speed + self.utterances as f64 * time.utterance_cost
    }
}

/// Runs one mission. The simulated user issues one instruction per target,
/// corrects the robot until the waypoint is acceptable (at most
/// `max_corrections` times, then moves on), rephrases a correction the robot
/// cannot carry out, and fuses each acceptance with the next instruction
/// ("Yes, robot ... next").
pub fn run_episode(
    env: &Environment,
    mission: &Mission,
    profile: &UserProfile,
    model: PreferenceModel,
    seed: u64,
    learning: bool,
) -> Result<EpisodeOutcome, HarnessError> {
    mission.validate(&env.world)?;
    let targets: Vec<&Landmark> = mission
        .targets
        .iter()
        .map(|t| env.world.landmark(t).expect("validated"))
        .collect();
    let settings = SessionSettings {
        learning,
        ..env.settings.clone()
    };
    let mut session = Session::new(
        format!("ep-{seed:016x}"),
        mission.world_name.clone(),
        env.world.clone(),
        mission.start_pose,
        model,
        derive_seed(seed, 0),
        settings,
    )
    .map_err(|e| match e {
        crate::session::SessionError::BadStart(w) => HarnessError::BadStart(w),
    })?;
    let cell = env.world.resolution();
    let mut observed = 0;
    let mut feedback_n = 1;
    let mut i = 0;
    let mut corrections_here = 0;
    let mut utterance = instruction_for(targets[0]);
    // Rephrasings of the current correction, tried when the robot cannot
    // carry it out.
    let mut fallbacks: Vec<String> = Vec::new();
    let mut timed_out = false;
    loop {
        let out = session.handle_utterance(&utterance);
        if session.sim_time() > mission.time_limit {
            timed_out = true;
            break;
        }
        let executed = out.iter().any(|m| matches!(m.body, Body::Executed(_)));
        if !executed {
            if let Some(next) = fallbacks.pop() {
                utterance = next;
                continue;
            }
        }
        fallbacks.clear();
        let verdict = match session.pending() {
            Some(p) if executed => {
                let fb = simulate_feedback(profile, &p.chosen, &p.candidates, derive_seed(seed, feedback_n), cell)
                    .expect("pending decisions have candidates");
                feedback_n += 1;
                if fb.polarity == Polarity::Correct {
                    let best = oracle_best(profile, &p.candidates).expect("non-empty");
                    fallbacks = correction_utterances(&p.chosen.pose, &best.pose, cell);
                    fallbacks.retain(|t| *t != fb.raw_text);
                    fallbacks.reverse();
                }
                Some(fb)
            }
            _ => None,
        };
        let done_with_target = match &verdict {
            Some(fb) if fb.polarity == Polarity::Correct && corrections_here < env.user.max_corrections => {
                corrections_here += 1;
                utterance = fb.raw_text.clone();
                false
            }
            _ => true,
        };
        if !done_with_target {
            continue;
        }
        fallbacks.clear();
        let accepted = matches!(&verdict, Some(fb) if fb.polarity == Polarity::Accept);
        if env.observed(&session.pose(), targets[i]) {
            observed += 1;
        }
        i += 1;
        corrections_here = 0;
        if i == targets.len() {
            if accepted {
                session.handle_utterance("Yes");
            }
            break;
        }
        let next = instruction_for(targets[i]);
        utterance = if accepted {
            format!("Yes, robot {} next", lowercase_first(&next))
        } else {
            next
        };
    }
    let stats = session.stats().clone();
    let metrics = EpisodeMetrics {
        episode: 0,
        seed,
        completed: !timed_out && observed == targets.len(),
        sim_time: session.sim_time(),
        corrections: stats.corrections,
        instructions: stats.instructions,
        utterances: stats.utterances,
        travel: stats.travel,
        observed,
        targets: targets.len(),
    };
    let transcript = session.transcript().to_vec();
    Ok(EpisodeOutcome {
        metrics,
        model: session.into_model(),
        transcript,
    })
}

fn lowercase_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

#[derive(Clone, Debug)]
pub struct Curriculum {
    pub episodes: Vec<EpisodeMetrics>,
    pub model: PreferenceModel,
}

/// Sequential episodes sharing one evolving model; epsilon decays after each
/// episode. With `learning = false` the model is never updated (frozen
/// baseline) but follows the same exploration schedule.
pub fn run_curriculum(
    env: &Environment,
    mission: &Mission,
    profile: &UserProfile,
    n_episodes: usize,
    seed: u64,
    learning: bool,
) -> Result<Curriculum, HarnessError> {
    run_curriculum_from(
        env,
        mission,
        profile,
        env.fresh_model(&profile.name),
        n_episodes,
        seed,
        learning,
    )
}

pub fn run_curriculum_from(
    env: &Environment,
    mission: &Mission,
    profile: &UserProfile,
    mut model: PreferenceModel,
    n_episodes: usize,
    seed: u64,
    learning: bool,
) -> Result<Curriculum, HarnessError> {
    let mut episodes = Vec::with_capacity(n_episodes);
    for e in 0..n_episodes {
        let out = run_episode(env, mission, profile, model, derive_seed(seed, e as u64), learning)?;
        model = out.model;
        model.decay_epsilon(env.learner.epsilon_decay);
        episodes.push(EpisodeMetrics {
            episode: e + 1,
            ..out.metrics
        });
    }
    Ok(Curriculum { episodes, model })
}
