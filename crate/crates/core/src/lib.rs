//! Core of `waypref`: an instruction-following navigation engine that picks
//! among candidate end-pose waypoints with a per-user preference model and
//! learns that model online from acceptance and correction feedback.
//!
//! The crate is `no_std` (with `alloc`) and free of IO. It contains:
//!
//! - [`world`]: occupancy-grid maps with named landmarks, grid shortest paths,
//!   raycasting and line-of-sight visibility.
//! - [`language`]: a data-driven keyword grammar for the eight navigation
//!   instruction kinds and the `yes ...` / `no, ...` feedback forms.
//! - [`planner`]: candidate waypoint enumeration per instruction kind and the
//!   8-dimensional waypoint feature vector.
//! - [`preference`]: the linear-utility pairwise (logistic) preference model,
//!   epsilon-greedy selection and the gradient update from feedback.
//! - [`usersim`]: simulated users with hidden preference profiles that answer
//!   with accept/correct utterances.
//!
//! File IO, the message bridge, experiment orchestration and the CLI live in
//! the companion `waypref` crate.

#![no_std]

extern crate alloc;

pub mod language;
pub mod math;
pub mod planner;
pub mod pose;
pub mod preference;
pub mod usersim;
pub mod world;

pub use language::{
    parse_feedback, parse_instruction, Direction, FeedbackEvent, Instruction, InstructionKind, LanguageError, Polarity,
};
pub use planner::{
    extract_features, generate_candidates, FeatureVector, PlannerConfig, PlannerError, WaypointCandidate,
};
pub use pose::{Point2, Pose, Quaternion};
pub use preference::{preference_prob, select_waypoint, update_from_feedback, utility, PreferenceModel};
pub use usersim::{builtin_profiles, oracle_best, simulate_feedback, UserProfile};
pub use world::{load_world, Cell, Landmark, LandmarkKind, WorldError, WorldMap};
