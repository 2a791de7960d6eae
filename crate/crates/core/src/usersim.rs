//! Simulated user with a hidden linear preference profile.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::language::lexicon::FEET_TO_METERS;
use crate::language::{parse_feedback, FeedbackEvent, Polarity};
use crate::math;
use crate::planner::{WaypointCandidate, FEATURE_DIM};
use crate::pose::Pose;
use crate::preference::{argmax, PreferenceError};

#[derive(Clone, Debug, PartialEq)]
pub struct UserProfile {
    pub name: String,
    pub true_weights: [f64; FEATURE_DIM],
    pub true_bias: f64,
    /// Utility margin within which a non-best waypoint is still accepted.
    pub accept_tolerance: f64,
    /// Temperature of accept/correct sampling; 0 is deterministic.
    pub noise_temp: f64,
    /// Weight on a feature the learner does not see (facing north), for the
    /// mismatched-oracle stress mode. 0 keeps the oracle realizable.
    pub hidden_weight: f64,
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.accept_tolerance.is_finite() && self.accept_tolerance >= 0.0) {
            return Err("accept_tolerance must be non-negative");
        }
        if !(self.noise_temp.is_finite() && self.noise_temp >= 0.0) {
            return Err("noise_temp must be non-negative");
        }
        if !self
            .true_weights
            .iter()
            .chain([&self.true_bias, &self.hidden_weight])
            .all(|v| v.is_finite())
        {
            return Err("weights must be finite");
        }
        Ok(())
    }

    pub fn true_utility(&self, c: &WaypointCandidate) -> f64 {
        let f = c.features.to_array();
        let linear: f64 = self.true_weights.iter().zip(f).map(|(w, x)| w * x).sum();
        linear + self.true_bias + self.hidden_weight * hidden_feature(&c.pose)
    }
}

/// `(1 + sin yaw) / 2`: 1 facing north, 0 facing south.
pub fn hidden_feature(pose: &Pose) -> f64 {
    0.5 * (1.0 + math::sin(pose.yaw()))
}

/// The two built-in styles: a quick user who wants to see as much of the
/// target as possible with little travel, and a meticulous one who wants
/// open, unobstructed vantage points and tolerates travel.
pub fn builtin_profiles() -> Vec<UserProfile> {
    alloc::vec![
        UserProfile {
            name: "quick".into(),
            //             travel goal  front  vis   cover align open  turn
            true_weights: [-2.25, 0.5, 0.5, -0.25, 4.5, 1.25, 0.0, 0.0],
            true_bias: 0.0,
            accept_tolerance: 0.05,
            noise_temp: 0.0,
            hidden_weight: 0.0,
        },
        UserProfile {
            name: "meticulous".into(),
            true_weights: [-1.0, 0.0, 2.75, 1.0, 0.5, 0.0, 2.5, 0.0],
            true_bias: 0.0,
            accept_tolerance: 0.05,
            noise_temp: 0.0,
            hidden_weight: 0.0,
        },
    ]
}

pub fn builtin_profile(name: &str) -> Option<UserProfile> {
    builtin_profiles().into_iter().find(|p| p.name == name)
}

/// True-utility argmax, ties to the lowest id.
pub fn oracle_best<'c>(
    profile: &UserProfile,
    candidates: &'c [WaypointCandidate],
) -> Result<&'c WaypointCandidate, PreferenceError> {
    argmax(candidates, |c| profile.true_utility(c)).ok_or(PreferenceError::EmptyCandidates)
}

/// Correction utterance that moves the robot from `from` toward `to`: a turn
/// when the positions share a cell (`cell_size`), otherwise a move along the
/// dominant axis of the robot frame.
pub fn correction_utterance(from: &Pose, to: &Pose, cell_size: f64) -> String {
    correction_utterances(from, to, cell_size).swap_remove(0)
}

/// Every correction a user might try, most direct first: the turn, or the
/// move along the dominant robot-frame axis followed by the move along the
/// other axis when that one spans at least half a cell.
pub fn correction_utterances(from: &Pose, to: &Pose, cell_size: f64) -> Vec<String> {
    let delta = to.xy() - from.xy();
    let turn = math::wrap_angle(to.yaw() - from.yaw()).to_degrees();
    let turn_deg = math::round(math::abs(turn));
    if delta.norm() < cell_size && turn_deg >= 1.0 {
        let side = if turn > 0.0 { "left" } else { "right" };
        return alloc::vec![format!("No, robot turn {} degrees to the {side}", turn_deg as i64)];
    }
    let h = from.heading();
    let (fwd, left) = (delta.dot(h), h.cross(delta));
    let along = (if fwd >= 0.0 { "forward" } else { "backward" }, math::abs(fwd));
    let across = (if left > 0.0 { "left" } else { "right" }, math::abs(left));
    let (first, second) = if along.1 >= across.1 {
        (along, across)
    } else {
        (across, along)
    };
    let say = |(word, d): (&str, f64)| {
        let feet = (math::round(d / FEET_TO_METERS * 10.0) / 10.0).max(0.1);
        format!("No, robot move {word} {} feet", fmt_number(feet))
    };
    let mut out = alloc::vec![say(first)];
    if second.1 >= 0.5 * cell_size {
        out.push(say(second));
    }
    out
}

fn fmt_number(v: f64) -> String {
    if v == math::floor(v) {
        (v as i64).to_string()
    } else {
        format!("{v}")
    }
}

/// Accept when the chosen waypoint is within the tolerance of the oracle's
/// best; otherwise a correction toward the best pose. With `noise_temp > 0`
/// acceptance is drawn with probability `logistic(margin / noise_temp)`.
pub fn simulate_feedback(
    profile: &UserProfile,
    chosen: &WaypointCandidate,
    candidates: &[WaypointCandidate],
    seed: u64,
    cell_size: f64,
) -> Result<FeedbackEvent, PreferenceError> {
    let best = oracle_best(profile, candidates)?;
    let margin = profile.true_utility(chosen) - profile.true_utility(best) + profile.accept_tolerance;
    let accept = if profile.noise_temp > 0.0 {
        let p = math::logistic(margin / profile.noise_temp);
        ChaCha8Rng::seed_from_u64(seed).random::<f64>() < p
    } else {
        margin >= 0.0
    };
    if accept || best.pose == chosen.pose {
        return Ok(FeedbackEvent {
            polarity: Polarity::Accept,
            replacement: None,
            raw_text: "Yes".into(),
        });
    }
    let text = correction_utterance(&chosen.pose, &best.pose, cell_size);
    Ok(parse_feedback(&text).expect("synthesized corrections parse"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::FeatureVector;

    fn cand(id: usize, pose: Pose, f: [f64; 8]) -> WaypointCandidate {
        WaypointCandidate {
            id,
            pose,
            features: FeatureVector::from_array(f),
        }
    }

    #[test]
    fn builtin_profiles_cover_both_styles() {
        let ps = builtin_profiles();
        assert!(ps.iter().any(|p| p.name == "quick"));
        assert!(ps.iter().any(|p| p.name == "meticulous"));
        assert!(builtin_profile("quick").unwrap().true_weights[0] < 0.0);
        assert!(ps.iter().all(|p| p.validate().is_ok()));
    }

    #[test]
    fn coverage_only_profile_picks_max_coverage() {
        let mut p = builtin_profile("quick").unwrap();
        p.true_weights = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let mut f = [0.0; 8];
        let cs: Vec<_> = [0.2, 0.9, 0.4]
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                f[4] = c;
                cand(i, Pose::new(i as f64, 0.0, 0.0), f)
            })
            .collect();
        assert_eq!(oracle_best(&p, &cs).unwrap().id, 1);
        assert_eq!(oracle_best(&p, &cs[..1]).unwrap().id, 0);
    }

    #[test]
    fn fifteen_degree_correction_to_the_right() {
        let chosen = Pose::new(1.0, 1.0, 0.5);
        let best = Pose::new(1.0, 1.0, 0.5 - 15f64.to_radians());
        assert_eq!(
            correction_utterance(&chosen, &best, 0.25),
            "No, robot turn 15 degrees to the right"
        );
        let ev = parse_feedback(&correction_utterance(&chosen, &best, 0.25)).unwrap();
        assert_eq!(ev.replacement.unwrap().rotation_deg, Some(-15.0));
    }

    #[test]
    fn move_corrections_use_the_robot_frame() {
        let chosen = Pose::new(1.0, 1.0, core::f64::consts::FRAC_PI_2);
        let best = Pose::new(0.0, 1.2, core::f64::consts::FRAC_PI_2);
        assert_eq!(
            correction_utterance(&chosen, &best, 0.25),
            "No, robot move left 3.3 feet"
        );
    }

    #[test]
    fn best_choice_is_accepted() {
        let p = builtin_profile("meticulous").unwrap();
        let cs = [
            cand(0, Pose::new(0.5, 0.5, 0.0), [0.1; 8]),
            cand(1, Pose::new(1.5, 0.5, 0.0), [0.9; 8]),
        ];
        let best = oracle_best(&p, &cs).unwrap();
        let ev = simulate_feedback(&p, best, &cs, 3, 0.25).unwrap();
        assert_eq!(ev.polarity, Polarity::Accept);
        let ev = simulate_feedback(&p, &cs[0], &cs, 3, 0.25).unwrap();
        assert_eq!(ev.polarity, Polarity::Correct);
        assert_eq!(ev.raw_text, "No, robot move forward 3.3 feet");
    }
}
