//! Per-user preference model and its online pairwise learning rule.
//!
//! Utility is linear in the waypoint features. The probability that one
//! trajectory is preferred over another is the logistic of their utility
//! difference, and each feedback event contributes preference pairs whose
//! summed log-likelihood gets one gradient-ascent step.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::language::{Instruction, Polarity};
use crate::math;
use crate::planner::{
    generate_candidates, DimensionMismatch, FeatureVector, PlannerConfig, PlannerError, WaypointCandidate, FEATURE_DIM,
};
use crate::pose::Pose;
use crate::world::WorldMap;

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_EPSILON_DECAY: f64 = 0.95;
pub const DEFAULT_DISCOUNT: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreferenceError {
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("a correction needs the corrected candidate")]
    MissingCorrection,
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
    #[error("discount must lie in [0, 1)")]
    BadDiscount,
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// The decision process with a preference relation in place of a reward.
///
/// States are robot poses on a fixed map, actions are the admissible
/// waypoint candidates of the current instruction, the transition moves the
/// robot onto the chosen pose, and `ρ` is [`preference_prob`]. The discount
/// is carried for completeness; with one-step trajectories it never enters
/// the learning rule.
#[derive(Clone, Debug)]
pub struct Mdpp<'m> {
    pub world: &'m WorldMap,
    pub planner: PlannerConfig,
    /// Support of the (uniform) start-pose distribution.
    pub initial: Vec<Pose>,
    pub discount: f64,
}

impl<'m> Mdpp<'m> {
    pub fn new(
        world: &'m WorldMap,
        planner: PlannerConfig,
        initial: Vec<Pose>,
        discount: f64,
    ) -> Result<Self, PreferenceError> {
        if !(0.0..1.0).contains(&discount) {
            return Err(PreferenceError::BadDiscount);
        }
        Ok(Self {
            world,
            planner,
            initial,
            discount,
        })
    }

    pub fn actions(&self, state: &Pose, instr: &Instruction) -> Result<Vec<WaypointCandidate>, PlannerError> {
        generate_candidates(self.world, &self.planner, state, instr)
    }

    pub fn transition(&self, _state: &Pose, action: &WaypointCandidate) -> Pose {
        action.pose
    }

    pub fn preference(&self, model: &PreferenceModel, a: &Trajectory, b: &Trajectory) -> f64 {
        preference_prob(model, &a.features(), &b.features())
    }
}

/// `s0, a0, s1, …, s_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Pose>,
    pub actions: Vec<WaypointCandidate>,
}

impl Trajectory {
    /// The one-step trajectory of a single instruction.
    pub fn single(start: Pose, action: WaypointCandidate) -> Self {
        Self {
            states: alloc::vec![start, action.pose],
            actions: alloc::vec![action],
        }
    }

    pub fn is_well_formed(&self) -> bool {
        !self.states.is_empty() && self.states.len() == self.actions.len() + 1
    }

    /// Features of the final action; the zero vector for a bare state.
    pub fn features(&self) -> FeatureVector {
        self.actions.last().map(|a| a.features).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceModel {
    pub user_id: String,
    pub weights: [f64; FEATURE_DIM],
    pub bias: f64,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub update_count: u64,
}

impl PreferenceModel {
    /// Zero weights and the default hyperparameters.
    pub fn new(user_id: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            weights: [0.0; FEATURE_DIM],
            bias: 0.0,
            learning_rate: DEFAULT_LEARNING_RATE,
            epsilon: DEFAULT_EPSILON,
            update_count: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PreferenceError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(PreferenceError::InvalidModel("learning_rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(PreferenceError::InvalidModel("epsilon must lie in [0, 1]"));
        }
        if !self.weights.iter().chain([&self.bias]).all(|v| v.is_finite()) {
            return Err(PreferenceError::InvalidModel("weights must be finite"));
        }
        Ok(())
    }

    pub fn decay_epsilon(&mut self, factor: f64) {
        self.epsilon = (self.epsilon * factor).clamp(0.0, 1.0);
    }

    /// Weights and bias multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.weights.iter_mut().for_each(|w| *w *= c);
        m.bias *= c;
        m
    }
}

fn dot(w: &[f64; FEATURE_DIM], f: &[f64; FEATURE_DIM]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

pub fn utility(model: &PreferenceModel, f: &FeatureVector) -> f64 {
    dot(&model.weights, &f.to_array()) + model.bias
}

/// [`utility`] over an untyped feature slice.
pub fn utility_of_slice(model: &PreferenceModel, f: &[f64]) -> Result<f64, PreferenceError> {
    Ok(utility(model, &FeatureVector::from_slice(f)?))
}

/// `ρ(a ≻ b)`.
pub fn preference_prob(model: &PreferenceModel, a: &FeatureVector, b: &FeatureVector) -> f64 {
    math::logistic(utility(model, a) - utility(model, b))
}

/// Utility argmax, ties to the lowest id.
pub fn argmax(
    candidates: &[WaypointCandidate],
    mut score: impl FnMut(&WaypointCandidate) -> f64,
) -> Option<&WaypointCandidate> {
    let mut best: Option<(&WaypointCandidate, f64)> = None;
    for c in candidates {
        let u = score(c);
        best = match best {
            Some((b, bu)) if bu > u || (bu == u && b.id < c.id) => Some((b, bu)),
            _ => Some((c, u)),
        };
    }
    best.map(|(c, _)| c)
}

/// Epsilon-greedy choice, reproducible from `seed`.
pub fn select_waypoint<'c>(
    model: &PreferenceModel,
    candidates: &'c [WaypointCandidate],
    seed: u64,
) -> Result<&'c WaypointCandidate, PreferenceError> {
    if candidates.is_empty() {
        return Err(PreferenceError::EmptyCandidates);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let explore: f64 = rng.random();
    if explore < model.epsilon {
        return Ok(&candidates[rng.random_range(0..candidates.len())]);
    }
    Ok(argmax(candidates, |c| utility(model, &c.features)).expect("non-empty"))
}

/// Independent sub-seed `n` of `seed` (ChaCha stream `n`).
pub fn derive_seed(seed: u64, n: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng.random()
}

/// A (winner, loser) feature pair.
pub type PreferencePair = (FeatureVector, FeatureVector);

/// Pairs implied by a feedback event. Acceptance prefers the chosen candidate
/// over every other one, or over the `top_m` best others under `model` when
/// given; a correction prefers the corrected candidate over the chosen one.
pub fn preference_pairs(
    model: &PreferenceModel,
    chosen: &WaypointCandidate,
    candidates: &[WaypointCandidate],
    polarity: Polarity,
    corrected: Option<&WaypointCandidate>,
    top_m: Option<usize>,
) -> Result<Vec<PreferencePair>, PreferenceError> {
    match polarity {
        Polarity::Correct => {
            let c = corrected.ok_or(PreferenceError::MissingCorrection)?;
            Ok(alloc::vec![(c.features, chosen.features)])
        }
        Polarity::Accept => {
            let mut others: Vec<&WaypointCandidate> = candidates.iter().filter(|c| c.id != chosen.id).collect();
            if let Some(m) = top_m {
                others.sort_by(|a, b| {
                    utility(model, &b.features)
                        .total_cmp(&utility(model, &a.features))
                        .then(a.id.cmp(&b.id))
                });
                others.truncate(m);
            }
            Ok(others.into_iter().map(|o| (chosen.features, o.features)).collect())
        }
    }
}

/// `Σ log ρ(winner ≻ loser)`.
pub fn log_likelihood(model: &PreferenceModel, pairs: &[PreferencePair]) -> f64 {
    pairs
        .iter()
        .map(|(w, l)| math::log_logistic(utility(model, w) - utility(model, l)))
        .sum()
}

/// Gradient of [`log_likelihood`] with respect to the weights. The bias
/// cancels in every difference, so its partial derivative is zero.
pub fn log_likelihood_gradient(model: &PreferenceModel, pairs: &[PreferencePair]) -> [f64; FEATURE_DIM] {
    let mut g = [0.0; FEATURE_DIM];
    for (w, l) in pairs {
        let d: [f64; FEATURE_DIM] = core::array::from_fn(|i| w.to_array()[i] - l.to_array()[i]);
        let s = math::logistic(-dot(&model.weights, &d));
        for (gi, di) in g.iter_mut().zip(d) {
            *gi += s * di;
        }
    }
    g
}

/// One gradient step on the given pairs. No pairs leaves the model untouched.
pub fn apply_pairs(model: &PreferenceModel, pairs: &[PreferencePair]) -> PreferenceModel {
    let mut next = model.clone();
    if pairs.is_empty() {
        return next;
    }
    let g = log_likelihood_gradient(model, pairs);
    for (w, gi) in next.weights.iter_mut().zip(g) {
        *w += model.learning_rate * gi;
    }
    next.update_count += 1;
    next
}

pub fn update_from_feedback(
    model: &PreferenceModel,
    chosen: &WaypointCandidate,
    candidates: &[WaypointCandidate],
    polarity: Polarity,
    corrected: Option<&WaypointCandidate>,
) -> Result<PreferenceModel, PreferenceError> {
    let pairs = preference_pairs(model, chosen, candidates, polarity, corrected, None)?;
    Ok(apply_pairs(model, &pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(id: usize, f: [f64; 8]) -> WaypointCandidate {
        WaypointCandidate {
            id,
            pose: Pose::new(0.0, 0.0, 0.0),
            features: FeatureVector::from_array(f),
        }
    }

    #[test]
    fn utility_examples() {
        let mut m = PreferenceModel::new("u");
        let f = FeatureVector::from_array([0.3, 0.5, 0.1, 0.0, 1.0, 0.2, 0.4, 0.9]);
        assert_eq!(utility(&m, &f), 0.0);
        m.weights[0] = 1.0;
        assert_eq!(utility(&m, &f), 0.3);
        assert!(utility_of_slice(&m, &[0.0; 5]).is_err());
    }

    #[test]
    fn preference_at_log_three_gap() {
        let mut m = PreferenceModel::new("u");
        m.weights[4] = libm::log(3.0);
        let a = FeatureVector::from_array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let b = FeatureVector::default();
        assert!((preference_prob(&m, &a, &b) - 0.75).abs() < 1e-15);
        assert_eq!(preference_prob(&m, &a, &a), 0.5);
    }

    #[test]
    fn greedy_selection_and_errors() {
        let mut m = PreferenceModel::new("u");
        m.epsilon = 0.0;
        m.weights[0] = 1.0;
        let cs = [cand(0, [0.1; 8]), cand(1, [0.9; 8])];
        assert_eq!(select_waypoint(&m, &cs, 7).unwrap().id, 1);
        assert_eq!(select_waypoint(&m, &cs[..1], 7).unwrap().id, 0);
        assert_eq!(select_waypoint(&m, &[], 7), Err(PreferenceError::EmptyCandidates));
        // Ties go to the lowest id regardless of list order.
        let tied = [cand(3, [0.5; 8]), cand(2, [0.5; 8])];
        assert_eq!(select_waypoint(&m, &tied, 0).unwrap().id, 2);
    }

    #[test]
    fn accept_with_single_candidate_is_a_no_op() {
        let m = PreferenceModel::new("u");
        let c = cand(0, [0.3; 8]);
        let next = update_from_feedback(&m, &c, core::slice::from_ref(&c), Polarity::Accept, None).unwrap();
        assert_eq!(next, m);
        assert_eq!(
            update_from_feedback(&m, &c, &[], Polarity::Correct, None),
            Err(PreferenceError::MissingCorrection)
        );
    }

    #[test]
    fn correction_toward_identical_features_leaves_weights() {
        let mut m = PreferenceModel::new("u");
        m.weights = [0.2, -0.1, 0.0, 0.4, 0.3, 0.0, -0.2, 0.1];
        let c = cand(0, [0.3, 0.2, 0.9, 0.1, 0.5, 0.7, 0.2, 0.0]);
        let d = cand(1, c.features.to_array());
        let next = update_from_feedback(&m, &c, core::slice::from_ref(&c), Polarity::Correct, Some(&d)).unwrap();
        assert_eq!(next.weights, m.weights);
        assert_eq!(next.update_count, 1);
    }

    #[test]
    fn discount_range() {
        let map = WorldMap::open(4, 4, 1.0).unwrap();
        assert!(Mdpp::new(&map, PlannerConfig::default(), alloc::vec![], 1.0).is_err());
        let mdp = Mdpp::new(&map, PlannerConfig::default(), alloc::vec![], DEFAULT_DISCOUNT).unwrap();
        let a = cand(0, [0.5; 8]);
        let t = Trajectory::single(Pose::new(0.5, 0.5, 0.0), a.clone());
        assert!(t.is_well_formed());
        assert_eq!(mdp.transition(&t.states[0], &a), a.pose);
        assert_eq!(mdp.preference(&PreferenceModel::new("u"), &t, &t), 0.5);
    }
}
