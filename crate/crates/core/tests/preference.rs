use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waypref_core::preference::{
    apply_pairs, log_likelihood, log_likelihood_gradient, preference_pairs, PreferencePair,
};
use waypref_core::{
    preference_prob, select_waypoint, update_from_feedback, FeatureVector, Polarity, Pose, PreferenceModel,
    WaypointCandidate,
};

fn cand(id: usize, f: [f64; 8]) -> WaypointCandidate {
    WaypointCandidate {
        id,
        pose: Pose::new(0.0, 0.0, 0.0),
        features: FeatureVector::from_array(f),
    }
}

fn fixture() -> (PreferenceModel, Vec<WaypointCandidate>) {
    let mut m = PreferenceModel::new("fixture");
    m.weights = [0.1, -0.2, 0.0, 0.3, 0.0, 0.05, 0.0, -0.1];
    m.bias = 0.2;
    m.learning_rate = 0.05;
    let cs = vec![
        cand(0, [0.2, 0.5, 1.0, 0.4, 0.0, 1.0, 0.6, 0.1]),
        cand(1, [0.7, 0.1, 0.3, 0.9, 0.8, 0.2, 1.0, 0.0]),
        cand(2, [0.0, 1.0, 0.5, 0.5, 0.25, 0.75, 0.0, 1.0]),
    ];
    (m, cs)
}

fn assert_close(got: &[f64; 8], want: &[f64; 8]) {
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

// Expected weights were computed once by hand-written logistic updates
// outside this crate and frozen.
#[test]
fn accept_update_matches_frozen_fixture() {
    let (m, cs) = fixture();
    let next = update_from_feedback(&m, &cs[1], &cs, Polarity::Accept, None).unwrap();
    assert_close(
        &next.weights,
        &[
            0.12463567755547178,
            -0.2263580143677913,
            -0.019235276776887564,
            0.31876849609363606,
            0.028269439311266943,
            0.02173056068873306,
            0.02831374152173652,
            -0.1217463890350235,
        ],
    );
    assert_eq!(next.bias, m.bias);
    assert_eq!(next.update_count, 1);
}

#[test]
fn correction_update_matches_frozen_fixture() {
    let (m, cs) = fixture();
    let next = update_from_feedback(&m, &cs[0], &cs, Polarity::Correct, Some(&cs[2])).unwrap();
    assert_close(
        &next.weights,
        &[
            0.09452023062363205,
            -0.1863005765590801,
            -0.013699423440919912,
            0.30273988468818397,
            0.006849711720459956,
            0.043150288279540046,
            -0.016439308129103894,
            -0.07534103780634416,
        ],
    );
}

fn random_features(rng: &mut impl Rng) -> FeatureVector {
    FeatureVector::from_array(std::array::from_fn(|_| rng.random_range(0.0..=1.0)))
}

fn random_model(rng: &mut impl Rng) -> PreferenceModel {
    let mut m = PreferenceModel::new("r");
    m.weights = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
    m.bias = rng.random_range(-1.0..1.0);
    m
}

#[test]
fn preference_identities_over_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10_000 {
        let m = random_model(&mut rng);
        let (a, b) = (random_features(&mut rng), random_features(&mut rng));
        assert_eq!(preference_prob(&m, &a, &a), 0.5);
        assert!((preference_prob(&m, &a, &b) + preference_prob(&m, &b, &a) - 1.0).abs() <= 1e-12);
    }
}

/// Largest relative error between the analytic gradient and central
/// differences of the log-likelihood, with a 1e-4 floor on the scale.
fn gradient_error(m: &PreferenceModel, pairs: &[PreferencePair]) -> f64 {
    let g = log_likelihood_gradient(m, pairs);
    let mut worst: f64 = 0.0;
    for (i, &gi) in g.iter().enumerate() {
        let h = 1e-5 * m.weights[i].abs().max(1.0);
        let (mut up, mut down) = (m.clone(), m.clone());
        up.weights[i] += h;
        down.weights[i] -= h;
        let fd = (log_likelihood(&up, pairs) - log_likelihood(&down, pairs)) / (2.0 * h);
        worst = worst.max((gi - fd).abs() / gi.abs().max(fd.abs()).max(1e-4));
    }
    worst
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let m = random_model(&mut rng);
        let n = rng.random_range(1..8);
        let pairs: Vec<PreferencePair> = (0..n)
            .map(|_| (random_features(&mut rng), random_features(&mut rng)))
            .collect();
        let err = gradient_error(&m, &pairs);
        assert!(err <= 1e-5, "relative error {err}");
    }
}

fn arb_features() -> impl Strategy<Value = FeatureVector> {
    prop::array::uniform8(0.0..=1.0f64).prop_map(FeatureVector::from_array)
}

fn arb_model() -> impl Strategy<Value = PreferenceModel> {
    (prop::array::uniform8(-3.0..3.0f64), -1.0..1.0f64).prop_map(|(w, b)| {
        let mut m = PreferenceModel::new("p");
        m.weights = w;
        m.bias = b;
        m.epsilon = 0.0;
        m
    })
}

fn arb_candidates() -> impl Strategy<Value = Vec<WaypointCandidate>> {
    prop::collection::vec(arb_features(), 1..9).prop_map(|fs| {
        fs.into_iter()
            .enumerate()
            .map(|(id, features)| WaypointCandidate {
                id,
                pose: Pose::new(0.0, 0.0, 0.0),
                features,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn preference_is_bounded_and_antisymmetric(m in arb_model(), a in arb_features(), b in arb_features()) {
        let p = preference_prob(&m, &a, &b);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + preference_prob(&m, &b, &a) - 1.0).abs() <= 1e-12);
        prop_assert_eq!(preference_prob(&m, &a, &a), 0.5);
    }

    #[test]
    fn preference_is_monotone_in_the_margin(m in arb_model(), a in arb_features(), b in arb_features(), i in 0usize..8, dw in 0.0..2.0f64) {
        // Raising a weight where `a` has the larger feature widens a's margin.
        let mut wider = m.clone();
        let sign = if a.to_array()[i] >= b.to_array()[i] { 1.0 } else { -1.0 };
        wider.weights[i] += sign * dw;
        prop_assert!(preference_prob(&wider, &a, &b) >= preference_prob(&m, &a, &b));
    }

    #[test]
    fn scaling_never_changes_the_greedy_choice(m in arb_model(), cs in arb_candidates(), seed in any::<u64>()) {
        let base = select_waypoint(&m, &cs, seed).unwrap().id;
        for c in [0.1, 1.0, 10.0] {
            prop_assert_eq!(select_waypoint(&m.scaled(c), &cs, seed).unwrap().id, base);
        }
    }

    #[test]
    fn correction_raises_the_corrected_preference(m in arb_model(), cs in arb_candidates(), pick in any::<prop::sample::Index>(), fix in any::<prop::sample::Index>()) {
        let chosen = &cs[pick.index(cs.len())];
        let corrected = &cs[fix.index(cs.len())];
        let next = update_from_feedback(&m, chosen, &cs, Polarity::Correct, Some(corrected)).unwrap();
        prop_assert!(preference_prob(&next, &corrected.features, &chosen.features) >= preference_prob(&m, &corrected.features, &chosen.features));
        prop_assert_eq!(next.bias, m.bias);
    }

    #[test]
    fn accept_never_lowers_the_likelihood(m in arb_model(), cs in arb_candidates(), pick in any::<prop::sample::Index>()) {
        let chosen = &cs[pick.index(cs.len())];
        let pairs = preference_pairs(&m, chosen, &cs, Polarity::Accept, None, None).unwrap();
        prop_assert_eq!(pairs.len(), cs.len() - 1);
        let next = apply_pairs(&m, &pairs);
        prop_assert!(log_likelihood(&next, &pairs) >= log_likelihood(&m, &pairs) - 1e-12);
    }
}
