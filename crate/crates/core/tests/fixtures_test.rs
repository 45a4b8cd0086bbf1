//! Regression fixtures: the canonical counterexample MDP in the shared JSON
//! format must stay byte-stable, and files in that format round-trip.

use robust_entropy::risk::{build_counterexample, CounterexampleParams};
use robust_entropy::{Mdp, Policy};

const CANONICAL: &str = include_str!("fixtures/counterexample_canonical.json");

#[test]
fn canonical_counterexample_serialization_is_stable() {
    let params = CounterexampleParams::<f64>::canonical();
    let ce = build_counterexample(&params, 0.5).unwrap();
    assert_eq!(ce.mdp.to_json(), CANONICAL);
}

#[test]
fn fixture_parses_and_revalidates() {
    let mdp = Mdp::<f64>::from_json(CANONICAL).unwrap();
    assert_eq!(mdp.n_states(), 5);
    assert_eq!(mdp.n_actions(), 2);
    assert_eq!(mdp.discount(), 0.9);
    // The deterministic safe branch is worth exactly 1 in total return.
    let safe = Policy::deterministic(2, &[0, 0, 0, 0, 0]);
    let normalized = robust_entropy::expected_return(&mdp, &safe).unwrap();
    assert!((normalized / (1.0 - 0.9) - 1.0).abs() < 1e-9);
}

#[test]
fn malformed_fixture_is_rejected() {
    let broken = CANONICAL.replace("\"n_states\": 5", "\"n_states\": 4");
    assert!(Mdp::<f64>::from_json(&broken).is_err());
}
