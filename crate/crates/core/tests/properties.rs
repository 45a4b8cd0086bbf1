//! Property tests for the entropy identities, the uncertainty-set geometry,
//! CVaR, and the regularized solver's certificates.

use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use robust_entropy::adversary::{
    limit_set_membership, membership, LimitSet, RewardPerturbation, UncertaintySpec,
};
use robust_entropy::risk::{cvar, ReturnDistribution};
use robust_entropy::solver::{solve_regularized_with_report, SolveOptions};
use robust_entropy::{compute_occupancy, seeded_rng, Mdp, Policy, RegularizerKind};

fn random_instance(seed: u64, n_states: usize, n_actions: usize) -> (Mdp<f64>, Policy<f64>) {
    let mut rng = seeded_rng(seed);
    let mdp = Mdp::random(n_states, n_actions, 0.9, (-1.0, 1.0), &mut rng);
    let policy = Policy::random(n_states, n_actions, &mut rng);
    (mdp, policy)
}

proptest! {
    #[test]
    fn entropy_chain_rule_holds(seed in any::<u64>(), s in 2usize..6, a in 2usize..4) {
        let (mdp, policy) = random_instance(seed, s, a);
        let occ = compute_occupancy(&mdp, &policy).unwrap();
        let joint = occ.state_action_entropy();
        let marginal = occ.state_entropy();
        let conditional = occ.expected_policy_entropy(&policy);
        prop_assert!((joint - marginal - conditional).abs() < 1e-9);
    }

    #[test]
    fn entropies_respect_log_cardinality_bounds(seed in any::<u64>(), s in 2usize..6, a in 2usize..4) {
        let (mdp, policy) = random_instance(seed, s, a);
        let occ = compute_occupancy(&mdp, &policy).unwrap();
        prop_assert!(occ.state_entropy() <= (s as f64).ln() + 1e-12);
        prop_assert!(occ.state_action_entropy() <= ((s * a) as f64).ln() + 1e-12);
        for state in 0..s {
            prop_assert!(policy.action_entropy(state) <= (a as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn uncertainty_sets_are_nested_in_alpha(
        seed in any::<u64>(),
        a1_raw in 0.05f64..2.0,
        growth in 1.0f64..50.0,
    ) {
        let (mdp, policy) = random_instance(seed, 3, 2);
        let mut rng = seeded_rng(seed ^ 0xABCD);
        let delta = Array2::from_shape_fn((3, 2), |_| 3.0 * rng.random::<f64>() - 1.5);
        let pert = RewardPerturbation::from_delta(mdp.reward(), delta).unwrap();
        for reg in RegularizerKind::ALL {
            let small = UncertaintySpec::new(reg, a1_raw, 0.4).unwrap();
            let large = UncertaintySpec::new(reg, a1_raw * growth, 0.4).unwrap();
            let in_small = membership(&mdp, &policy, &small, &pert).unwrap();
            let in_large = membership(&mdp, &policy, &large, &pert).unwrap();
            prop_assert!(!in_small || in_large, "{reg:?}: nesting violated");
        }
    }

    #[test]
    fn limit_sets_sandwich_every_finite_alpha_set(
        seed in any::<u64>(),
        alpha in 0.01f64..100.0,
    ) {
        let (mdp, policy) = random_instance(seed, 4, 2);
        let mut rng = seeded_rng(seed ^ 0x1234);
        let delta = Array2::from_shape_fn((4, 2), |_| 2.0 * rng.random::<f64>() - 1.0);
        let pert = RewardPerturbation::from_delta(mdp.reward(), delta).unwrap();
        let spec = UncertaintySpec::new(RegularizerKind::State, alpha, 0.3).unwrap();
        let in_zero = limit_set_membership(&policy, 0.3, LimitSet::AlphaZero, &pert);
        let in_finite = membership(&mdp, &policy, &spec, &pert).unwrap();
        let in_inf = limit_set_membership(&policy, 0.3, LimitSet::AlphaInf, &pert);
        prop_assert!(!in_zero || in_finite, "alpha->0 set must sit inside alpha = {alpha}");
        prop_assert!(!in_finite || in_inf, "alpha = {alpha} set must sit inside alpha->inf");
    }

    #[test]
    fn cvar_is_monotone_and_dominated_by_the_mean(
        values in prop::collection::vec(-50.0f64..50.0, 2..6),
        raw_probs in prop::collection::vec(0.05f64..1.0, 2..6),
        b1 in 0.05f64..0.95,
        b2 in 0.05f64..0.95,
    ) {
        let n = values.len().min(raw_probs.len());
        let total: f64 = raw_probs[..n].iter().sum();
        let atoms: Vec<(f64, f64)> = values[..n]
            .iter()
            .zip(&raw_probs[..n])
            .map(|(&v, &p)| (v, p / total))
            .collect();
        let dist = ReturnDistribution::new(atoms).unwrap();
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        prop_assert!(cvar(&dist, lo) <= cvar(&dist, hi) + 1e-12);
        prop_assert!(cvar(&dist, hi) <= dist.mean() + 1e-12);
    }
}

#[test]
fn solver_objective_trace_is_monotone_and_certified() {
    for (i, reg) in RegularizerKind::ALL.into_iter().enumerate() {
        let mut rng = seeded_rng(900 + i as u64);
        let mdp = Mdp::<f64>::random(5, 3, 0.9, (-0.5, 1.0), &mut rng);
        let opts = SolveOptions::new(reg, 0.4);
        let (_, _, report) = solve_regularized_with_report(&mdp, &opts).unwrap();
        for window in report.objective_trace.windows(2) {
            assert!(
                window[1] >= window[0] - 1e-12,
                "{reg:?}: objective decreased from {} to {}",
                window[0],
                window[1]
            );
        }
        assert!(report.gap <= 1e-8, "{reg:?}: gap {}", report.gap);
        // The certificate is meaningful: a hundred random policies stay below.
        for _ in 0..100 {
            let policy = Policy::random(5, 3, &mut rng);
            let value = robust_entropy::regularized_return(&mdp, &policy, reg, 0.4).unwrap();
            assert!(value <= report.objective + report.gap + 1e-9);
        }
    }
}
