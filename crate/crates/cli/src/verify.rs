//! Theorem verification suites. Each suite stresses one result on freshly
//! sampled instances at pinned tolerances and returns structured pass/fail
//! records; the binary prints one line per property and exits nonzero if any
//! fails.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use robust_entropy::adversary::{
    adversarial_minimize, constraint_value, fig2_boundary, limit_set_membership, membership,
    robust_return_closed_form, two_state_figure_mdp, worst_case_reward, LimitSet,
    RewardPerturbation, UncertaintySpec,
};
use robust_entropy::kernel::{
    impossibility_probe, kernel_lower_bound, sample_member_kernels, state_action_kernel_bound,
};
use robust_entropy::mdp::{compute_occupancy, return_of, Mdp, Policy, RegularizerKind};
use robust_entropy::risk::{build_counterexample, verify_gap, CounterexampleParams};
use robust_entropy::seeded_rng;

use rand::Rng;

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub theorem: u8,
    pub name: String,
    pub passed: bool,
    pub details: String,
}

impl PropertyResult {
    fn new(theorem: u8, name: impl Into<String>, passed: bool, details: impl Into<String>) -> Self {
        Self { theorem, name: name.into(), passed, details: details.into() }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("[{tag}] theorem{}/{}: {}", self.theorem, self.name, self.details)
    }
}

/// Run one theorem suite (1..=5).
pub fn run_theorem(theorem: u8, instances: usize, seed: u64) -> Vec<PropertyResult> {
    match theorem {
        1 => theorem1(instances, seed),
        2 => theorem2(instances, seed),
        3 => theorem3(instances, seed),
        4 => theorem4(instances.max(50), seed),
        5 => theorem5(),
        other => vec![PropertyResult::new(
            other,
            "unknown",
            false,
            format!("no suite for theorem {other}"),
        )],
    }
}

pub fn run_all(instances: usize, seed: u64) -> Vec<PropertyResult> {
    (1..=5u8).flat_map(|t| run_theorem(t, instances, seed)).collect()
}

fn sample_instance(seed: u64) -> (Mdp<f64>, Policy<f64>) {
    let mut rng = seeded_rng(seed);
    let n_states = rng.random_range(2..=6);
    let n_actions = rng.random_range(2..=3);
    let gamma = if rng.random::<bool>() { 0.5 } else { 0.9 };
    let mdp = Mdp::random(n_states, n_actions, gamma, (-1.0, 1.0), &mut rng);
    let policy = Policy::random(n_states, n_actions, &mut rng);
    (mdp, policy)
}

/// Reward-uncertainty duality: the numerical minimizer, the closed-form
/// robust return, and the closed-form worst case must agree; the worst case
/// must saturate its constraint.
fn theorem1(instances: usize, seed: u64) -> Vec<PropertyResult> {
    #[derive(Default, Clone, Copy)]
    struct RowErrors {
        duality: f64,
        attainment: f64,
        saturation: f64,
    }
    let per_instance: Vec<Result<[RowErrors; 3], String>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let (mdp, policy) = sample_instance(seed.wrapping_add(i as u64));
            let occ = compute_occupancy(&mdp, &policy).map_err(|e| e.to_string())?;
            let mut rows = [RowErrors::default(); 3];
            for (r, reg) in RegularizerKind::ALL.into_iter().enumerate() {
                let spec = UncertaintySpec::new(reg, 0.7, 0.4).map_err(|e| e.to_string())?;
                let closed =
                    robust_return_closed_form(&mdp, &policy, &spec).map_err(|e| e.to_string())?;
                let (_, value) =
                    adversarial_minimize(&mdp, &policy, &spec).map_err(|e| e.to_string())?;
                rows[r].duality = (value - closed).abs();
                let wc = worst_case_reward(&mdp, &policy, &spec).map_err(|e| e.to_string())?;
                let attained: f64 = wc
                    .r_tilde
                    .iter()
                    .zip(occ.rho().iter())
                    .map(|(&rt, &p)| rt * p)
                    .sum();
                rows[r].attainment = (attained - closed).abs();
                let lhs = constraint_value(&mdp, &policy, &spec, &wc).map_err(|e| e.to_string())?;
                let bound = spec.constraint_bound(mdp.n_states(), mdp.n_actions());
                rows[r].saturation = (lhs - bound).abs();
            }
            Ok(rows)
        })
        .collect();

    let mut results = Vec::new();
    let mut worst = [RowErrors::default(); 3];
    let mut failure: Option<String> = None;
    for row in per_instance {
        match row {
            Ok(errors) => {
                for r in 0..3 {
                    worst[r].duality = worst[r].duality.max(errors[r].duality);
                    worst[r].attainment = worst[r].attainment.max(errors[r].attainment);
                    worst[r].saturation = worst[r].saturation.max(errors[r].saturation);
                }
            }
            Err(e) => failure = Some(e),
        }
    }
    if let Some(e) = failure {
        results.push(PropertyResult::new(1, "instance_error", false, e));
        return results;
    }
    for (r, reg) in RegularizerKind::ALL.into_iter().enumerate() {
        results.push(PropertyResult::new(
            1,
            format!("duality/{}", reg.name()),
            worst[r].duality < 1e-4,
            format!("max |minimize - closed_form| = {:.3e} over {instances} instances", worst[r].duality),
        ));
        results.push(PropertyResult::new(
            1,
            format!("worst_case_attainment/{}", reg.name()),
            worst[r].attainment < 1e-4,
            format!("max |E[r_tilde] - closed_form| = {:.3e}", worst[r].attainment),
        ));
        results.push(PropertyResult::new(
            1,
            format!("constraint_saturation/{}", reg.name()),
            worst[r].saturation < 1e-8,
            format!("max |lse - bound| = {:.3e}", worst[r].saturation),
        ));
    }
    results
}

/// Temperature geometry: nesting in alpha, agreement with the limit sets at
/// extreme temperatures, and nested boundary polylines.
fn theorem2(instances: usize, seed: u64) -> Vec<PropertyResult> {
    let mut results = Vec::new();
    let pairs = instances.max(1) * 100;

    // (a) nesting on random (delta, alpha1 <= alpha2) pairs.
    let violations: usize = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(seed ^ 0x51ab ^ i as u64);
            let (mdp, policy) = sample_instance(seed.wrapping_add(7_000 + i as u64));
            let shape = (mdp.n_states(), mdp.n_actions());
            let delta = Array2::from_shape_fn(shape, |_| 4.0 * rng.random::<f64>() - 2.0);
            let pert = RewardPerturbation::from_delta(mdp.reward(), delta).expect("shape");
            let a1 = 0.02 + 2.0 * rng.random::<f64>();
            let a2 = a1 * (1.0 + 30.0 * rng.random::<f64>());
            let mut bad = 0usize;
            for reg in RegularizerKind::ALL {
                let small = UncertaintySpec::new(reg, a1, 0.5).expect("spec");
                let large = UncertaintySpec::new(reg, a2, 0.5).expect("spec");
                let in_small = membership(&mdp, &policy, &small, &pert).expect("membership");
                let in_large = membership(&mdp, &policy, &large, &pert).expect("membership");
                if in_small && !in_large {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    results.push(PropertyResult::new(
        2,
        "nesting",
        violations == 0,
        format!("{violations} violations over {pairs} (delta, alpha1 <= alpha2) pairs x 3 rows"),
    ));

    // (b) extreme temperatures agree with the limit sets away from the boundary.
    let epsilon = 0.5;
    let mut checked = 0usize;
    let mut disagreements = 0usize;
    let (mdp, policy) = sample_instance(seed.wrapping_add(31));
    let mut rng = seeded_rng(seed ^ 0x11fe);
    for _ in 0..1000 {
        let shape = (mdp.n_states(), mdp.n_actions());
        let delta = Array2::from_shape_fn(shape, |_| 3.0 * rng.random::<f64>() - 1.5);
        let pert = RewardPerturbation::from_delta(mdp.reward(), delta).expect("shape");
        for (alpha, which) in [(1e3, LimitSet::AlphaInf), (1e-3, LimitSet::AlphaZero)] {
            let spec = UncertaintySpec::new(RegularizerKind::State, alpha, epsilon).expect("spec");
            let finite_lhs = alpha
                * (constraint_value(&mdp, &policy, &spec, &pert).expect("constraint")
                    - (mdp.n_states() as f64).ln());
            let delta_pi = pert.delta_pi(&policy);
            let limit_lhs = match which {
                LimitSet::AlphaZero => delta_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                LimitSet::AlphaInf => delta_pi.mean().unwrap(),
            };
            let slack = (finite_lhs - epsilon).abs().min((limit_lhs - epsilon).abs());
            if slack <= 1e-3 {
                continue;
            }
            checked += 1;
            let finite_member = membership(&mdp, &policy, &spec, &pert).expect("membership");
            let limit_member = limit_set_membership(&policy, epsilon, which, &pert);
            if finite_member != limit_member {
                disagreements += 1;
            }
        }
    }
    results.push(PropertyResult::new(
        2,
        "limit_set_agreement",
        disagreements == 0 && checked > 0,
        format!("{disagreements} disagreements on {checked} samples with slack > 1e-3"),
    ));

    // (c) boundary polylines are nested across alpha.
    let alphas = [0.1, 0.3, 1.0, 3.0, 10.0];
    let rows = fig2_boundary([1.0, 0.0], 0.5, &alphas, 64);
    let (fig_mdp, fig_policy) = two_state_figure_mdp::<f64>();
    let mut containment_ok = true;
    let mut detail = String::from("boundary samples of each alpha lie inside every larger-alpha set");
    'outer: for w in alphas.windows(2) {
        let (small, large) = (w[0], w[1]);
        let spec = UncertaintySpec::new(RegularizerKind::State, large, 0.5).expect("spec");
        let bound = spec.constraint_bound(2, 1);
        for point in rows.iter().filter(|p| p.alpha == small) {
            let mut delta = Array2::zeros((2, 1));
            delta[[0, 0]] = 1.0 - point.r_tilde_1;
            delta[[1, 0]] = 0.0 - point.r_tilde_2;
            let pert = RewardPerturbation::from_delta(fig_mdp.reward(), delta).expect("shape");
            let lhs = constraint_value(&fig_mdp, &fig_policy, &spec, &pert).expect("constraint");
            if lhs > bound + 1e-9 {
                containment_ok = false;
                detail = format!(
                    "boundary point of alpha = {small} escapes the alpha = {large} set by {:.3e}",
                    lhs - bound
                );
                break 'outer;
            }
        }
    }
    results.push(PropertyResult::new(2, "boundary_containment", containment_ok, detail));
    results
}

/// Kernel-uncertainty weak duality and the state-vs-state-action ordering.
fn theorem3(instances: usize, seed: u64) -> Vec<PropertyResult> {
    let mut results = Vec::new();
    let n_mdps = (instances / 10).max(1);
    let kernels_per_mdp = 1000usize.div_ceil(n_mdps);
    let (alpha, epsilon) = (0.8, 0.3);

    let outcomes: Vec<Result<(usize, usize, f64), String>> = (0..n_mdps)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(seed.wrapping_add(500 + i as u64));
            let mdp = Mdp::<f64>::random(4, 2, 0.9, (0.1, 1.0), &mut rng);
            let policy = Policy::random(4, 2, &mut rng);
            let bound =
                kernel_lower_bound(&mdp, &policy, alpha, epsilon).map_err(|e| e.to_string())?;
            let members =
                sample_member_kernels(&mdp, &policy, alpha, epsilon, kernels_per_mdp, &mut rng)
                    .map_err(|e| e.to_string())?;
            let mut violations = 0usize;
            let mut min_return = f64::INFINITY;
            for kernel in &members {
                let perturbed = mdp.with_kernel(kernel.clone()).map_err(|e| e.to_string())?;
                let occ = compute_occupancy(&perturbed, &policy).map_err(|e| e.to_string())?;
                let value = return_of(&perturbed, &occ);
                min_return = min_return.min(value);
                if value < bound {
                    violations += 1;
                }
            }
            Ok((members.len(), violations, min_return - bound))
        })
        .collect();

    let mut total = 0usize;
    let mut violations = 0usize;
    let mut min_margin = f64::INFINITY;
    let mut error = None;
    for o in outcomes {
        match o {
            Ok((n, v, margin)) => {
                total += n;
                violations += v;
                min_margin = min_margin.min(margin);
            }
            Err(e) => error = Some(e),
        }
    }
    if let Some(e) = error {
        results.push(PropertyResult::new(3, "instance_error", false, e));
        return results;
    }
    results.push(PropertyResult::new(
        3,
        "lower_bound_on_members",
        violations == 0 && total >= 1000,
        format!("{violations} violations over {total} member kernels, min margin {min_margin:.3e}"),
    ));

    let mut ordering_ok = true;
    let mut strict_ok = true;
    let mut detail = String::new();
    for i in 0..instances.max(20) {
        let mut rng = seeded_rng(seed.wrapping_add(9_000 + i as u64));
        let mdp = Mdp::<f64>::random(4, 3, 0.9, (0.1, 1.0), &mut rng);
        let policy = Policy::random(4, 3, &mut rng);
        let state = kernel_lower_bound(&mdp, &policy, alpha, epsilon).expect("bound");
        let joint = state_action_kernel_bound(&mdp, &policy, alpha, epsilon).expect("bound");
        if joint > state {
            ordering_ok = false;
            detail = format!("instance {i}: state_action bound {joint} above state bound {state}");
            break;
        }
        let occ = compute_occupancy(&mdp, &policy).expect("occupancy");
        if occ.expected_policy_entropy(&policy) > 1e-6 && !(joint < state) {
            strict_ok = false;
            detail = format!("instance {i}: strict ordering failed at policy entropy > 1e-6");
            break;
        }
    }
    if detail.is_empty() {
        detail = format!("state_action <= state on {} instances, strict under stochastic policies", instances.max(20));
    }
    results.push(PropertyResult::new(3, "bound_ordering", ordering_ok && strict_ok, detail));
    results
}

/// Impossibility probe: constant rewards pin the robust value while the
/// regularizer stays away from zero.
fn theorem4(instances: usize, seed: u64) -> Vec<PropertyResult> {
    let mut rng = seeded_rng(seed.wrapping_add(77));
    let family: Vec<Mdp<f64>> = (0..instances)
        .map(|_| {
            let base = Mdp::<f64>::random(4, 2, 0.9, (0.0, 1.0), &mut rng);
            let c = -2.0 + 7.0 * rng.random::<f64>();
            base.with_reward(Array2::from_elem((4, 2), c)).expect("constant reward")
        })
        .collect();
    let policy = Policy::random(4, 2, &mut rng);
    let mut results = Vec::new();
    for reg in RegularizerKind::ALL {
        match impossibility_probe(&family, &policy, reg, 1.0, &mut rng) {
            Ok(report) => {
                let exact = report
                    .entries
                    .iter()
                    .all(|e| e.robust_value == e.constant && (e.sampled_min_return - e.constant).abs() < 1e-9);
                let max_omega = report
                    .entries
                    .iter()
                    .map(|e| e.omega.abs())
                    .fold(0.0f64, f64::max);
                let passed = exact && report.refutes_identity && max_omega > 1e-3;
                results.push(PropertyResult::new(
                    4,
                    format!("constant_reward_probe/{}", reg.name()),
                    passed,
                    format!(
                        "{} MDPs: robust value pinned to the constant, max |Omega| = {max_omega:.3e}",
                        report.entries.len()
                    ),
                ));
            }
            Err(e) => {
                results.push(PropertyResult::new(
                    4,
                    format!("constant_reward_probe/{}", reg.name()),
                    false,
                    e.to_string(),
                ));
            }
        }
    }
    results
}

/// CVaR counterexample at the canonical parameters.
fn theorem5() -> Vec<PropertyResult> {
    let params = CounterexampleParams::<f64>::canonical();
    let mut results = Vec::new();
    let ce = match build_counterexample(&params, 0.5) {
        Ok(ce) => ce,
        Err(e) => {
            results.push(PropertyResult::new(5, "construction", false, e.to_string()));
            return results;
        }
    };
    let construction_ok = (ce.r3 + 21.0).abs() < 1e-9 && (ce.r4 - 22.98).abs() < 1e-9;
    results.push(PropertyResult::new(
        5,
        "construction",
        construction_ok,
        format!("p = {}, r3 = {}, r4 = {}, predicted gap = {}", ce.p, ce.r3, ce.r4, ce.expected_gap),
    ));
    match verify_gap(&ce.mdp, &params, RegularizerKind::Policy) {
        Ok(report) => {
            let cvar_exact = (report.cvar_unregularized - 1.0).abs() < 1e-12;
            results.push(PropertyResult::new(
                5,
                "unregularized_cvar",
                cvar_exact,
                format!("CVaR of the optimal policy = {}", report.cvar_unregularized),
            ));
            let q_in_range = report.realized_q >= 0.4 && report.realized_q <= 0.6;
            let gap_ok = report.gap >= 10.0;
            results.push(PropertyResult::new(
                5,
                "regularized_gap",
                q_in_range && gap_ok,
                format!("realized q = {:.6}, CVaR gap = {:.4} (target >= 10)", report.realized_q, report.gap),
            ));
        }
        Err(e) => {
            results.push(PropertyResult::new(5, "regularized_gap", false, e.to_string()));
        }
    }
    results
}
