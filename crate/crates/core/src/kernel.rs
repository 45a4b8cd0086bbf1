//! Transition-kernel robustness: the state-entropy lower bound, its looser
//! state-action variant, membership in the induced kernel uncertainty set,
//! and the impossibility probe for constant-reward MDPs.
//!
//! The uncertainty set is expressed through the state distributions the
//! kernels induce: a kernel is a member when
//! `alpha * log((1/S) * sum_s (d_P(s) / d_Ptilde(s))^(1/alpha)) <= epsilon`.
//! No procedure for searching this set is prescribed anywhere, so member
//! kernels are found heuristically by rejection sampling over
//! Dirichlet-perturbed rows plus local greedy descent on the return; the
//! bound only has to hold on members, not at an exactly solved minimum.

use ndarray::Array3;
use rand::Rng;
use thiserror::Error;

use crate::mdp::{
    compute_occupancy, random_simplex, regularized_return, return_of, Mdp, MdpError, Policy,
    RegularizerKind,
};
use crate::scalar::{log_sum_exp, Scalar};

/// Occupancy mass below this is treated as off-support.
const SUPPORT_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("support mismatch: d_P({state}) > 0 but d_Ptilde({state}) = 0")]
    SupportMismatch { state: usize },
    #[error("reward must be strictly positive on the occupancy support; r({state},{action}) = {value}")]
    NonpositiveReward { state: usize, action: usize, value: f64 },
    #[error("MDP {index} in the family is not constant-reward")]
    NonConstantReward { index: usize },
    #[error("rejection sampler found only {found} of {requested} member kernels")]
    SamplingExhausted { found: usize, requested: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Divergence of `kernel_tilde` from the nominal kernel through the state
/// distributions both induce under `policy`. States off the nominal support
/// contribute zero; support gained only by the nominal kernel is an error.
pub fn kernel_divergence<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    alpha: F,
    kernel_tilde: &Array3<F>,
) -> Result<F, KernelError> {
    let nominal = compute_occupancy(mdp, policy)?;
    let perturbed = compute_occupancy(&mdp.with_kernel(kernel_tilde.clone())?, policy)?;
    let support = F::cast(SUPPORT_TOL);
    let mut terms = Vec::with_capacity(mdp.n_states());
    for s in 0..mdp.n_states() {
        let d_nom = nominal.state_marginal()[s];
        let d_pert = perturbed.state_marginal()[s];
        if d_nom <= support {
            continue; // 0^(1/alpha) = 0
        }
        if d_pert <= support {
            return Err(KernelError::SupportMismatch { state: s });
        }
        terms.push((d_nom.ln() - d_pert.ln()) / alpha);
    }
    if terms.is_empty() {
        return Ok(F::neg_infinity());
    }
    let log_mean = log_sum_exp(&terms) - F::cast(mdp.n_states() as f64).ln();
    Ok(alpha * log_mean)
}

/// Is `kernel_tilde` inside the uncertainty set of radius `epsilon`?
pub fn kernel_set_membership<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    alpha: F,
    epsilon: F,
    kernel_tilde: &Array3<F>,
) -> Result<bool, KernelError> {
    Ok(kernel_divergence(mdp, policy, alpha, kernel_tilde)? <= epsilon)
}

fn log_reward_expectation<F: Scalar>(mdp: &Mdp<F>, policy: &Policy<F>) -> Result<(F, crate::mdp::Occupancy<F>), KernelError> {
    let occ = compute_occupancy(mdp, policy)?;
    let support = F::cast(SUPPORT_TOL);
    let mut acc = F::zero();
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let rho = occ.rho()[[s, a]];
            if rho <= support {
                continue;
            }
            let r = mdp.reward()[[s, a]];
            if r <= F::zero() {
                return Err(KernelError::NonpositiveReward {
                    state: s,
                    action: a,
                    value: r.as_f64(),
                });
            }
            acc += rho * r.ln();
        }
    }
    Ok((acc, occ))
}

/// State-entropy lower bound on the worst-case return over the kernel set:
/// `exp(E_rho[log r] + alpha (H(d) - log S) - epsilon)`.
pub fn kernel_lower_bound<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    alpha: F,
    epsilon: F,
) -> Result<F, KernelError> {
    let (log_r, occ) = log_reward_expectation(mdp, policy)?;
    let slack = occ.state_entropy() - F::cast(mdp.n_states() as f64).ln();
    Ok((log_r + alpha * slack - epsilon).exp())
}

/// Same derivation with state-action entropy; never better than
/// [`kernel_lower_bound`] and strictly worse for stochastic policies.
pub fn state_action_kernel_bound<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    alpha: F,
    epsilon: F,
) -> Result<F, KernelError> {
    let (log_r, occ) = log_reward_expectation(mdp, policy)?;
    let slack = occ.state_action_entropy()
        - F::cast((mdp.n_states() * mdp.n_actions()) as f64).ln();
    Ok((log_r + alpha * slack - epsilon).exp())
}

/// Draw `count` member kernels by rejection over Dirichlet-perturbed rows.
/// The mixing weight shrinks on rejection so the sampler always terminates
/// on feasible inputs.
pub fn sample_member_kernels<F: Scalar, R: Rng + ?Sized>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    alpha: F,
    epsilon: F,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Array3<F>>, KernelError> {
    let mut members = Vec::with_capacity(count);
    let mut weight = 0.5f64;
    let mut attempts = 0usize;
    let budget = count.saturating_mul(400).max(4000);
    while members.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(KernelError::SamplingExhausted { found: members.len(), requested: count });
        }
        let candidate = perturb_kernel(mdp.kernel(), weight, rng);
        match kernel_set_membership(mdp, policy, alpha, epsilon, &candidate) {
            Ok(true) => {
                members.push(candidate);
                weight = (weight * 1.05).min(0.95);
            }
            Ok(false) => {
                weight = (weight * 0.7).max(1e-4);
            }
            Err(KernelError::SupportMismatch { .. }) => {
                weight = (weight * 0.7).max(1e-4);
            }
            Err(other) => return Err(other),
        }
    }
    Ok(members)
}

fn perturb_kernel<F: Scalar, R: Rng + ?Sized>(kernel: &Array3<F>, weight: f64, rng: &mut R) -> Array3<F> {
    let (n_states, n_actions, _) = kernel.dim();
    let mut out = kernel.clone();
    for s in 0..n_states {
        for a in 0..n_actions {
            let w = F::cast(weight * rng.random::<f64>());
            let noise: Vec<F> = random_simplex(n_states, rng);
            for s2 in 0..n_states {
                out[[s, a, s2]] = (F::one() - w) * kernel[[s, a, s2]] + w * noise[s2];
            }
        }
    }
    out
}

/// Member kernel with (locally) minimal return: best rejection sample
/// followed by greedy single-row moves that keep membership.
pub fn greedy_min_member_return<F: Scalar, R: Rng + ?Sized>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    alpha: F,
    epsilon: F,
    samples: usize,
    descent_steps: usize,
    rng: &mut R,
) -> Result<(Array3<F>, F), KernelError> {
    let return_under = |kernel: &Array3<F>| -> Result<F, KernelError> {
        let perturbed = mdp.with_kernel(kernel.clone())?;
        let occ = compute_occupancy(&perturbed, policy)?;
        Ok(return_of(&perturbed, &occ))
    };
    let mut best = mdp.kernel().clone();
    let mut best_value = return_under(&best)?;
    for candidate in sample_member_kernels(mdp, policy, alpha, epsilon, samples, rng)? {
        let value = return_under(&candidate)?;
        if value < best_value {
            best = candidate;
            best_value = value;
        }
    }
    let (n_states, n_actions, _) = best.dim();
    for _ in 0..descent_steps {
        let s = rng.random_range(0..n_states);
        let a = rng.random_range(0..n_actions);
        let target = rng.random_range(0..n_states);
        let t = F::cast(0.3 * rng.random::<f64>());
        let mut trial = best.clone();
        for s2 in 0..n_states {
            let vertex = if s2 == target { F::one() } else { F::zero() };
            trial[[s, a, s2]] = (F::one() - t) * best[[s, a, s2]] + t * vertex;
        }
        if let Ok(true) = kernel_set_membership(mdp, policy, alpha, epsilon, &trial) {
            let value = return_under(&trial)?;
            if value < best_value {
                best = trial;
                best_value = value;
            }
        }
    }
    Ok((best, best_value))
}

/// One `(epsilon, bound, sampled_min)` row of a budget sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow<F> {
    pub epsilon: F,
    pub bound: F,
    pub sampled_min: F,
}

pub fn epsilon_sweep<F: Scalar, R: Rng + ?Sized>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    alpha: F,
    epsilons: &[F],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<SweepRow<F>>, KernelError> {
    epsilons
        .iter()
        .map(|&epsilon| {
            let bound = kernel_lower_bound(mdp, policy, alpha, epsilon)?;
            let (_, sampled_min) =
                greedy_min_member_return(mdp, policy, alpha, epsilon, samples, samples, rng)?;
            Ok(SweepRow { epsilon, bound, sampled_min })
        })
        .collect()
}

/// One constant-reward MDP inspected by [`impossibility_probe`].
#[derive(Debug, Clone, Copy)]
pub struct ProbeEntry<F> {
    /// The constant reward.
    pub constant: F,
    /// Regularization value `Omega = regularized_return - expected_return`.
    pub omega: F,
    /// Worst-case return over any kernel set: equals the constant, because a
    /// normalized occupancy integrates a constant reward to that constant.
    pub robust_value: F,
    /// Minimum return over sampled arbitrary kernels, as a numerical check.
    pub sampled_min_return: F,
}

#[derive(Debug, Clone)]
pub struct ProbeReport<F> {
    pub entries: Vec<ProbeEntry<F>>,
    /// True when some entry has `Omega != 0`, in which case no identity
    /// `robust = nominal + Omega` can hold across the family.
    pub refutes_identity: bool,
}

/// For constant-reward MDPs the robust value over any kernel set is the
/// constant itself, while the regularizer `Omega` is generally nonzero; the
/// report exhibits the mismatch family-wide.
pub fn impossibility_probe<F: Scalar, R: Rng + ?Sized>(
    family: &[Mdp<F>],
    policy: &Policy<F>,
    reg: RegularizerKind,
    alpha: F,
    rng: &mut R,
) -> Result<ProbeReport<F>, KernelError> {
    let mut entries = Vec::with_capacity(family.len());
    for (index, mdp) in family.iter().enumerate() {
        let constant = mdp.reward()[[0, 0]];
        if mdp.reward().iter().any(|&r| r != constant) {
            return Err(KernelError::NonConstantReward { index });
        }
        let nominal = crate::mdp::expected_return(mdp, policy)?;
        let regularized = regularized_return(mdp, policy, reg, alpha)?;
        let omega = regularized - nominal;
        let mut sampled_min = F::infinity();
        for _ in 0..20 {
            let kernel = perturb_kernel(mdp.kernel(), 1.0, rng);
            let perturbed = mdp.with_kernel(kernel)?;
            let occ = compute_occupancy(&perturbed, policy)?;
            sampled_min = sampled_min.min(return_of(&perturbed, &occ));
        }
        entries.push(ProbeEntry {
            constant,
            omega,
            robust_value: constant,
            sampled_min_return: sampled_min,
        });
    }
    let tol = F::cast(1e-12);
    let refutes_identity = entries.iter().any(|e| e.omega.abs() > tol);
    Ok(ProbeReport { entries, refutes_identity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{Array1, Array2};

    #[test]
    fn identical_kernel_has_zero_divergence() {
        let mut rng = crate::test_rng(43);
        let mdp = Mdp::<f64>::random(4, 2, 0.9, (0.1, 1.0), &mut rng);
        let policy = Policy::random(4, 2, &mut rng);
        let div = kernel_divergence(&mdp, &policy, 0.7, &mdp.kernel().clone()).unwrap();
        assert_abs_diff_eq!(div, 0.0, epsilon = 1e-9);
        assert!(kernel_set_membership(&mdp, &policy, 0.7, 1e-6, &mdp.kernel().clone()).unwrap());
    }

    #[test]
    fn small_mixture_perturbation_membership_is_reproducible() {
        // Regression fixture: 0.01 mixture toward uniform rows.
        let mut rng = crate::test_rng(47);
        let mdp = Mdp::<f64>::random(4, 2, 0.9, (0.1, 1.0), &mut rng);
        let policy = Policy::random(4, 2, &mut rng);
        let uniform = 1.0 / 4.0;
        let mut tilde = mdp.kernel().clone();
        tilde.mapv_inplace(|p| 0.99 * p + 0.01 * uniform);
        let div = kernel_divergence(&mdp, &policy, 0.5, &tilde).unwrap();
        assert!(div.abs() < 1e-2, "tiny mixture should produce tiny divergence, got {div}");
        assert!(kernel_set_membership(&mdp, &policy, 0.5, 0.05, &tilde).unwrap());
        assert_abs_diff_eq!(div, -0.0002643016014771682, epsilon = 1e-12);
    }

    #[test]
    fn constant_reward_uniform_marginal_bound_is_tight_at_zero_budget() {
        // Symmetric kernel: uniform marginal; constant reward c, eps = 0.
        let mut kernel = Array3::zeros((3, 2, 3));
        for s in 0..3 {
            for a in 0..2 {
                for s2 in 0..3 {
                    kernel[[s, a, s2]] = 1.0 / 3.0;
                }
            }
        }
        let reward = Array2::from_elem((3, 2), 0.7);
        let initial = Array1::from_vec(vec![1.0 / 3.0; 3]);
        let mdp = Mdp::new(kernel, reward, 0.9, initial).unwrap();
        let policy = Policy::uniform(3, 2);
        let bound = kernel_lower_bound(&mdp, &policy, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(bound, 0.7, epsilon = 1e-10);
    }

    #[test]
    fn nominal_return_dominates_bound_at_zero_budget() {
        let mut rng = crate::test_rng(53);
        for _ in 0..20 {
            let mdp = Mdp::<f64>::random(4, 3, 0.9, (0.1, 1.0), &mut rng);
            let policy = Policy::random(4, 3, &mut rng);
            let nominal = crate::mdp::expected_return(&mdp, &policy).unwrap();
            let bound = kernel_lower_bound(&mdp, &policy, 0.5, 0.0).unwrap();
            assert!(nominal >= bound - 1e-12, "{nominal} < {bound}");
        }
    }

    #[test]
    fn sampled_members_respect_the_lower_bound() {
        let mut rng = crate::test_rng(59);
        let mdp = Mdp::<f64>::random(4, 2, 0.9, (0.1, 1.0), &mut rng);
        let policy = Policy::random(4, 2, &mut rng);
        let (alpha, epsilon) = (0.8, 0.3);
        let bound = kernel_lower_bound(&mdp, &policy, alpha, epsilon).unwrap();
        let members = sample_member_kernels(&mdp, &policy, alpha, epsilon, 100, &mut rng).unwrap();
        for kernel in members {
            let perturbed = mdp.with_kernel(kernel).unwrap();
            let occ = compute_occupancy(&perturbed, &policy).unwrap();
            assert!(return_of(&perturbed, &occ) >= bound);
        }
    }

    #[test]
    fn state_action_bound_is_never_better() {
        let mut rng = crate::test_rng(61);
        for _ in 0..20 {
            let mdp = Mdp::<f64>::random(4, 3, 0.85, (0.1, 1.0), &mut rng);
            let policy = Policy::random(4, 3, &mut rng);
            let state = kernel_lower_bound(&mdp, &policy, 0.6, 0.2).unwrap();
            let joint = state_action_kernel_bound(&mdp, &policy, 0.6, 0.2).unwrap();
            assert!(joint <= state + 1e-14);
            // Gap is exactly exp(alpha (E_d[H_A] - log A)).
            let occ = compute_occupancy(&mdp, &policy).unwrap();
            let factor =
                (0.6 * (occ.expected_policy_entropy(&policy) - 3.0f64.ln())).exp();
            assert_abs_diff_eq!(joint, state * factor, epsilon = 1e-10);
        }
    }

    #[test]
    fn deterministic_policy_collapses_the_two_bounds() {
        let mut rng = crate::test_rng(67);
        let mdp = Mdp::<f64>::random(4, 3, 0.9, (0.1, 1.0), &mut rng);
        let policy = Policy::deterministic(3, &[0, 2, 1, 0]);
        let state = kernel_lower_bound(&mdp, &policy, 0.6, 0.2).unwrap();
        let joint = state_action_kernel_bound(&mdp, &policy, 0.6, 0.2).unwrap();
        // H_A terms vanish, but log(SA) vs log(S) differs by log(A):
        // collapse happens on the entropy, the count offsets remain -- the
        // chain-rule gap reduces to exp(-alpha log A) exactly.
        let expected = state * (-0.6 * 3.0f64.ln()).exp();
        assert_abs_diff_eq!(joint, expected, epsilon = 1e-12);
    }

    #[test]
    fn nonpositive_reward_is_rejected() {
        let mut rng = crate::test_rng(71);
        let mdp = Mdp::<f64>::random(3, 2, 0.9, (-0.5, 1.0), &mut rng);
        let policy = Policy::random(3, 2, &mut rng);
        assert!(matches!(
            kernel_lower_bound(&mdp, &policy, 1.0, 0.1),
            Err(KernelError::NonpositiveReward { .. })
        ));
    }

    #[test]
    fn probe_flags_nonzero_omega_on_constant_rewards() {
        let mut rng = crate::test_rng(73);
        let base = Mdp::<f64>::random(4, 2, 0.9, (0.0, 1.0), &mut rng);
        let zero = base.with_reward(Array2::from_elem((4, 2), 0.0)).unwrap();
        let five = base.with_reward(Array2::from_elem((4, 2), 5.0)).unwrap();
        let policy = Policy::random(4, 2, &mut rng);
        let report =
            impossibility_probe(&[zero, five], &policy, RegularizerKind::State, 1.0, &mut rng)
                .unwrap();
        assert!(report.refutes_identity);
        for entry in &report.entries {
            assert_abs_diff_eq!(entry.robust_value, entry.constant, epsilon = 0.0);
            assert_abs_diff_eq!(entry.sampled_min_return, entry.constant, epsilon = 1e-9);
            assert!(entry.omega > 1e-3);
        }
    }

    #[test]
    fn probe_degenerate_single_state_has_zero_omega() {
        let mut kernel = Array3::zeros((1, 1, 1));
        kernel[[0, 0, 0]] = 1.0;
        let reward = Array2::from_elem((1, 1), 2.0);
        let initial = Array1::from_vec(vec![1.0]);
        let mdp = Mdp::new(kernel, reward, 0.5, initial).unwrap();
        let policy = Policy::<f64>::deterministic(1, &[0]);
        let mut rng = crate::test_rng(79);
        let report =
            impossibility_probe(&[mdp], &policy, RegularizerKind::Policy, 1.0, &mut rng).unwrap();
        assert!(!report.refutes_identity);
        assert_abs_diff_eq!(report.entries[0].omega, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn probe_rejects_nonconstant_rewards() {
        let mut rng = crate::test_rng(83);
        let mdp = Mdp::<f64>::random(3, 2, 0.9, (0.0, 1.0), &mut rng);
        let policy = Policy::uniform(3, 2);
        assert!(matches!(
            impossibility_probe(&[mdp], &policy, RegularizerKind::State, 1.0, &mut rng),
            Err(KernelError::NonConstantReward { index: 0 })
        ));
    }
}
