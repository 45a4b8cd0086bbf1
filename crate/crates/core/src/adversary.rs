//! Reward uncertainty sets induced by entropy regularization.
//!
//! Each regularizer induces a log-sum-exp constrained set of perturbed
//! rewards. This module evaluates set membership, the closed-form worst-case
//! reward and robust return for all three regularizers, an independent
//! first-order minimizer used to cross-check the closed forms, and the
//! low/high-temperature limit sets together with boundary sampling for the
//! two-state picture.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::mdp::{compute_occupancy, return_of, Mdp, MdpError, Occupancy, Policy, RegularizerKind};
use crate::scalar::{log_sum_exp, Scalar};

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("uncertainty spec requires {field} > 0, got {value}")]
    InvalidSpec { field: &'static str, value: f64 },
    #[error("degenerate support: {context}")]
    DegenerateSupport { context: String },
    #[error("perturbation shape {got:?} does not match reward shape {expected:?}")]
    ShapeMismatch { got: (usize, usize), expected: (usize, usize) },
    #[error("delta is inconsistent with r - r_tilde (max deviation {deviation})")]
    InconsistentDelta { deviation: f64 },
    #[error("adversarial minimization stalled at KKT residual {residual} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Which uncertainty set, how warm, and how large a budget.
#[derive(Debug, Clone, Copy)]
pub struct UncertaintySpec<F> {
    pub regularizer: RegularizerKind,
    pub alpha: F,
    pub epsilon: F,
}

impl<F: Scalar> UncertaintySpec<F> {
    pub fn new(regularizer: RegularizerKind, alpha: F, epsilon: F) -> Result<Self, AdversaryError> {
        if !(alpha > F::zero()) {
            return Err(AdversaryError::InvalidSpec { field: "alpha", value: alpha.as_f64() });
        }
        if !(epsilon > F::zero()) {
            return Err(AdversaryError::InvalidSpec { field: "epsilon", value: epsilon.as_f64() });
        }
        Ok(Self { regularizer, alpha, epsilon })
    }

    /// `log` of the element count the LSE runs over: `A`, `S` or `SA`.
    fn log_count(&self, n_states: usize, n_actions: usize) -> F {
        let count = match self.regularizer {
            RegularizerKind::Policy => n_actions,
            RegularizerKind::State => n_states,
            RegularizerKind::StateAction => n_states * n_actions,
        };
        F::cast(count as f64).ln()
    }

    /// Right-hand side of the membership constraint, `epsilon/alpha + log(count)`.
    pub fn constraint_bound(&self, n_states: usize, n_actions: usize) -> F {
        self.epsilon / self.alpha + self.log_count(n_states, n_actions)
    }
}

/// A perturbed reward table together with the cached `delta = r - r_tilde`.
#[derive(Debug, Clone)]
pub struct RewardPerturbation<F> {
    pub r_tilde: Array2<F>,
    pub delta: Array2<F>,
}

impl<F: Scalar> RewardPerturbation<F> {
    pub fn from_r_tilde(reward: &Array2<F>, r_tilde: Array2<F>) -> Result<Self, AdversaryError> {
        if r_tilde.dim() != reward.dim() {
            return Err(AdversaryError::ShapeMismatch { got: r_tilde.dim(), expected: reward.dim() });
        }
        let delta = reward - &r_tilde;
        Ok(Self { r_tilde, delta })
    }

    pub fn from_delta(reward: &Array2<F>, delta: Array2<F>) -> Result<Self, AdversaryError> {
        if delta.dim() != reward.dim() {
            return Err(AdversaryError::ShapeMismatch { got: delta.dim(), expected: reward.dim() });
        }
        let r_tilde = reward - &delta;
        Ok(Self { r_tilde, delta })
    }

    /// Check `delta == r - r_tilde` within 1e-12.
    pub fn validate(&self, reward: &Array2<F>) -> Result<(), AdversaryError> {
        let deviation = self
            .delta
            .iter()
            .zip(reward.iter().zip(self.r_tilde.iter()))
            .map(|(&d, (&r, &rt))| (d - (r - rt)).abs())
            .fold(F::zero(), F::max);
        if deviation > F::cast(1e-12) {
            return Err(AdversaryError::InconsistentDelta { deviation: deviation.as_f64() });
        }
        Ok(())
    }

    /// Policy-averaged perturbation per state, `delta_pi(s) = sum_a pi(a|s) delta(s,a)`.
    pub fn delta_pi(&self, policy: &Policy<F>) -> Array1<F> {
        let (n_states, n_actions) = self.delta.dim();
        Array1::from_shape_fn(n_states, |s| {
            (0..n_actions)
                .map(|a| policy.probs()[[s, a]] * self.delta[[s, a]])
                .sum()
        })
    }

    /// True if the adversary does not improve every entry, i.e. some
    /// `r_tilde(s,a) <= r(s,a)`.
    pub fn can_degrade(&self) -> bool {
        self.delta.iter().any(|&d| d >= F::zero())
    }
}

/// Left-hand side of the membership constraint for `pert` (the LSE expression).
pub fn constraint_value<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    spec: &UncertaintySpec<F>,
    pert: &RewardPerturbation<F>,
) -> Result<F, AdversaryError> {
    crate::mdp::check_compatible(mdp, policy)?;
    let alpha = spec.alpha;
    Ok(match spec.regularizer {
        RegularizerKind::State => {
            let scaled: Vec<F> = pert.delta_pi(policy).iter().map(|&d| d / alpha).collect();
            log_sum_exp(&scaled)
        }
        RegularizerKind::StateAction => {
            let scaled: Vec<F> = pert.delta.iter().map(|&d| d / alpha).collect();
            log_sum_exp(&scaled)
        }
        RegularizerKind::Policy => {
            let occ = compute_occupancy(mdp, policy)?;
            let mut value = F::zero();
            for s in 0..mdp.n_states() {
                let row: Vec<F> = (0..mdp.n_actions())
                    .map(|a| pert.delta[[s, a]] / alpha)
                    .collect();
                value += occ.state_marginal()[s] * log_sum_exp(&row);
            }
            value
        }
    })
}

/// Does `pert` lie in the uncertainty set?
pub fn membership<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    spec: &UncertaintySpec<F>,
    pert: &RewardPerturbation<F>,
) -> Result<bool, AdversaryError> {
    let lhs = constraint_value(mdp, policy, spec, pert)?;
    Ok(lhs <= spec.constraint_bound(mdp.n_states(), mdp.n_actions()))
}

/// Closed-form worst-case reward for `spec`. The perturbation saturates the
/// membership constraint and attains [`robust_return_closed_form`].
pub fn worst_case_reward<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    spec: &UncertaintySpec<F>,
) -> Result<RewardPerturbation<F>, AdversaryError> {
    crate::mdp::check_compatible(mdp, policy)?;
    let occ = compute_occupancy(mdp, policy)?;
    let (n_states, n_actions) = mdp.reward().dim();
    let alpha = spec.alpha;
    // Additive constant pinned by constraint activity.
    let shift = spec.epsilon + alpha * spec.log_count(n_states, n_actions);
    let mut delta = Array2::zeros((n_states, n_actions));
    match spec.regularizer {
        RegularizerKind::Policy => {
            for s in 0..n_states {
                for a in 0..n_actions {
                    let p = policy.probs()[[s, a]];
                    if p <= F::zero() {
                        return Err(AdversaryError::DegenerateSupport {
                            context: format!("policy row needs pi({a}|{s}) > 0"),
                        });
                    }
                    delta[[s, a]] = alpha * p.ln() + shift;
                }
            }
        }
        RegularizerKind::State => {
            for s in 0..n_states {
                let d = occ.state_marginal()[s];
                if d <= F::zero() {
                    return Err(AdversaryError::DegenerateSupport {
                        context: format!("state row needs d({s}) > 0"),
                    });
                }
                for a in 0..n_actions {
                    let p = policy.probs()[[s, a]];
                    if p <= F::zero() {
                        return Err(AdversaryError::DegenerateSupport {
                            context: format!("state row needs pi({a}|{s}) > 0"),
                        });
                    }
                    delta[[s, a]] = alpha * d.ln() / (F::cast(n_actions as f64) * p) + shift;
                }
            }
        }
        RegularizerKind::StateAction => {
            for s in 0..n_states {
                for a in 0..n_actions {
                    let rho = occ.rho()[[s, a]];
                    if rho <= F::zero() {
                        return Err(AdversaryError::DegenerateSupport {
                            context: format!("state-action row needs rho({s},{a}) > 0"),
                        });
                    }
                    delta[[s, a]] = alpha * rho.ln() + shift;
                }
            }
        }
    }
    RewardPerturbation::from_delta(mdp.reward(), delta)
}

/// The regularization duality value: minimum of `E_rho[r_tilde]` over the
/// uncertainty set, in closed form.
pub fn robust_return_closed_form<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    spec: &UncertaintySpec<F>,
) -> Result<F, AdversaryError> {
    crate::mdp::check_compatible(mdp, policy)?;
    let occ = compute_occupancy(mdp, policy)?;
    let base = return_of(mdp, &occ);
    let entropy_slack = match spec.regularizer {
        RegularizerKind::Policy => {
            occ.expected_policy_entropy(policy) - F::cast(mdp.n_actions() as f64).ln()
        }
        RegularizerKind::State => occ.state_entropy() - F::cast(mdp.n_states() as f64).ln(),
        RegularizerKind::StateAction => {
            occ.state_action_entropy() - F::cast((mdp.n_states() * mdp.n_actions()) as f64).ln()
        }
    };
    Ok(base - spec.epsilon + spec.alpha * entropy_slack)
}

/// Numerically minimize `E_rho[r_tilde]` over the uncertainty set.
///
/// Independent oracle for the closed forms: maximizes the concave Lagrangian
/// `<rho, delta> - alpha * lse(delta)` with safeguarded Barzilai-Borwein
/// gradient ascent (the multiplier is pinned to `alpha` by the constraint's
/// shift direction), then shifts along the all-ones direction onto the
/// constraint boundary. Returns the minimizing perturbation and its value.
pub fn adversarial_minimize<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    spec: &UncertaintySpec<F>,
) -> Result<(RewardPerturbation<F>, F), AdversaryError> {
    crate::mdp::check_compatible(mdp, policy)?;
    let occ = compute_occupancy(mdp, policy)?;
    let (n_states, n_actions) = mdp.reward().dim();
    let alpha = spec.alpha;
    let kkt_tol = F::cast(1e-9);
    let max_iterations = 500_000;

    let grad_of = |delta: &Array2<F>| -> Array2<F> {
        // gradient of <rho, delta> - alpha * lse_expression(delta)
        let mut grad = occ.rho().clone();
        match spec.regularizer {
            RegularizerKind::State => {
                let delta_pi = policy_average(delta, policy);
                let weights = softmax(&delta_pi.iter().map(|&v| v / alpha).collect::<Vec<F>>());
                for s in 0..n_states {
                    for a in 0..n_actions {
                        grad[[s, a]] -= weights[s] * policy.probs()[[s, a]];
                    }
                }
            }
            RegularizerKind::StateAction => {
                let flat: Vec<F> = delta.iter().map(|&v| v / alpha).collect();
                let weights = softmax(&flat);
                for (g, w) in grad.iter_mut().zip(weights) {
                    *g -= w;
                }
            }
            RegularizerKind::Policy => {
                for s in 0..n_states {
                    let row: Vec<F> = (0..n_actions).map(|a| delta[[s, a]] / alpha).collect();
                    let weights = softmax(&row);
                    let d = occ.state_marginal()[s];
                    for a in 0..n_actions {
                        grad[[s, a]] -= d * weights[a];
                    }
                }
            }
        }
        grad
    };
    let lagrangian = |delta: &Array2<F>| -> F {
        let lse = lse_expression(delta, policy, &occ, spec);
        delta
            .iter()
            .zip(occ.rho().iter())
            .map(|(&d, &r)| d * r)
            .sum::<F>()
            - alpha * lse
    };

    let mut delta = Array2::zeros((n_states, n_actions));
    let mut value = lagrangian(&delta);
    let mut grad = grad_of(&delta);
    let mut step = alpha;
    let mut residual = F::infinity();
    let mut converged = false;
    for _ in 0..max_iterations {
        residual = grad.iter().fold(F::zero(), |acc, &g| acc.max(g.abs()));
        if residual <= kkt_tol {
            converged = true;
            break;
        }
        // Armijo backtracking on the concave Lagrangian.
        let mut accepted = false;
        let grad_sq: F = grad.iter().map(|&g| g * g).sum();
        for _ in 0..70 {
            let mut trial = delta.clone();
            trial.zip_mut_with(&grad, |x, &g| *x += step * g);
            let trial_value = lagrangian(&trial);
            if trial_value >= value + F::cast(1e-4) * step * grad_sq {
                let new_grad = grad_of(&trial);
                // Barzilai-Borwein step for the next round.
                let mut sy = F::zero();
                let mut yy = F::zero();
                for (&gn, &go) in new_grad.iter().zip(grad.iter()) {
                    let y = go - gn;
                    sy += step * go * y;
                    yy += y * y;
                }
                delta = trial;
                value = trial_value;
                grad = new_grad;
                step = if yy > F::zero() && sy > F::zero() {
                    (sy / yy).min(F::cast(1e6)).max(F::cast(1e-12))
                } else {
                    step * F::cast(2.0)
                };
                accepted = true;
                break;
            }
            step *= F::cast(0.5);
        }
        if !accepted {
            // Gradient too flat for further progress at this precision.
            break;
        }
    }
    if !converged && residual > F::cast(1e-6) {
        return Err(AdversaryError::NonConvergence {
            residual: residual.as_f64(),
            iterations: max_iterations,
        });
    }

    // Slide along the all-ones direction onto the constraint boundary; the
    // LSE expression moves one-to-one with shift/alpha.
    let bound = spec.constraint_bound(n_states, n_actions);
    let lse = lse_expression(&delta, policy, &occ, spec);
    let shift = alpha * (bound - lse);
    delta.mapv_inplace(|v| v + shift);

    let objective = return_of(mdp, &occ)
        - delta
            .iter()
            .zip(occ.rho().iter())
            .map(|(&d, &r)| d * r)
            .sum::<F>();
    let pert = RewardPerturbation::from_delta(mdp.reward(), delta)?;
    debug_assert!(pert.can_degrade());
    Ok((pert, objective))
}

fn lse_expression<F: Scalar>(
    delta: &Array2<F>,
    policy: &Policy<F>,
    occ: &Occupancy<F>,
    spec: &UncertaintySpec<F>,
) -> F {
    let (n_states, n_actions) = delta.dim();
    let alpha = spec.alpha;
    match spec.regularizer {
        RegularizerKind::State => {
            let delta_pi = policy_average(delta, policy);
            log_sum_exp(&delta_pi.iter().map(|&v| v / alpha).collect::<Vec<F>>())
        }
        RegularizerKind::StateAction => {
            log_sum_exp(&delta.iter().map(|&v| v / alpha).collect::<Vec<F>>())
        }
        RegularizerKind::Policy => (0..n_states)
            .map(|s| {
                let row: Vec<F> = (0..n_actions).map(|a| delta[[s, a]] / alpha).collect();
                occ.state_marginal()[s] * log_sum_exp(&row)
            })
            .sum(),
    }
}

fn policy_average<F: Scalar>(delta: &Array2<F>, policy: &Policy<F>) -> Array1<F> {
    let (n_states, n_actions) = delta.dim();
    Array1::from_shape_fn(n_states, |s| {
        (0..n_actions)
            .map(|a| policy.probs()[[s, a]] * delta[[s, a]])
            .sum()
    })
}

fn softmax<F: Scalar>(values: &[F]) -> Vec<F> {
    let lse = log_sum_exp(values);
    values.iter().map(|&v| (v - lse).exp()).collect()
}

/// The two temperature limits of the state-entropy uncertainty set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitSet {
    /// `alpha -> 0`: sup-norm style, `max_s delta_pi(s) <= epsilon`.
    AlphaZero,
    /// `alpha -> inf`: mean style, `(1/S) sum_s delta_pi(s) <= epsilon`.
    AlphaInf,
}

pub fn limit_set_membership<F: Scalar>(
    policy: &Policy<F>,
    epsilon: F,
    which: LimitSet,
    pert: &RewardPerturbation<F>,
) -> bool {
    let delta_pi = pert.delta_pi(policy);
    match which {
        LimitSet::AlphaZero => delta_pi.iter().copied().fold(F::neg_infinity(), F::max) <= epsilon,
        LimitSet::AlphaInf => delta_pi.mean().unwrap_or_else(F::zero) <= epsilon,
    }
}

/// One sampled point of a constant-`alpha` boundary in the two-state picture.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint<F> {
    pub alpha: F,
    pub r_tilde_1: F,
    pub r_tilde_2: F,
}

/// Sample the boundary of the state-entropy uncertainty set for a two-state
/// MDP with per-state policy rewards `r_pi`, one polyline per `alpha`.
///
/// On the boundary `exp(d1/alpha) + exp(d2/alpha) = 2 exp(epsilon/alpha)`
/// where `d_i = r_pi_i - r_tilde_i`; `d1` is swept over a grid and `d2`
/// solved in log space.
pub fn fig2_boundary<F: Scalar>(
    r_pi: [F; 2],
    epsilon: F,
    alphas: &[F],
    samples: usize,
) -> Vec<BoundaryPoint<F>> {
    let mut rows = Vec::with_capacity(alphas.len() * samples);
    for &alpha in alphas {
        // d1 sweeps up to its supremum epsilon + alpha log 2.
        let d1_max = epsilon + alpha * F::cast(2.0).ln();
        let span = F::cast(4.0) + alpha * F::cast(4.0);
        for i in 0..samples {
            let t = F::cast((i as f64 + 0.5) / samples as f64);
            let d1 = d1_max - span * (F::one() - t);
            // log(2 e^{eps/a} - e^{d1/a}) = log_k + log(1 - e^{d1/a - log_k})
            let log_k = epsilon / alpha + F::cast(2.0).ln();
            let u = d1 / alpha - log_k;
            let d2 = alpha * (log_k + (-u.exp_m1()).ln());
            rows.push(BoundaryPoint {
                alpha,
                r_tilde_1: r_pi[0] - d1,
                r_tilde_2: r_pi[1] - d2,
            });
        }
    }
    rows
}

/// The two-state, one-action MDP behind the boundary picture: rewards
/// `r_pi = (1, 0)` and a uniform stationary distribution.
pub fn two_state_figure_mdp<F: Scalar>() -> (Mdp<F>, Policy<F>) {
    let mdp = crate::mdp::two_state_cycle(F::cast(0.5), [F::one(), F::zero()]);
    let policy = Policy::uniform(2, 1);
    (mdp, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn spec(reg: RegularizerKind, alpha: f64, epsilon: f64) -> UncertaintySpec<f64> {
        UncertaintySpec::new(reg, alpha, epsilon).unwrap()
    }

    #[test]
    fn zero_delta_is_always_a_member() {
        let mut rng = crate::test_rng(7);
        let mdp = Mdp::<f64>::random(4, 2, 0.9, (-1.0, 1.0), &mut rng);
        let policy = Policy::random(4, 2, &mut rng);
        let zero = RewardPerturbation::from_delta(mdp.reward(), Array2::zeros((4, 2))).unwrap();
        for reg in RegularizerKind::ALL {
            for &alpha in &[0.01, 1.0, 100.0] {
                let s = spec(reg, alpha, 0.5);
                assert!(membership(&mdp, &policy, &s, &zero).unwrap());
            }
        }
    }

    #[test]
    fn two_state_figure_memberships() {
        // r_pi = (1, 0), epsilon = 1/2.
        let (mdp, policy) = two_state_figure_mdp::<f64>();
        // delta_pi = (0.6, 0): exceeds the alpha->0 budget.
        let mut d = Array2::zeros((2, 1));
        d[[0, 0]] = 0.6;
        let pert = RewardPerturbation::from_delta(mdp.reward(), d).unwrap();
        assert!(!limit_set_membership(&policy, 0.5, LimitSet::AlphaZero, &pert));
        let tight = spec(RegularizerKind::State, 1e-3, 0.5);
        assert!(!membership(&mdp, &policy, &tight, &pert).unwrap());
        // delta_pi = (0.5, 0) sits on the alpha->0 boundary: member of the
        // limit set and of every finite-alpha set.
        let mut d2 = Array2::zeros((2, 1));
        d2[[0, 0]] = 0.5;
        let pert2 = RewardPerturbation::from_delta(mdp.reward(), d2).unwrap();
        assert!(limit_set_membership(&policy, 0.5, LimitSet::AlphaZero, &pert2));
        for &alpha in &[1e-3, 0.1, 1.0, 10.0] {
            let s = spec(RegularizerKind::State, alpha, 0.5);
            assert!(membership(&mdp, &policy, &s, &pert2).unwrap());
        }
    }

    #[test]
    fn fig2_limit_set_examples() {
        let (mdp, policy) = two_state_figure_mdp::<f64>();
        let mut d = Array2::zeros((2, 1));
        d[[0, 0]] = 1.2;
        d[[1, 0]] = -0.4;
        let pert = RewardPerturbation::from_delta(mdp.reward(), d).unwrap();
        assert!(limit_set_membership(&policy, 0.5, LimitSet::AlphaInf, &pert));
        assert!(!limit_set_membership(&policy, 0.5, LimitSet::AlphaZero, &pert));
        // Boundary case: delta identically epsilon.
        let pert2 =
            RewardPerturbation::from_delta(mdp.reward(), Array2::from_elem((2, 1), 0.5)).unwrap();
        assert!(limit_set_membership(&policy, 0.5, LimitSet::AlphaZero, &pert2));
        assert!(limit_set_membership(&policy, 0.5, LimitSet::AlphaInf, &pert2));
    }

    #[test]
    fn membership_is_nested_in_alpha() {
        let mut rng = crate::test_rng(19);
        let mdp = Mdp::<f64>::random(3, 2, 0.8, (-1.0, 1.0), &mut rng);
        let policy = Policy::random(3, 2, &mut rng);
        for _ in 0..1000 {
            let delta = Array2::from_shape_fn((3, 2), |_| 4.0 * rng.random::<f64>() - 2.0);
            let pert = RewardPerturbation::from_delta(mdp.reward(), delta).unwrap();
            let a1 = 0.1 + rng.random::<f64>();
            let a2 = a1 + rng.random::<f64>() * 10.0;
            for reg in RegularizerKind::ALL {
                let member_small = membership(&mdp, &policy, &spec(reg, a1, 0.5), &pert).unwrap();
                let member_large = membership(&mdp, &policy, &spec(reg, a2, 0.5), &pert).unwrap();
                if member_small {
                    assert!(member_large, "nesting violated for {reg:?} at {a1} <= {a2}");
                }
            }
        }
    }

    #[test]
    fn worst_case_uniform_occupancy_drops_epsilon() {
        // Symmetric MDP with uniform occupancy: the state-action worst case
        // is r - epsilon everywhere (constraint activity absorbs log(SA)).
        let mut kernel = ndarray::Array3::zeros((2, 2, 2));
        for s in 0..2 {
            for a in 0..2 {
                kernel[[s, a, 0]] = 0.5;
                kernel[[s, a, 1]] = 0.5;
            }
        }
        let reward = Array2::from_elem((2, 2), 1.0);
        let initial = Array1::from_vec(vec![0.5, 0.5]);
        let mdp = Mdp::new(kernel, reward, 0.9, initial).unwrap();
        let policy = Policy::uniform(2, 2);
        let s = spec(RegularizerKind::StateAction, 1.0, 0.25);
        let pert = worst_case_reward(&mdp, &policy, &s).unwrap();
        for &rt in pert.r_tilde.iter() {
            assert_abs_diff_eq!(rt, 1.0 - 0.25, epsilon = 1e-10);
        }
    }

    #[test]
    fn worst_case_saturates_constraint_and_attains_closed_form() {
        let mut rng = crate::test_rng(29);
        for _ in 0..20 {
            let mdp = Mdp::<f64>::random(4, 3, 0.9, (-1.0, 1.0), &mut rng);
            let policy = Policy::random(4, 3, &mut rng);
            let occ = compute_occupancy(&mdp, &policy).unwrap();
            for reg in RegularizerKind::ALL {
                let s = spec(reg, 0.7, 0.3);
                let pert = worst_case_reward(&mdp, &policy, &s).unwrap();
                let lhs = constraint_value(&mdp, &policy, &s, &pert).unwrap();
                let bound = s.constraint_bound(4, 3);
                assert_abs_diff_eq!(lhs, bound, epsilon = 1e-8);
                let attained: f64 = pert
                    .r_tilde
                    .iter()
                    .zip(occ.rho().iter())
                    .map(|(&rt, &p)| rt * p)
                    .sum();
                let closed = robust_return_closed_form(&mdp, &policy, &s).unwrap();
                assert_abs_diff_eq!(attained, closed, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_at_uniform_marginal_is_return_minus_epsilon() {
        let mut kernel = ndarray::Array3::zeros((2, 2, 2));
        for s in 0..2 {
            for a in 0..2 {
                kernel[[s, a, 0]] = 0.5;
                kernel[[s, a, 1]] = 0.5;
            }
        }
        let reward = Array2::from_elem((2, 2), 0.8);
        let initial = Array1::from_vec(vec![0.5, 0.5]);
        let mdp = Mdp::new(kernel, reward, 0.9, initial).unwrap();
        let policy = Policy::uniform(2, 2);
        let s = spec(RegularizerKind::State, 2.0, 0.3);
        let v = robust_return_closed_form(&mdp, &policy, &s).unwrap();
        assert_abs_diff_eq!(v, 0.8 - 0.3, epsilon = 1e-10);
    }

    #[test]
    fn minimizer_matches_closed_form_on_random_instances() {
        let mut rng = crate::test_rng(31);
        for trial in 0..6 {
            let mdp = Mdp::<f64>::random(4, 2, 0.9, (-1.0, 1.0), &mut rng);
            let policy = Policy::random(4, 2, &mut rng);
            for reg in RegularizerKind::ALL {
                let s = spec(reg, 1.0, 0.5);
                let closed = robust_return_closed_form(&mdp, &policy, &s).unwrap();
                let (pert, value) = adversarial_minimize(&mdp, &policy, &s).unwrap();
                assert!(
                    (value - closed).abs() < 1e-5,
                    "trial {trial} {reg:?}: minimize {value} vs closed {closed}"
                );
                let lhs = constraint_value(&mdp, &policy, &s, &pert).unwrap();
                assert_abs_diff_eq!(lhs, s.constraint_bound(4, 2), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn minimizer_limit_of_vanishing_budget() {
        let mut rng = crate::test_rng(37);
        let mdp = Mdp::<f64>::random(3, 2, 0.85, (-1.0, 1.0), &mut rng);
        let policy = Policy::random(3, 2, &mut rng);
        let s = spec(RegularizerKind::State, 0.8, 1e-9);
        let occ = compute_occupancy(&mdp, &policy).unwrap();
        let expected = return_of(&mdp, &occ) + 0.8 * (occ.state_entropy() - 3.0f64.ln());
        let (_, value) = adversarial_minimize(&mdp, &policy, &s).unwrap();
        assert!((value - expected).abs() < 1e-5);
    }

    #[test]
    fn boundary_points_satisfy_their_own_constraint() {
        let (mdp, policy) = two_state_figure_mdp::<f64>();
        let rows = fig2_boundary([1.0, 0.0], 0.5, &[0.3, 1.0, 3.0], 32);
        for row in &rows {
            let mut d = Array2::zeros((2, 1));
            d[[0, 0]] = 1.0 - row.r_tilde_1;
            d[[1, 0]] = 0.0 - row.r_tilde_2;
            let pert = RewardPerturbation::from_delta(mdp.reward(), d).unwrap();
            let s = spec(RegularizerKind::State, row.alpha, 0.5);
            let lhs = constraint_value(&mdp, &policy, &s, &pert).unwrap();
            assert_abs_diff_eq!(lhs, s.constraint_bound(2, 1), epsilon = 1e-9);
        }
    }
}
