//! Exact CVaR of discrete return distributions and the constructive
//! counterexample family where entropy regularization degrades risk-averse
//! performance by an arbitrary margin.
//!
//! CVaR here is the lower-tail form: the mean of the worst `beta` fraction of
//! return mass, equal to the minimum of `E_Q[G]` over reweightings with
//! likelihood ratio at most `1/beta`. The textbook primal display
//! `min_eta { eta + E[(G - eta)^+] / (1 - beta) }` evaluates to an
//! upper-tail mean instead and is kept only as a diagnostic.

use ndarray::{Array1, Array2, Array3};
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{Mdp, MdpError, Policy, RegularizerKind};
use crate::scalar::Scalar;
use crate::solver::{solve_regularized_with_report, solve_unregularized, SolveError, SolveOptions};

/// Hard cap on distinct trajectory-tree leaves.
const LEAF_BUDGET: usize = 100_000;
/// Truncation tail mass target for non-absorbing branches.
const TAIL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("trajectory tree exceeded the {LEAF_BUDGET}-leaf budget")]
    BudgetExceeded,
    #[error("return distribution invalid: probabilities sum to {sum}")]
    InvalidDistribution { sum: f64 },
    #[error("infeasible counterexample parameters: {reason}")]
    InfeasibleParams { reason: String },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Discrete distribution of total discounted return.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnDistribution<F> {
    /// `(return value, probability)` pairs, sorted ascending by value.
    pub atoms: Vec<(F, F)>,
}

impl<F: Scalar> ReturnDistribution<F> {
    pub fn new(mut atoms: Vec<(F, F)>) -> Result<Self, RiskError> {
        atoms.retain(|&(_, p)| p > F::zero());
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite returns"));
        // Merge equal-value atoms.
        let mut merged: Vec<(F, F)> = Vec::with_capacity(atoms.len());
        for (value, prob) in atoms {
            match merged.last_mut() {
                Some((v, p))
                    if (value - *v).abs()
                        <= F::cast(1e-9) * F::one().max(value.abs()) =>
                {
                    *p += prob;
                }
                _ => merged.push((value, prob)),
            }
        }
        let sum: F = merged.iter().map(|&(_, p)| p).sum();
        if (sum - F::one()).abs() > F::cast(1e-10) {
            return Err(RiskError::InvalidDistribution { sum: sum.as_f64() });
        }
        Ok(Self { atoms: merged })
    }

    pub fn mean(&self) -> F {
        self.atoms.iter().map(|&(v, p)| v * p).sum()
    }
}

/// Lower-tail CVaR: mean of the worst `beta` fraction of the return mass,
/// splitting the marginal atom. `beta` must lie in (0, 1).
pub fn cvar<F: Scalar>(dist: &ReturnDistribution<F>, beta: F) -> F {
    assert!(
        beta > F::zero() && beta < F::one(),
        "beta must lie in (0, 1)"
    );
    let mut budget = beta;
    let mut acc = F::zero();
    for &(value, prob) in &dist.atoms {
        let take = prob.min(budget);
        acc += value * take;
        budget -= take;
        if budget <= F::zero() {
            break;
        }
    }
    acc / beta
}

/// The preliminaries-style display `min_eta { eta + E[(G-eta)^+]/(1-beta) }`.
/// Evaluates to the mean of the best `1 - beta` fraction (an upper-tail
/// quantity); shipped as a diagnostic, not as the canonical CVaR.
pub fn cvar_primal_display<F: Scalar>(dist: &ReturnDistribution<F>, beta: F) -> F {
    assert!(beta > F::zero() && beta < F::one());
    let mut best = F::infinity();
    for &(eta, _) in &dist.atoms {
        let plus: F = dist
            .atoms
            .iter()
            .map(|&(v, p)| p * (v - eta).max(F::zero()))
            .sum();
        best = best.min(eta + plus / (F::one() - beta));
    }
    best
}

/// Exact pushforward of `(mdp, policy)` to total discounted return.
///
/// Absorbing states whose supported actions share one reward are collapsed
/// analytically; other branches are truncated once the remaining tail mass
/// drops below 1e-8. Trees beyond the leaf budget are an error.
pub fn return_distribution<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
) -> Result<ReturnDistribution<F>, RiskError> {
    crate::mdp::check_compatible(mdp, policy)?;
    let gamma = mdp.discount();
    let r_max = mdp
        .reward()
        .iter()
        .fold(F::zero(), |acc, &r| acc.max(r.abs()))
        .max(F::cast(1e-30));
    // gamma^T r_max / (1-gamma) < TAIL_TOL
    let horizon = if gamma == F::zero() {
        1
    } else {
        let t = ((F::cast(TAIL_TOL) * (F::one() - gamma) / r_max).ln() / gamma.ln())
            .ceil()
            .as_f64();
        (t.max(1.0) as usize).max(1)
    };

    struct Node<F> {
        state: usize,
        prob: F,
        acc: F,
        discount: F,
        depth: usize,
    }
    let mut stack: Vec<Node<F>> = Vec::new();
    for s in 0..mdp.n_states() {
        let p = mdp.initial_dist()[s];
        if p > F::zero() {
            stack.push(Node { state: s, prob: p, acc: F::zero(), discount: F::one(), depth: 0 });
        }
    }
    let mut atoms: Vec<(F, F)> = Vec::new();
    let mut expanded = 0usize;
    while let Some(node) = stack.pop() {
        expanded += 1;
        if expanded > LEAF_BUDGET {
            return Err(RiskError::BudgetExceeded);
        }
        let s = node.state;
        if let Some(step_reward) = absorbing_reward(mdp, policy, s) {
            let tail = node.discount * step_reward / (F::one() - gamma);
            atoms.push((node.acc + tail, node.prob));
            continue;
        }
        if node.depth >= horizon {
            atoms.push((node.acc, node.prob));
            continue;
        }
        for a in 0..mdp.n_actions() {
            let pa = policy.probs()[[s, a]];
            if pa <= F::zero() {
                continue;
            }
            let acc = node.acc + node.discount * mdp.reward()[[s, a]];
            for s2 in 0..mdp.n_states() {
                let pt = mdp.kernel()[[s, a, s2]];
                if pt <= F::zero() {
                    continue;
                }
                stack.push(Node {
                    state: s2,
                    prob: node.prob * pa * pt,
                    acc,
                    discount: node.discount * gamma,
                    depth: node.depth + 1,
                });
                if stack.len() + atoms.len() > LEAF_BUDGET {
                    return Err(RiskError::BudgetExceeded);
                }
            }
        }
    }
    ReturnDistribution::new(atoms)
}

/// Per-step reward if `state` is absorbing under every supported action and
/// all those actions pay the same reward.
fn absorbing_reward<F: Scalar>(mdp: &Mdp<F>, policy: &Policy<F>, state: usize) -> Option<F> {
    let close = F::cast(1e-12);
    let mut reward: Option<F> = None;
    for a in 0..mdp.n_actions() {
        if policy.probs()[[state, a]] <= F::zero() {
            continue;
        }
        if (mdp.kernel()[[state, a, state]] - F::one()).abs() > close {
            return None;
        }
        let r = mdp.reward()[[state, a]];
        match reward {
            None => reward = Some(r),
            Some(r0) if (r - r0).abs() > close => return None,
            _ => {}
        }
    }
    reward
}

/// Parameters of the risk-aversion counterexample family.
///
/// The MDP has two branches from the start state: a deterministic branch
/// worth `r1 = r`, and a risky branch with expected value `r - eps_gap`
/// whose downside is calibrated so the regularized policy loses at least
/// `m` of CVaR at level `beta`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CounterexampleParams<F> {
    /// Target CVaR gap.
    pub m: F,
    /// Regularization temperature used when verifying.
    pub alpha: F,
    /// CVaR level in (0, 1).
    pub beta: F,
    /// Deterministic-branch return, positive.
    pub r: F,
    /// Expected-return edge of the deterministic branch, small and positive.
    pub eps_gap: F,
    pub gamma: F,
}

impl<F: Scalar> CounterexampleParams<F> {
    pub fn canonical() -> Self {
        Self {
            m: F::cast(10.0),
            alpha: F::one(),
            beta: F::cast(0.5),
            r: F::one(),
            eps_gap: F::cast(0.01),
            gamma: F::cast(0.9),
        }
    }
}

/// The constructed MDP plus everything needed to check it.
#[derive(Debug, Clone)]
pub struct Counterexample<F> {
    pub mdp: Mdp<F>,
    /// Branch probability of the risky low return.
    pub p: F,
    /// Absorbing returns of the three terminal states.
    pub r1: F,
    pub r3: F,
    pub r4: F,
    /// CVaR gap predicted at the anticipated `q`.
    pub expected_gap: F,
}

/// Build the five-state counterexample for an anticipated regularized
/// branch probability `q = pi_reg(a1 | s0)`.
pub fn build_counterexample<F: Scalar>(
    params: &CounterexampleParams<F>,
    q: F,
) -> Result<Counterexample<F>, RiskError> {
    let CounterexampleParams { m, beta, r, eps_gap, gamma, .. } = *params;
    if !(beta > F::zero() && beta < F::one()) {
        return Err(RiskError::InfeasibleParams { reason: format!("beta = {beta} outside (0,1)") });
    }
    if !(q > F::zero() && q < F::one()) {
        return Err(RiskError::InfeasibleParams { reason: format!("q = {q} outside (0,1)") });
    }
    if !(gamma > F::zero() && gamma < F::one()) {
        return Err(RiskError::InfeasibleParams {
            reason: format!("gamma = {gamma} outside (0,1); terminal rewards divide by gamma"),
        });
    }
    if !(r > F::zero()) {
        return Err(RiskError::InfeasibleParams { reason: format!("r = {r} must be positive") });
    }
    if !(m > F::zero()) {
        return Err(RiskError::InfeasibleParams { reason: format!("m = {m} must be positive") });
    }
    if !(eps_gap > F::zero()) || eps_gap >= r {
        return Err(RiskError::InfeasibleParams {
            reason: format!("eps_gap = {eps_gap} must lie in (0, r); r = {r}"),
        });
    }
    // Choose p with (1-q) p + q >= beta.
    let half = F::cast(0.5);
    let p = if q >= beta {
        half
    } else {
        let lo = (beta - q) / (F::one() - q);
        (lo + F::one()) * half
    };
    if !(p > F::zero() && p < F::one()) {
        return Err(RiskError::InfeasibleParams { reason: format!("no valid branch probability, got p = {p}") });
    }
    // Worst-branch return at its feasibility edge, then the balancing return.
    let r3 = beta * (-m - r) / (p * (F::one() - q)) + r;
    let r4 = (r - eps_gap - p * r3) / (F::one() - p);
    let r1 = r;

    // States: 0 start, 1 deterministic terminal, 2 risky fork, 3 low, 4 high.
    let n_states = 5;
    let n_actions = 2;
    let mut kernel = Array3::zeros((n_states, n_actions, n_states));
    kernel[[0, 0, 1]] = F::one();
    kernel[[0, 1, 2]] = F::one();
    for a in 0..n_actions {
        kernel[[1, a, 1]] = F::one();
        kernel[[2, a, 3]] = p;
        kernel[[2, a, 4]] = F::one() - p;
        kernel[[3, a, 3]] = F::one();
        kernel[[4, a, 4]] = F::one();
    }
    let mut reward = Array2::zeros((n_states, n_actions));
    let scale1 = r1 * (F::one() - gamma) / gamma;
    let scale34 = (F::one() - gamma) / (gamma * gamma);
    for a in 0..n_actions {
        reward[[1, a]] = scale1;
        reward[[3, a]] = r3 * scale34;
        reward[[4, a]] = r4 * scale34;
    }
    let mut initial = Array1::zeros(n_states);
    initial[0] = F::one();
    let mdp = Mdp::new(kernel, reward, gamma, initial)?;

    let anticipated = ReturnDistribution::new(vec![
        (r1, q),
        (r3, (F::one() - q) * p),
        (r4, (F::one() - q) * (F::one() - p)),
    ])?;
    let expected_gap = r - cvar(&anticipated, beta);
    Ok(Counterexample { mdp, p, r1, r3, r4, expected_gap })
}

/// Outcome of solving both policies on a counterexample MDP and comparing
/// their exact CVaRs.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport<F> {
    pub cvar_unregularized: F,
    pub cvar_regularized: F,
    pub gap: F,
    /// Solved `pi_reg(a1 | s0)`.
    pub realized_q: F,
    pub target_m: F,
    pub meets_target: bool,
}

/// Solve the unregularized and regularized policies, push both through the
/// exact return distribution, and report the CVaR gap and realized `q`.
pub fn verify_gap<F: Scalar>(
    mdp: &Mdp<F>,
    params: &CounterexampleParams<F>,
    reg: RegularizerKind,
) -> Result<GapReport<F>, RiskError> {
    let pi_star = solve_unregularized(mdp)?;
    let opts = SolveOptions::new(reg, params.alpha);
    let (pi_reg, _, _) = solve_regularized_with_report(mdp, &opts)?;
    let dist_star = return_distribution(mdp, &pi_star)?;
    let dist_reg = return_distribution(mdp, &pi_reg)?;
    let cvar_unregularized = cvar(&dist_star, params.beta);
    let cvar_regularized = cvar(&dist_reg, params.beta);
    let gap = cvar_unregularized - cvar_regularized;
    Ok(GapReport {
        cvar_unregularized,
        cvar_regularized,
        gap,
        realized_q: pi_reg.probs()[[0, 0]],
        target_m: params.m,
        meets_target: gap >= params.m,
    })
}
