//! Optimal policies for plain and entropy-regularized objectives.
//!
//! The unregularized objective is solved by value iteration. The regularized
//! objectives are maximized directly in occupancy space: all three entropy
//! regularizers are concave in the occupancy, so a single conditional-gradient
//! scheme over the Bellman-flow polytope covers them. The linear subproblem of
//! each iteration is itself an MDP solved by value iteration, iterates stay
//! feasible as convex combinations of vertex occupancies, and the
//! Frank-Wolfe gap at exit certifies the objective is within tolerance of
//! the maximum.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::mdp::{compute_occupancy, return_of, Mdp, MdpError, Occupancy, Policy, RegularizerKind};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("value iteration did not converge within {max_iterations} iterations")]
    ValueIterationDiverged { max_iterations: usize },
    #[error("occupancy optimization stopped after {iterations} iterations with gap {gap} > tolerance {tolerance}")]
    NonConvergence { iterations: usize, gap: f64, tolerance: f64 },
    #[error("alpha must be positive for a regularized solve, got {alpha}")]
    NonPositiveAlpha { alpha: f64 },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Stopping rule and objective selection for [`solve_regularized`].
#[derive(Debug, Clone)]
pub struct SolveOptions<F> {
    /// Certified objective-gap stop.
    pub tolerance: F,
    pub max_iterations: usize,
    pub regularizer: RegularizerKind,
    pub alpha: F,
}

impl<F: Scalar> SolveOptions<F> {
    pub fn new(regularizer: RegularizerKind, alpha: F) -> Self {
        Self {
            tolerance: F::cast(1e-8),
            max_iterations: 100_000,
            regularizer,
            alpha,
        }
    }

    pub fn with_tolerance(mut self, tolerance: F) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// Convergence certificate of a regularized solve.
#[derive(Debug, Clone)]
pub struct SolveReport<F> {
    pub objective: F,
    /// Frank-Wolfe duality gap at exit; the optimum is within this of `objective`.
    pub gap: F,
    pub iterations: usize,
    pub vertices: usize,
    /// Objective value at the start of every outer iteration.
    pub objective_trace: Vec<F>,
}

/// Greedy value iteration; returns the optimal deterministic policy.
pub fn solve_unregularized<F: Scalar>(mdp: &Mdp<F>) -> Result<Policy<F>, SolveError> {
    let (_, actions) = value_iteration(mdp, mdp.reward(), F::cast(1e-12), 10_000_000)?;
    Ok(Policy::deterministic(mdp.n_actions(), &actions))
}

/// Value iteration under an arbitrary reward table. Returns the fixed point
/// and the greedy action per state (ties to the lowest action index).
pub fn value_iteration<F: Scalar>(
    mdp: &Mdp<F>,
    reward: &Array2<F>,
    tolerance: F,
    max_iterations: usize,
) -> Result<(Array1<F>, Vec<usize>), SolveError> {
    let n = mdp.n_states();
    let gamma = mdp.discount();
    let scale = reward
        .iter()
        .fold(F::one(), |acc, &r| acc.max(r.abs()));
    let stop = tolerance * scale;
    let mut values = Array1::<F>::zeros(n);
    let mut actions = vec![0usize; n];
    for _ in 0..max_iterations {
        let mut residual = F::zero();
        let mut next = Array1::<F>::zeros(n);
        for s in 0..n {
            let mut best = F::neg_infinity();
            let mut best_a = 0;
            for a in 0..mdp.n_actions() {
                let mut q = reward[[s, a]];
                for s2 in 0..n {
                    let p = mdp.kernel()[[s, a, s2]];
                    if p > F::zero() {
                        q += gamma * p * values[s2];
                    }
                }
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            residual = residual.max((best - values[s]).abs());
            next[s] = best;
            actions[s] = best_a;
        }
        values = next;
        if residual <= stop {
            return Ok((values, actions));
        }
    }
    Err(SolveError::ValueIterationDiverged { max_iterations })
}

/// Maximize `E_rho[r] + alpha * H` over the Bellman-flow polytope and recover
/// the policy from the optimizing occupancy.
pub fn solve_regularized<F: Scalar>(mdp: &Mdp<F>, opts: &SolveOptions<F>) -> Result<Policy<F>, SolveError> {
    solve_regularized_with_report(mdp, opts).map(|(policy, _, _)| policy)
}

/// As [`solve_regularized`], also returning the optimizing occupancy and the
/// convergence certificate.
pub fn solve_regularized_with_report<F: Scalar>(
    mdp: &Mdp<F>,
    opts: &SolveOptions<F>,
) -> Result<(Policy<F>, Occupancy<F>, SolveReport<F>), SolveError> {
    if !(opts.alpha > F::zero()) {
        return Err(SolveError::NonPositiveAlpha { alpha: opts.alpha.as_f64() });
    }
    let mut fw = FrankWolfe::new(mdp, opts.regularizer, opts.alpha)?;
    let mut inner_tol = opts.tolerance;
    let mut gap = F::infinity();
    let mut objective_trace = Vec::new();
    for iter in 0..opts.max_iterations {
        objective_trace.push(fw.objective());
        let grad = fw.gradient();
        let (vertex_actions, vertex_occ) = fw.linear_maximizer(&grad)?;
        gap = inner(&grad, vertex_occ.rho()) - inner(&grad, &fw.rho);
        if gap <= opts.tolerance {
            let occ = Occupancy::from_parts(fw.rho.clone(), F::one() - mdp.discount());
            let policy = occ.recover_policy();
            let report = SolveReport {
                objective: fw.objective(),
                gap: gap.max(F::zero()),
                iterations: iter,
                vertices: fw.atoms.len(),
                objective_trace,
            };
            return Ok((policy, occ, report));
        }
        inner_tol = inner_tol.min(gap * F::cast(0.05)).max(opts.tolerance * F::cast(0.25));
        fw.take_step(vertex_actions, vertex_occ, inner_tol);
    }
    Err(SolveError::NonConvergence {
        iterations: opts.max_iterations,
        gap: gap.as_f64(),
        tolerance: opts.tolerance.as_f64(),
    })
}

fn inner<F: Scalar>(a: &Array2<F>, b: &Array2<F>) -> F {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

/// Log clamped away from zero so entropy gradients stay finite; coordinates
/// that are identically zero for every feasible occupancy cancel in the gap.
fn safe_ln<F: Scalar>(x: F) -> F {
    x.max(F::min_positive_value()).ln()
}

struct FrankWolfe<'a, F> {
    mdp: &'a Mdp<F>,
    regularizer: RegularizerKind,
    alpha: F,
    /// Vertex occupancies found so far, keyed by their deterministic policy.
    atoms: Vec<(Vec<usize>, Array2<F>)>,
    weights: Vec<F>,
    rho: Array2<F>,
}

impl<'a, F: Scalar> FrankWolfe<'a, F> {
    fn new(mdp: &'a Mdp<F>, regularizer: RegularizerKind, alpha: F) -> Result<Self, SolveError> {
        let uniform = Policy::uniform(mdp.n_states(), mdp.n_actions());
        let occ = compute_occupancy(mdp, &uniform)?;
        let rho = occ.rho().clone();
        Ok(Self {
            mdp,
            regularizer,
            alpha,
            atoms: vec![(Vec::new(), rho.clone())],
            weights: vec![F::one()],
            rho,
        })
    }

    fn objective(&self) -> F {
        objective_of(self.mdp, &self.rho, self.regularizer, self.alpha)
    }

    fn gradient(&self) -> Array2<F> {
        gradient_of(self.mdp, &self.rho, self.regularizer, self.alpha)
    }

    fn linear_maximizer(&self, grad: &Array2<F>) -> Result<(Vec<usize>, Occupancy<F>), SolveError> {
        let (_, actions) = value_iteration(self.mdp, grad, F::cast(1e-13), 10_000_000)?;
        let policy = Policy::deterministic(self.mdp.n_actions(), &actions);
        let occ = compute_occupancy(self.mdp, &policy)?;
        Ok((actions, occ))
    }

    /// One Frank-Wolfe step toward `vertex` with exact line search, followed
    /// by a corrective pass over the weights of all stored vertices. Both
    /// phases only ever accept improvements, so the objective is monotone.
    fn take_step(&mut self, vertex_actions: Vec<usize>, vertex_occ: Occupancy<F>, inner_tol: F) {
        let vertex = vertex_occ.rho();
        let eta = self.line_search(vertex);
        if eta > F::zero() {
            for w in &mut self.weights {
                *w *= F::one() - eta;
            }
            if let Some(idx) = self.atoms.iter().position(|(acts, _)| *acts == vertex_actions) {
                self.weights[idx] += eta;
            } else {
                self.atoms.push((vertex_actions, vertex.clone()));
                self.weights.push(eta);
            }
            self.recombine();
        } else if !self.atoms.iter().any(|(acts, _)| *acts == vertex_actions) {
            self.atoms.push((vertex_actions, vertex.clone()));
            self.weights.push(F::zero());
        }
        self.correct_weights(inner_tol);
        self.prune();
    }

    /// Bisection on the directional derivative of the concave line function
    /// `eta -> f((1-eta) rho + eta v)`.
    fn line_search(&self, vertex: &Array2<F>) -> F {
        let deriv = |eta: F| -> F {
            let point = blend(&self.rho, vertex, eta);
            let grad = gradient_of(self.mdp, &point, self.regularizer, self.alpha);
            grad.iter()
                .zip(vertex.iter().zip(self.rho.iter()))
                .map(|(&g, (&v, &r))| g * (v - r))
                .sum()
        };
        if deriv(F::zero()) <= F::zero() {
            return F::zero();
        }
        if deriv(F::one()) >= F::zero() {
            return F::one();
        }
        let mut lo = F::zero();
        let mut hi = F::one();
        for _ in 0..70 {
            let mid = (lo + hi) / F::cast(2.0);
            if deriv(mid) > F::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Exponentiated-gradient ascent on the vertex weights with backtracking;
    /// stops when the restricted linearized gap falls below `inner_tol`.
    fn correct_weights(&mut self, inner_tol: F) {
        if self.atoms.len() < 2 {
            return;
        }
        let mut step = F::one();
        let mut current = self.objective();
        for _ in 0..4_000 {
            let grad = self.gradient();
            let scores: Vec<F> = self
                .atoms
                .iter()
                .map(|(_, occ)| inner(&grad, occ))
                .collect();
            let avg = scores
                .iter()
                .zip(&self.weights)
                .map(|(&s, &w)| s * w)
                .sum::<F>();
            let best = scores.iter().copied().fold(F::neg_infinity(), F::max);
            if best - avg <= inner_tol {
                break;
            }
            // Backtracked multiplicative update.
            let mut accepted = false;
            for _ in 0..60 {
                let trial = reweight(&self.weights, &scores, step);
                let rho = combine(&self.atoms, &trial, self.rho.dim());
                let value = objective_of(self.mdp, &rho, self.regularizer, self.alpha);
                if value >= current {
                    self.weights = trial;
                    self.rho = rho;
                    current = value;
                    accepted = true;
                    step = (step * F::cast(1.5)).min(F::cast(1e6));
                    break;
                }
                step *= F::cast(0.5);
            }
            if !accepted {
                break;
            }
        }
    }

    fn recombine(&mut self) {
        self.rho = combine(&self.atoms, &self.weights, self.rho.dim());
    }

    fn prune(&mut self) {
        let floor = F::cast(1e-16);
        let mut idx = 0;
        while idx < self.weights.len() {
            if self.weights[idx] < floor && self.weights.len() > 1 {
                self.weights.remove(idx);
                self.atoms.remove(idx);
            } else {
                idx += 1;
            }
        }
        let total: F = self.weights.iter().copied().sum();
        for w in &mut self.weights {
            *w /= total;
        }
        self.recombine();
    }
}

fn blend<F: Scalar>(a: &Array2<F>, b: &Array2<F>, eta: F) -> Array2<F> {
    let mut out = a.clone();
    out.zip_mut_with(b, |x, &y| *x = (F::one() - eta) * *x + eta * y);
    out
}

fn reweight<F: Scalar>(weights: &[F], scores: &[F], step: F) -> Vec<F> {
    let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
    let mut out: Vec<F> = weights
        .iter()
        .zip(scores)
        .map(|(&w, &s)| w * ((s - max) * step).exp())
        .collect();
    let total: F = out.iter().copied().sum();
    for w in &mut out {
        *w /= total;
    }
    out
}

fn combine<F: Scalar>(atoms: &[(Vec<usize>, Array2<F>)], weights: &[F], dim: (usize, usize)) -> Array2<F> {
    let mut out = Array2::zeros(dim);
    for ((_, occ), &w) in atoms.iter().zip(weights) {
        if w > F::zero() {
            out.zip_mut_with(occ, |x, &y| *x += w * y);
        }
    }
    out
}

/// `E_rho[r] + alpha * H` evaluated on a raw occupancy table.
pub fn objective_of<F: Scalar>(mdp: &Mdp<F>, rho: &Array2<F>, reg: RegularizerKind, alpha: F) -> F {
    let occ = Occupancy::from_parts(rho.clone(), F::one() - mdp.discount());
    let base = return_of(mdp, &occ);
    let bonus = match reg {
        RegularizerKind::State => occ.state_entropy(),
        RegularizerKind::StateAction => occ.state_action_entropy(),
        RegularizerKind::Policy => occ.state_action_entropy() - occ.state_entropy(),
    };
    base + alpha * bonus
}

fn gradient_of<F: Scalar>(mdp: &Mdp<F>, rho: &Array2<F>, reg: RegularizerKind, alpha: F) -> Array2<F> {
    let (n_states, n_actions) = rho.dim();
    let mut grad = mdp.reward().clone();
    match reg {
        RegularizerKind::State => {
            for s in 0..n_states {
                let d: F = (0..n_actions).map(|a| rho[[s, a]]).sum();
                let term = alpha * (safe_ln(d) + F::one());
                for a in 0..n_actions {
                    grad[[s, a]] -= term;
                }
            }
        }
        RegularizerKind::StateAction => {
            for s in 0..n_states {
                for a in 0..n_actions {
                    grad[[s, a]] -= alpha * (safe_ln(rho[[s, a]]) + F::one());
                }
            }
        }
        RegularizerKind::Policy => {
            for s in 0..n_states {
                let d: F = (0..n_actions).map(|a| rho[[s, a]]).sum();
                for a in 0..n_actions {
                    grad[[s, a]] -= alpha * (safe_ln(rho[[s, a]]) - safe_ln(d));
                }
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::expected_return;
    use approx::assert_abs_diff_eq;
    use ndarray::{Array1, Array3};

    fn bandit(rewards: &[f64]) -> Mdp<f64> {
        let a = rewards.len();
        let mut kernel = Array3::zeros((1, a, 1));
        for i in 0..a {
            kernel[[0, i, 0]] = 1.0;
        }
        let reward = Array2::from_shape_vec((1, a), rewards.to_vec()).unwrap();
        let initial = Array1::from_vec(vec![1.0]);
        Mdp::new(kernel, reward, 0.5, initial).unwrap()
    }

    #[test]
    fn value_iteration_picks_the_better_arm() {
        let mdp = bandit(&[0.0, 1.0]);
        let policy = solve_unregularized(&mdp).unwrap();
        assert_eq!(policy.greedy_actions(), vec![1]);
    }

    #[test]
    fn unregularized_solve_matches_policy_enumeration() {
        let mut rng = crate::test_rng(23);
        for trial in 0..5 {
            let mdp = Mdp::<f64>::random(6, 2, 0.9, (-1.0, 1.0), &mut rng);
            let solved = solve_unregularized(&mdp).unwrap();
            let best = expected_return(&mdp, &solved).unwrap();
            // Exhaustive search over all deterministic policies.
            let mut brute = f64::NEG_INFINITY;
            for code in 0..(2usize.pow(6)) {
                let actions: Vec<usize> = (0..6).map(|s| (code >> s) & 1).collect();
                let policy = Policy::deterministic(2, &actions);
                brute = brute.max(expected_return(&mdp, &policy).unwrap());
            }
            assert!(
                best >= brute - 1e-8,
                "trial {trial}: value iteration {best} below brute force {brute}"
            );
        }
    }

    #[test]
    fn pure_policy_entropy_yields_uniform_policy() {
        let mdp = bandit(&[0.0, 0.0]);
        let opts = SolveOptions::new(RegularizerKind::Policy, 1.0);
        let (policy, _, report) = solve_regularized_with_report(&mdp, &opts).unwrap();
        assert_abs_diff_eq!(policy.probs()[[0, 0]], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(report.objective, 2.0f64.ln(), epsilon = 1e-8);
    }

    #[test]
    fn vanishing_alpha_recovers_unregularized_value() {
        let mut rng = crate::test_rng(41);
        let mdp = Mdp::<f64>::random(4, 2, 0.85, (0.0, 1.0), &mut rng);
        let plain = expected_return(&mdp, &solve_unregularized(&mdp).unwrap()).unwrap();
        for reg in RegularizerKind::ALL {
            let opts = SolveOptions::new(reg, 1e-8).with_tolerance(1e-7);
            let (_, _, report) = solve_regularized_with_report(&mdp, &opts).unwrap();
            assert!(
                (report.objective - plain).abs() < 1e-6,
                "{reg:?}: {} vs {plain}",
                report.objective
            );
        }
    }

    #[test]
    fn regularized_solution_beats_random_and_greedy_policies() {
        let mut rng = crate::test_rng(59);
        let mdp = Mdp::<f64>::random(5, 3, 0.9, (-0.5, 1.0), &mut rng);
        for reg in RegularizerKind::ALL {
            let opts = SolveOptions::new(reg, 0.3).with_tolerance(1e-8);
            let (_, _, report) = solve_regularized_with_report(&mdp, &opts).unwrap();
            let greedy = solve_unregularized(&mdp).unwrap();
            let greedy_value = crate::mdp::regularized_return(&mdp, &greedy, reg, 0.3).unwrap();
            assert!(report.objective >= greedy_value - 1e-7);
            for _ in 0..100 {
                let candidate = Policy::random(5, 3, &mut rng);
                let value = crate::mdp::regularized_return(&mdp, &candidate, reg, 0.3).unwrap();
                assert!(report.objective >= value - 1e-7, "{reg:?}: beaten by random policy");
            }
        }
    }

    #[test]
    fn recovered_policy_reproduces_the_optimizing_occupancy() {
        let mut rng = crate::test_rng(61);
        let mdp = Mdp::<f64>::random(5, 2, 0.9, (0.0, 1.0), &mut rng);
        let opts = SolveOptions::new(RegularizerKind::State, 0.5);
        let (policy, occ, _) = solve_regularized_with_report(&mdp, &opts).unwrap();
        let redone = compute_occupancy(&mdp, &policy).unwrap();
        let tv: f64 = occ
            .rho()
            .iter()
            .zip(redone.rho().iter())
            .map(|(&a, &b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1e-6, "total variation {tv}");
    }
}
