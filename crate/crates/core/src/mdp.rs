//! Tabular MDP primitives: occupancy measures, returns and entropy objectives.
//!
//! Occupancies are normalized by `1 - gamma` so that both the state-action
//! occupancy and its state marginal are probability distributions; the
//! conventional discounted return is `expected_return / (1 - gamma)`.

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{entropy_unchecked, xlogx, Scalar};

/// Row-sum tolerance for kernels, policies and the initial distribution.
const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance of the linear/iterative occupancy solve.
const OCCUPANCY_TOL: f64 = 1e-10;
/// Above this many state-action pairs the occupancy solve switches from a
/// direct LU factorization to power iteration.
const DIRECT_SOLVE_LIMIT: usize = 10_000;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("kernel row ({state}, {action}) sums to {sum}, expected 1")]
    KernelRowSum { state: usize, action: usize, sum: f64 },
    #[error("initial distribution sums to {sum}, expected 1")]
    InitialDistSum { sum: f64 },
    #[error("negative probability entry in {context}")]
    NegativeProbability { context: &'static str },
    #[error("discount must lie in [0, 1), got {discount}")]
    InvalidDiscount { discount: f64 },
    #[error("policy row for state {state} sums to {sum}, expected 1")]
    PolicyRowSum { state: usize, sum: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("distribution sums to {sum}, more than 1e-6 away from 1")]
    InvalidDistribution { sum: f64 },
    #[error("occupancy flow system is numerically singular; inputs violate invariants")]
    SingularFlowSystem,
}

/// Which entropy augments the return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    /// Expected action entropy `E_d[H(pi_s)]`.
    Policy,
    /// State-marginal entropy `H(d)`.
    State,
    /// Joint occupancy entropy `H(rho)`.
    StateAction,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 3] = [
        RegularizerKind::Policy,
        RegularizerKind::State,
        RegularizerKind::StateAction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::Policy => "policy",
            RegularizerKind::State => "state",
            RegularizerKind::StateAction => "state_action",
        }
    }
}

impl std::str::FromStr for RegularizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "policy" => Ok(RegularizerKind::Policy),
            "state" => Ok(RegularizerKind::State),
            "state_action" | "state-action" => Ok(RegularizerKind::StateAction),
            other => Err(format!("unknown regularizer kind `{other}`")),
        }
    }
}

/// A finite discounted MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp<F> {
    n_states: usize,
    n_actions: usize,
    /// `kernel[[s, a, s2]] = P(s2 | s, a)`.
    kernel: Array3<F>,
    /// `reward[[s, a]]`.
    reward: Array2<F>,
    discount: F,
    initial_dist: Array1<F>,
}

impl<F: Scalar> Mdp<F> {
    pub fn new(
        kernel: Array3<F>,
        reward: Array2<F>,
        discount: F,
        initial_dist: Array1<F>,
    ) -> Result<Self, MdpError> {
        let (n_states, n_actions, n_next) = kernel.dim();
        if n_next != n_states {
            return Err(MdpError::DimensionMismatch {
                context: format!("kernel is {n_states}x{n_actions}x{n_next}"),
            });
        }
        if reward.dim() != (n_states, n_actions) {
            return Err(MdpError::DimensionMismatch {
                context: format!("reward is {:?}, kernel is {n_states}x{n_actions}", reward.dim()),
            });
        }
        if initial_dist.len() != n_states {
            return Err(MdpError::DimensionMismatch {
                context: format!("initial_dist has {} entries for {n_states} states", initial_dist.len()),
            });
        }
        if !(discount >= F::zero() && discount < F::one()) {
            return Err(MdpError::InvalidDiscount { discount: discount.as_f64() });
        }
        let tol = F::cast(ROW_SUM_TOL);
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = kernel.slice(ndarray::s![s, a, ..]);
                if row.iter().any(|&p| p < F::zero()) {
                    return Err(MdpError::NegativeProbability { context: "kernel" });
                }
                let sum = row.sum();
                if (sum - F::one()).abs() > tol {
                    return Err(MdpError::KernelRowSum { state: s, action: a, sum: sum.as_f64() });
                }
            }
        }
        if initial_dist.iter().any(|&p| p < F::zero()) {
            return Err(MdpError::NegativeProbability { context: "initial_dist" });
        }
        let mu_sum = initial_dist.sum();
        if (mu_sum - F::one()).abs() > tol {
            return Err(MdpError::InitialDistSum { sum: mu_sum.as_f64() });
        }
        Ok(Self { n_states, n_actions, kernel, reward, discount, initial_dist })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn kernel(&self) -> &Array3<F> {
        &self.kernel
    }

    pub fn reward(&self) -> &Array2<F> {
        &self.reward
    }

    pub fn discount(&self) -> F {
        self.discount
    }

    pub fn initial_dist(&self) -> &Array1<F> {
        &self.initial_dist
    }

    /// Same dynamics and discount, different reward table.
    pub fn with_reward(&self, reward: Array2<F>) -> Result<Self, MdpError> {
        Self::new(self.kernel.clone(), reward, self.discount, self.initial_dist.clone())
    }

    /// Same reward and discount, different transition kernel.
    pub fn with_kernel(&self, kernel: Array3<F>) -> Result<Self, MdpError> {
        Self::new(kernel, self.reward.clone(), self.discount, self.initial_dist.clone())
    }

    /// State transition matrix of the Markov chain induced by `policy`:
    /// `P_pi[[s, s2]] = sum_a pi(a|s) P(s2|s, a)`.
    pub fn policy_kernel(&self, policy: &Policy<F>) -> Array2<F> {
        let mut out = Array2::zeros((self.n_states, self.n_states));
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let w = policy.probs()[[s, a]];
                if w == F::zero() {
                    continue;
                }
                for s2 in 0..self.n_states {
                    out[[s, s2]] += w * self.kernel[[s, a, s2]];
                }
            }
        }
        out
    }

    /// Expected one-step reward per state under `policy`.
    pub fn policy_reward(&self, policy: &Policy<F>) -> Array1<F> {
        let mut out = Array1::zeros(self.n_states);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out[s] += policy.probs()[[s, a]] * self.reward[[s, a]];
            }
        }
        out
    }

    /// Uniformly random MDP: Dirichlet(1) kernel rows, rewards uniform on
    /// `reward_range`, initial distribution Dirichlet(1).
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        discount: F,
        reward_range: (f64, f64),
        rng: &mut R,
    ) -> Self {
        let mut kernel = Array3::zeros((n_states, n_actions, n_states));
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = random_simplex(n_states, rng);
                for (s2, p) in row.into_iter().enumerate() {
                    kernel[[s, a, s2]] = p;
                }
            }
        }
        let (lo, hi) = reward_range;
        let reward = Array2::from_shape_fn((n_states, n_actions), |_| {
            F::cast(lo + (hi - lo) * rng.random::<f64>())
        });
        let initial_dist = Array1::from_vec(random_simplex(n_states, rng));
        Self::new(kernel, reward, discount, initial_dist).expect("random MDP is valid by construction")
    }
}

/// Exp(1)-normalized point on the probability simplex (a Dirichlet(1) sample).
pub(crate) fn random_simplex<F: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<F> {
    let mut weights: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights.into_iter().map(F::cast).collect()
}

/// A stationary stochastic policy, one action distribution per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<F> {
    probs: Array2<F>,
}

impl<F: Scalar> Policy<F> {
    pub fn new(probs: Array2<F>) -> Result<Self, MdpError> {
        let tol = F::cast(ROW_SUM_TOL);
        for (s, row) in probs.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|&p| p < F::zero()) {
                return Err(MdpError::NegativeProbability { context: "policy" });
            }
            let sum = row.sum();
            if (sum - F::one()).abs() > tol {
                return Err(MdpError::PolicyRowSum { state: s, sum: sum.as_f64() });
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = F::one() / F::cast(n_actions as f64);
        Self { probs: Array2::from_elem((n_states, n_actions), p) }
    }

    /// Deterministic policy from a per-state action index.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = Array2::zeros((actions.len(), n_actions));
        for (s, &a) in actions.iter().enumerate() {
            probs[[s, a]] = F::one();
        }
        Self { probs }
    }

    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs = Array2::zeros((n_states, n_actions));
        for s in 0..n_states {
            let row = random_simplex(n_actions, rng);
            for (a, p) in row.into_iter().enumerate() {
                probs[[s, a]] = p;
            }
        }
        Self { probs }
    }

    pub fn probs(&self) -> &Array2<F> {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    /// Expected action entropy per state.
    pub fn action_entropy(&self, state: usize) -> F {
        entropy_unchecked(self.probs.row(state).iter().copied())
    }

    /// Greedy action index per state (ties to the lowest index).
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.probs
            .axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                for (a, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }
}

/// Normalized discounted occupancy: `rho` sums to one, `d` is its state marginal.
#[derive(Debug, Clone)]
pub struct Occupancy<F> {
    rho: Array2<F>,
    state_marginal: Array1<F>,
    normalization: F,
}

impl<F: Scalar> Occupancy<F> {
    pub(crate) fn from_parts(rho: Array2<F>, normalization: F) -> Self {
        let state_marginal = rho.sum_axis(Axis(1));
        Self { rho, state_marginal, normalization }
    }

    /// `rho(s, a)`.
    pub fn rho(&self) -> &Array2<F> {
        &self.rho
    }

    /// `d(s) = sum_a rho(s, a)`.
    pub fn state_marginal(&self) -> &Array1<F> {
        &self.state_marginal
    }

    /// The `1 - gamma` factor that makes `rho` a probability distribution.
    pub fn normalization(&self) -> F {
        self.normalization
    }

    /// Entropy of the state marginal, `H(d)`.
    pub fn state_entropy(&self) -> F {
        entropy_unchecked(self.state_marginal.iter().copied())
    }

    /// Joint entropy of the occupancy, `H(rho)`.
    pub fn state_action_entropy(&self) -> F {
        entropy_unchecked(self.rho.iter().copied())
    }

    /// `E_d[H(pi_s)]`, the occupancy-weighted action entropy.
    pub fn expected_policy_entropy(&self, policy: &Policy<F>) -> F {
        self.state_marginal
            .iter()
            .enumerate()
            .map(|(s, &d)| d * policy.action_entropy(s))
            .sum()
    }

    /// Policy recovered as `pi(a|s) = rho(s,a) / d(s)`, uniform where `d(s)`
    /// carries no mass (below 1e-12).
    pub fn recover_policy(&self) -> Policy<F> {
        let (n_states, n_actions) = self.rho.dim();
        let floor = F::cast(1e-12);
        let uniform = F::one() / F::cast(n_actions as f64);
        let mut probs = Array2::zeros((n_states, n_actions));
        for s in 0..n_states {
            let d = self.state_marginal[s];
            if d < floor {
                probs.row_mut(s).fill(uniform);
            } else {
                let mut sum = F::zero();
                for a in 0..n_actions {
                    let p = (self.rho[[s, a]] / d).max(F::zero());
                    probs[[s, a]] = p;
                    sum += p;
                }
                for a in 0..n_actions {
                    probs[[s, a]] /= sum;
                }
            }
        }
        Policy { probs }
    }

    /// Max-norm residual of the Bellman flow identity
    /// `d(s) = (1-gamma) mu0(s) + gamma sum_{s',a'} P(s|s',a') rho(s',a')`.
    pub fn flow_residual(&self, mdp: &Mdp<F>) -> F {
        let mut worst = F::zero();
        for s in 0..mdp.n_states() {
            let mut inflow = (F::one() - mdp.discount()) * mdp.initial_dist()[s];
            for s2 in 0..mdp.n_states() {
                for a in 0..mdp.n_actions() {
                    inflow += mdp.discount() * mdp.kernel()[[s2, a, s]] * self.rho[[s2, a]];
                }
            }
            worst = worst.max((inflow - self.state_marginal[s]).abs());
        }
        worst
    }
}

/// Normalized occupancy of `policy` on `mdp`, solved from the Bellman flow
/// system: direct LU for small problems, power iteration for large ones.
pub fn compute_occupancy<F: Scalar>(mdp: &Mdp<F>, policy: &Policy<F>) -> Result<Occupancy<F>, MdpError> {
    check_compatible(mdp, policy)?;
    let p_pi = mdp.policy_kernel(policy);
    let gamma = mdp.discount();
    let n = mdp.n_states();
    let rhs: Vec<F> = mdp
        .initial_dist()
        .iter()
        .map(|&m| (F::one() - gamma) * m)
        .collect();

    let d = if n * mdp.n_actions() <= DIRECT_SOLVE_LIMIT {
        // Solve (I - gamma P_pi^T) d = (1-gamma) mu0.
        let mut mat = vec![F::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut v = -gamma * p_pi[[j, i]];
                if i == j {
                    v += F::one();
                }
                mat[i * n + j] = v;
            }
        }
        solve_dense(&mut mat, rhs, n)?
    } else {
        let tol = F::cast(OCCUPANCY_TOL) * (F::one() - gamma);
        let mut d = rhs.clone();
        let mut next = vec![F::zero(); n];
        loop {
            for (i, slot) in next.iter_mut().enumerate() {
                let mut acc = rhs[i];
                for j in 0..n {
                    acc += gamma * p_pi[[j, i]] * d[j];
                }
                *slot = acc;
            }
            let delta = d
                .iter()
                .zip(&next)
                .map(|(&a, &b)| (a - b).abs())
                .fold(F::zero(), F::max);
            std::mem::swap(&mut d, &mut next);
            if delta <= tol {
                break;
            }
        }
        d
    };

    let mut rho = Array2::zeros((n, mdp.n_actions()));
    for s in 0..n {
        let ds = d[s].max(F::zero());
        for a in 0..mdp.n_actions() {
            rho[[s, a]] = ds * policy.probs()[[s, a]];
        }
    }
    Ok(Occupancy::from_parts(rho, F::one() - gamma))
}

/// Normalized expected return `<rho, r>`; multiply by `1/(1-gamma)` for the
/// conventional discounted return.
pub fn expected_return<F: Scalar>(mdp: &Mdp<F>, policy: &Policy<F>) -> Result<F, MdpError> {
    let occ = compute_occupancy(mdp, policy)?;
    Ok(return_of(mdp, &occ))
}

/// `<rho, r>` for an already-computed occupancy.
pub fn return_of<F: Scalar>(mdp: &Mdp<F>, occupancy: &Occupancy<F>) -> F {
    occupancy
        .rho()
        .iter()
        .zip(mdp.reward().iter())
        .map(|(&p, &r)| p * r)
        .sum()
}

/// Shannon entropy (nats) of a probability vector; `0 log 0 = 0`.
pub fn entropy<F: Scalar>(dist: &[F]) -> Result<F, MdpError> {
    if dist.iter().any(|&p| p < F::zero()) {
        return Err(MdpError::NegativeProbability { context: "distribution" });
    }
    let sum: F = dist.iter().copied().sum();
    if (sum - F::one()).abs() > F::cast(1e-6) {
        return Err(MdpError::InvalidDistribution { sum: sum.as_f64() });
    }
    Ok(-dist.iter().map(|&p| xlogx(p)).sum::<F>())
}

/// `E_rho[r] + alpha * H` where `H` is the entropy picked by `reg`.
pub fn regularized_return<F: Scalar>(
    mdp: &Mdp<F>,
    policy: &Policy<F>,
    reg: RegularizerKind,
    alpha: F,
) -> Result<F, MdpError> {
    let occ = compute_occupancy(mdp, policy)?;
    let base = return_of(mdp, &occ);
    let bonus = match reg {
        RegularizerKind::Policy => occ.expected_policy_entropy(policy),
        RegularizerKind::State => occ.state_entropy(),
        RegularizerKind::StateAction => occ.state_action_entropy(),
    };
    Ok(base + alpha * bonus)
}

pub(crate) fn check_compatible<F: Scalar>(mdp: &Mdp<F>, policy: &Policy<F>) -> Result<(), MdpError> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(MdpError::DimensionMismatch {
            context: format!(
                "policy is {}x{}, MDP is {}x{}",
                policy.n_states(),
                policy.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            ),
        });
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting on a row-major dense system.
fn solve_dense<F: Scalar>(mat: &mut [F], mut rhs: Vec<F>, n: usize) -> Result<Vec<F>, MdpError> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if mat[row * n + col].abs() > mat[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if mat[pivot * n + col].abs() < F::cast(1e-14) {
            return Err(MdpError::SingularFlowSystem);
        }
        if pivot != col {
            for k in 0..n {
                mat.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let diag = mat[col * n + col];
        for row in col + 1..n {
            let factor = mat[row * n + col] / diag;
            if factor == F::zero() {
                continue;
            }
            for k in col..n {
                let v = mat[col * n + k];
                mat[row * n + k] -= factor * v;
            }
            let r = rhs[col];
            rhs[row] -= factor * r;
        }
    }
    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= mat[row * n + k] * x[k];
        }
        x[row] = acc / mat[row * n + row];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

/// Wire format: kernel as `[s][a][s']`, reward as `[s][a]`.
#[derive(Serialize, Deserialize)]
struct MdpJson<F> {
    n_states: usize,
    n_actions: usize,
    kernel: Vec<Vec<Vec<F>>>,
    reward: Vec<Vec<F>>,
    discount: F,
    initial_dist: Vec<F>,
}

impl<F: Scalar> Mdp<F> {
    pub fn to_json(&self) -> String {
        let doc = MdpJson {
            n_states: self.n_states,
            n_actions: self.n_actions,
            kernel: (0..self.n_states)
                .map(|s| {
                    (0..self.n_actions)
                        .map(|a| (0..self.n_states).map(|s2| self.kernel[[s, a, s2]]).collect())
                        .collect()
                })
                .collect(),
            reward: (0..self.n_states)
                .map(|s| (0..self.n_actions).map(|a| self.reward[[s, a]]).collect())
                .collect(),
            discount: self.discount,
            initial_dist: self.initial_dist.to_vec(),
        };
        serde_json::to_string_pretty(&doc).expect("MDP serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MdpJsonError> {
        let doc: MdpJson<F> = serde_json::from_str(text)?;
        let (s, a) = (doc.n_states, doc.n_actions);
        let mut kernel = Array3::zeros((s, a, s));
        if doc.kernel.len() != s {
            return Err(MdpJsonError::Shape("kernel outer length != n_states".into()));
        }
        for (i, per_action) in doc.kernel.into_iter().enumerate() {
            if per_action.len() != a {
                return Err(MdpJsonError::Shape(format!("kernel[{i}] length != n_actions")));
            }
            for (j, row) in per_action.into_iter().enumerate() {
                if row.len() != s {
                    return Err(MdpJsonError::Shape(format!("kernel[{i}][{j}] length != n_states")));
                }
                for (k, v) in row.into_iter().enumerate() {
                    kernel[[i, j, k]] = v;
                }
            }
        }
        let mut reward = Array2::zeros((s, a));
        if doc.reward.len() != s {
            return Err(MdpJsonError::Shape("reward outer length != n_states".into()));
        }
        for (i, row) in doc.reward.into_iter().enumerate() {
            if row.len() != a {
                return Err(MdpJsonError::Shape(format!("reward[{i}] length != n_actions")));
            }
            for (j, v) in row.into_iter().enumerate() {
                reward[[i, j]] = v;
            }
        }
        let initial_dist = Array1::from_vec(doc.initial_dist);
        Ok(Self::new(kernel, reward, doc.discount, initial_dist)?)
    }
}

#[derive(Debug, Error)]
pub enum MdpJsonError {
    #[error("malformed MDP JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed MDP JSON: {0}")]
    Shape(String),
    #[error(transparent)]
    Invalid(#[from] MdpError),
}

// ---------------------------------------------------------------------------

/// Policy wire format.
#[derive(Serialize, Deserialize)]
struct PolicyJson<F> {
    probs: Vec<Vec<F>>,
}

impl<F: Scalar> Policy<F> {
    pub fn to_json(&self) -> String {
        let doc = PolicyJson {
            probs: self
                .probs
                .axis_iter(Axis(0))
                .map(|row| row.to_vec())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MdpJsonError> {
        let doc: PolicyJson<F> = serde_json::from_str(text)?;
        let rows = doc.probs.len();
        let cols = doc.probs.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(MdpJsonError::Shape("empty policy".into()));
        }
        let mut probs = Array2::zeros((rows, cols));
        for (s, row) in doc.probs.into_iter().enumerate() {
            if row.len() != cols {
                return Err(MdpJsonError::Shape(format!("ragged policy row {s}")));
            }
            for (a, v) in row.into_iter().enumerate() {
                probs[[s, a]] = v;
            }
        }
        Ok(Self::new(probs)?)
    }
}

// ---------------------------------------------------------------------------

/// Two-state deterministic cycle `s0 -> s1 -> s0`, one action.
pub fn two_state_cycle<F: Scalar>(discount: F, rewards: [F; 2]) -> Mdp<F> {
    let mut kernel = Array3::zeros((2, 1, 2));
    kernel[[0, 0, 1]] = F::one();
    kernel[[1, 0, 0]] = F::one();
    let mut reward = Array2::zeros((2, 1));
    reward[[0, 0]] = rewards[0];
    reward[[1, 0]] = rewards[1];
    let initial = Array1::from_vec(vec![F::one(), F::zero()]);
    Mdp::new(kernel, reward, discount, initial).expect("cycle MDP is valid")
}
