//! Rollout-based training: a tabular softmax actor-critic whose reward
//! stream mixes the task reward with the k-NN state-entropy bonus, plus an
//! optional policy-entropy loss bonus.
//!
//! The trainer works on any tabular MDP; the state-entropy bonus needs a
//! per-state feature table (the gridworld supplies `(x, y)` coordinates).
//! Episodes terminate on absorbing zero-reward states (gridworld goals) or
//! at the horizon. Everything is driven by one seeded RNG, so identical
//! configs produce identical policies.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{intrinsic_reward, total_reward, FeatureBatch, TemperatureSchedule};
use crate::mdp::{Mdp, MdpError, Policy};
use crate::scalar::{entropy_unchecked, Scalar};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at update {update}: non-finite {what}")]
    Divergence { update: usize, what: &'static str },
    #[error("feature table has {got} rows, MDP has {expected} states")]
    FeatureMismatch { got: usize, expected: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Estimation(#[from] crate::estimation::EstimationError),
}

/// Which regularization the trainer applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainRegularizer {
    None,
    /// Policy-entropy loss bonus only.
    Policy,
    /// k-NN intrinsic reward only.
    State,
    /// Intrinsic reward plus a stabilizing policy-entropy bonus.
    Both,
}

impl TrainRegularizer {
    pub fn uses_intrinsic(self) -> bool {
        matches!(self, TrainRegularizer::State | TrainRegularizer::Both)
    }

    pub fn uses_policy_bonus(self) -> bool {
        matches!(self, TrainRegularizer::Policy | TrainRegularizer::Both)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct TrainConfig<F> {
    pub regularizer: TrainRegularizer,
    /// Policy-entropy bonus coefficient (used by `Policy` and `Both`).
    pub policy_alpha: F,
    /// Cosine warm-up endpoints for the intrinsic temperature.
    pub state_beta_start: F,
    pub state_beta_end: F,
    /// Rollouts collected per update (`n`).
    pub rollouts_per_update: usize,
    /// Rollouts per entropy-estimate group; `None` pools the whole batch.
    #[serde(default)]
    pub group_size: Option<usize>,
    pub horizon: usize,
    pub updates: usize,
    pub actor_lr: F,
    pub critic_lr: F,
    pub discount: F,
    /// Per-step damping base of the intrinsic stream (1 = none).
    pub intrinsic_discount: F,
    pub knn_k: usize,
    pub seed: u64,
}

impl<F: Scalar> TrainConfig<F> {
    /// Tuned defaults for the 8x8 benchmark grid.
    pub fn new(regularizer: TrainRegularizer, seed: u64) -> Self {
        Self {
            regularizer,
            policy_alpha: F::cast(0.03),
            state_beta_start: F::cast(0.2),
            state_beta_end: F::cast(0.05),
            rollouts_per_update: 8,
            group_size: None,
            horizon: 128,
            updates: 1500,
            actor_lr: F::cast(0.4),
            critic_lr: F::cast(0.3),
            discount: F::cast(0.98),
            intrinsic_discount: F::one(),
            knn_k: 3,
            seed,
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        if self.rollouts_per_update == 0 || self.horizon == 0 || self.updates == 0 {
            return Err(TrainError::InvalidConfig("zero-sized training budget".into()));
        }
        if !(self.discount >= F::zero() && self.discount < F::one()) {
            return Err(TrainError::InvalidConfig(format!("discount {}", self.discount)));
        }
        if !(self.intrinsic_discount > F::zero() && self.intrinsic_discount <= F::one()) {
            return Err(TrainError::InvalidConfig(format!(
                "intrinsic_discount {}",
                self.intrinsic_discount
            )));
        }
        if self.knn_k == 0 {
            return Err(TrainError::InvalidConfig("knn_k must be positive".into()));
        }
        Ok(())
    }
}

/// One training-log line, serialized as JSON-lines by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogEntry<F> {
    pub update: usize,
    /// Mean undiscounted extrinsic episode return.
    pub mean_return: F,
    /// Entropy of the empirical state-visit distribution this update.
    pub state_entropy: F,
    /// Visit-weighted mean policy entropy.
    pub policy_entropy: F,
    pub intrinsic_temperature: F,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub policy: Policy<F>,
    pub log: Vec<LogEntry<F>>,
}

struct Rollout<F> {
    states: Vec<usize>,
    actions: Vec<usize>,
    ext_rewards: Vec<F>,
}

/// Train a softmax actor-critic on `mdp`, drawing intrinsic rewards from
/// k-NN distances between the `features` rows of visited states.
pub fn train_rollout_agent<F: Scalar>(
    mdp: &Mdp<F>,
    features: &Array2<F>,
    config: &TrainConfig<F>,
) -> Result<TrainOutcome<F>, TrainError> {
    config.validate()?;
    if features.nrows() != mdp.n_states() {
        return Err(TrainError::FeatureMismatch {
            got: features.nrows(),
            expected: mdp.n_states(),
        });
    }
    let n_states = mdp.n_states();
    let n_actions = mdp.n_actions();
    let terminal = absorbing_zero_reward_states(mdp);
    let schedule = TemperatureSchedule::new(
        config.state_beta_start.max(config.state_beta_end),
        config.state_beta_end,
        config.updates,
    )?;
    let mut rng = crate::seeded_rng(config.seed);
    let mut logits = Array2::<F>::zeros((n_states, n_actions));
    let mut values = vec![F::zero(); n_states];
    let mut log = Vec::with_capacity(config.updates);

    for update in 1..=config.updates {
        let beta_t = schedule.temperature_at(update)?;
        let rollouts: Vec<Rollout<F>> = (0..config.rollouts_per_update)
            .map(|_| collect_rollout(mdp, &logits, &terminal, config.horizon, &mut rng))
            .collect();

        let intrinsic = if config.regularizer.uses_intrinsic() {
            intrinsic_for(&rollouts, features, config)?
        } else {
            rollouts.iter().map(|r| vec![F::zero(); r.states.len()]).collect()
        };

        let mut visit_counts = vec![0usize; n_states];
        let mut return_sum = F::zero();
        let mut policy_entropy_sum = F::zero();
        let mut steps_total = 0usize;
        for (rollout, bonuses) in rollouts.iter().zip(&intrinsic) {
            let steps = rollout.states.len();
            return_sum += rollout.ext_rewards.iter().copied().sum::<F>();
            // Mixed reward stream and returns-to-go.
            let mut damping = F::one();
            let mut totals = Vec::with_capacity(steps);
            for j in 0..steps {
                let mixed = if config.regularizer.uses_intrinsic() {
                    total_reward(rollout.ext_rewards[j], bonuses[j], beta_t, damping)
                } else {
                    rollout.ext_rewards[j]
                };
                totals.push(mixed);
                damping *= config.intrinsic_discount;
            }
            let mut returns = vec![F::zero(); steps];
            let mut acc = F::zero();
            for j in (0..steps).rev() {
                acc = totals[j] + config.discount * acc;
                returns[j] = acc;
            }
            for j in 0..steps {
                let s = rollout.states[j];
                let a = rollout.actions[j];
                visit_counts[s] += 1;
                steps_total += 1;
                let probs = softmax_row(&logits, s);
                policy_entropy_sum += entropy_unchecked(probs.iter().copied());
                let advantage = returns[j] - values[s];
                values[s] += config.critic_lr * advantage;
                let step = config.actor_lr;
                let row_entropy = entropy_unchecked(probs.iter().copied());
                for b in 0..n_actions {
                    let indicator = if b == a { F::one() } else { F::zero() };
                    let mut g = advantage * (indicator - probs[b]);
                    if config.regularizer.uses_policy_bonus() {
                        let safe_log = probs[b].max(F::min_positive_value()).ln();
                        g -= config.policy_alpha * probs[b] * (safe_log + row_entropy);
                    }
                    logits[[s, b]] += step * g;
                }
            }
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::Divergence { update, what: "actor logits" });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::Divergence { update, what: "critic values" });
        }
        let visits_f: Vec<F> = visit_counts
            .iter()
            .map(|&c| F::cast(c as f64 / steps_total.max(1) as f64))
            .collect();
        log.push(LogEntry {
            update,
            mean_return: return_sum / F::cast(config.rollouts_per_update as f64),
            state_entropy: entropy_unchecked(visits_f.into_iter()),
            policy_entropy: policy_entropy_sum / F::cast(steps_total.max(1) as f64),
            intrinsic_temperature: beta_t,
        });
    }

    let mut probs = Array2::zeros((n_states, n_actions));
    for s in 0..n_states {
        let row = softmax_row(&logits, s);
        for a in 0..n_actions {
            probs[[s, a]] = row[a];
        }
    }
    Ok(TrainOutcome { policy: Policy::new(probs)?, log })
}

/// Intrinsic bonuses per rollout step; groups with too few points for the
/// k-NN query contribute zero bonus instead of failing the update.
fn intrinsic_for<F: Scalar>(
    rollouts: &[Rollout<F>],
    features: &Array2<F>,
    config: &TrainConfig<F>,
) -> Result<Vec<Vec<F>>, TrainError> {
    let group_size = config
        .group_size
        .unwrap_or(rollouts.len())
        .clamp(1, rollouts.len());
    let mut out: Vec<Vec<F>> = Vec::with_capacity(rollouts.len());
    for group in rollouts.chunks(group_size) {
        let matrices: Vec<Array2<F>> = group
            .iter()
            .map(|r| {
                let mut m = Array2::zeros((r.states.len(), features.ncols()));
                for (row, &s) in r.states.iter().enumerate() {
                    m.row_mut(row).assign(&features.row(s));
                }
                m
            })
            .collect();
        let total_points: usize = matrices.iter().map(|m| m.nrows()).sum();
        if total_points <= config.knn_k {
            for r in group {
                out.push(vec![F::zero(); r.states.len()]);
            }
            continue;
        }
        let batch = FeatureBatch::from_rollouts(&matrices, group.len())?;
        let rewards = intrinsic_reward(&batch, config.knn_k)?;
        let mut offset = 0;
        for r in group {
            let len = r.states.len();
            out.push(rewards[offset..offset + len].to_vec());
            offset += len;
        }
    }
    Ok(out)
}

fn collect_rollout<F: Scalar, R: Rng + ?Sized>(
    mdp: &Mdp<F>,
    logits: &Array2<F>,
    terminal: &[bool],
    horizon: usize,
    rng: &mut R,
) -> Rollout<F> {
    let mut state = sample_categorical(mdp.initial_dist().iter().copied(), rng);
    let mut states = Vec::new();
    let mut actions = Vec::new();
    let mut ext_rewards = Vec::new();
    for _ in 0..horizon {
        if terminal[state] {
            break;
        }
        let probs = softmax_row(logits, state);
        let action = sample_categorical(probs.iter().copied(), rng);
        states.push(state);
        actions.push(action);
        ext_rewards.push(mdp.reward()[[state, action]]);
        state = sample_categorical(
            (0..mdp.n_states()).map(|s2| mdp.kernel()[[state, action, s2]]),
            rng,
        );
    }
    Rollout { states, actions, ext_rewards }
}

fn sample_categorical<F: Scalar, R: Rng + ?Sized>(
    probs: impl IntoIterator<Item = F>,
    rng: &mut R,
) -> usize {
    let u = F::cast(rng.random::<f64>());
    let mut acc = F::zero();
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn softmax_row<F: Scalar>(logits: &Array2<F>, state: usize) -> Vec<F> {
    let row = logits.row(state);
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = row.iter().map(|&v| (v - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// States that are absorbing under every action and pay nothing: episode
/// terminators (gridworld goals and walls).
fn absorbing_zero_reward_states<F: Scalar>(mdp: &Mdp<F>) -> Vec<bool> {
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions()).all(|a| {
                mdp.kernel()[[s, a, s]] == F::one() && mdp.reward()[[s, a]] == F::zero()
            })
        })
        .collect()
}

/// Exact one-sided sign-test p-value: probability of at least `wins`
/// successes in `wins + losses` fair coin flips.
pub fn sign_test_p_value(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let mut log_choose = 0.0f64; // log C(n, 0)
    let mut tail = 0.0f64;
    let log_half_n = -(n as f64) * 2.0f64.ln();
    for i in 0..=n {
        if i >= wins {
            tail += (log_choose + log_half_n).exp();
        }
        if i < n {
            log_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
    }
    tail.min(1.0)
}

/// Largest candidate temperature whose nominal success stays within
/// `max_degradation` of the unregularized baseline. Mirrors the benchmark's
/// regularization-strength selection; returns `(chosen, per-candidate
/// nominal success)`.
pub fn sweep_state_temperature<F: Scalar>(
    spec: &crate::grid::GridSpec<F>,
    base: &TrainConfig<F>,
    candidates: &[F],
    eval_episodes: usize,
    eval_horizon: usize,
    max_degradation: F,
) -> Result<(Option<F>, Vec<(F, F)>), TrainError> {
    let mdp = crate::grid::build_grid(spec, base.discount)
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let features = spec.state_features();
    let nominal = |config: &TrainConfig<F>| -> Result<F, TrainError> {
        let outcome = train_rollout_agent(&mdp, &features, config)?;
        let report =
            crate::grid::evaluate(&outcome.policy, &[spec.clone()], eval_episodes, eval_horizon, base.seed)
                .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        Ok(report.per_spec[0].success)
    };
    let mut baseline_cfg = base.clone();
    baseline_cfg.regularizer = TrainRegularizer::None;
    let baseline = nominal(&baseline_cfg)?;
    let mut results = Vec::with_capacity(candidates.len());
    let mut chosen = None;
    for &beta in candidates {
        let mut cfg = base.clone();
        cfg.state_beta_end = beta;
        cfg.state_beta_start = beta * F::cast(4.0);
        let success = nominal(&cfg)?;
        results.push((beta, success));
        if success >= baseline - max_degradation {
            match chosen {
                Some(prev) if prev >= beta => {}
                _ => chosen = Some(beta),
            }
        }
    }
    Ok((chosen, results))
}
