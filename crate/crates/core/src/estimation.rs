//! Particle-based state-entropy estimation and the intrinsic-reward
//! machinery built on it: the k-NN differential entropy estimator with its
//! bias correction and unit-ball volume term, per-point exploration bonuses
//! with rollout grouping, reward mixing, and the cosine temperature warm-up.
//!
//! Nearest neighbors are exact brute force; batches are desk-scale and never
//! justify a spatial index. Distance ties break toward the smaller point
//! index, which pins the estimator value on degenerate inputs.

use ndarray::Array2;
use std::ops::Range;
use thiserror::Error;

use crate::scalar::Scalar;

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("k-NN query needs more than k = {k} points, group {group} has {have}")]
    InsufficientPoints { group: usize, have: usize, k: usize },
    #[error("feature batch is empty or zero-dimensional")]
    EmptyBatch,
    #[error("rollout {index} has {got} columns, expected {expected}")]
    DimensionMismatch { index: usize, got: usize, expected: usize },
    #[error("step {t} outside schedule range 1..={total}")]
    ScheduleOutOfRange { t: usize, total: usize },
    #[error("schedule requires beta_start >= beta_end > 0, got {start} and {end}")]
    InvalidSchedule { start: f64, end: f64 },
}

/// Feature projections of visited states, concatenated across rollouts.
///
/// `group_size` counts rollouts per entropy estimate: intrinsic rewards
/// search neighbors only within consecutive blocks of that many rollouts.
#[derive(Debug, Clone)]
pub struct FeatureBatch<F> {
    points: Array2<F>,
    rollout_lens: Vec<usize>,
    group_size: usize,
}

impl<F: Scalar> FeatureBatch<F> {
    /// One rollout, one group.
    pub fn new(points: Array2<F>) -> Result<Self, EstimationError> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(EstimationError::EmptyBatch);
        }
        let len = points.nrows();
        Ok(Self { points, rollout_lens: vec![len], group_size: 1 })
    }

    pub fn from_rollouts(rollouts: &[Array2<F>], group_size: usize) -> Result<Self, EstimationError> {
        if rollouts.is_empty() || group_size == 0 {
            return Err(EstimationError::EmptyBatch);
        }
        let dim = rollouts[0].ncols();
        if dim == 0 {
            return Err(EstimationError::EmptyBatch);
        }
        let mut rollout_lens = Vec::with_capacity(rollouts.len());
        let total: usize = rollouts.iter().map(|r| r.nrows()).sum();
        let mut points = Array2::zeros((total, dim));
        let mut row = 0;
        for (index, rollout) in rollouts.iter().enumerate() {
            if rollout.ncols() != dim {
                return Err(EstimationError::DimensionMismatch {
                    index,
                    got: rollout.ncols(),
                    expected: dim,
                });
            }
            for r in rollout.rows() {
                points.row_mut(row).assign(&r);
                row += 1;
            }
            rollout_lens.push(rollout.nrows());
        }
        if total == 0 {
            return Err(EstimationError::EmptyBatch);
        }
        Ok(Self { points, rollout_lens, group_size })
    }

    pub fn points(&self) -> &Array2<F> {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    /// Point ranges of each group of `group_size` consecutive rollouts.
    pub fn group_ranges(&self) -> Vec<Range<usize>> {
        let mut ranges = Vec::new();
        let mut start = 0;
        let mut in_group = 0;
        let mut end = 0;
        for &len in &self.rollout_lens {
            end += len;
            in_group += 1;
            if in_group == self.group_size {
                ranges.push(start..end);
                start = end;
                in_group = 0;
            }
        }
        if start < end {
            ranges.push(start..end);
        }
        ranges
    }
}

/// Distance to the k-th nearest neighbor of `i` among `range`, Euclidean,
/// ties toward smaller index.
fn kth_neighbor_distance<F: Scalar>(points: &Array2<F>, range: Range<usize>, i: usize, k: usize) -> F {
    let mut dists: Vec<(F, usize)> = range
        .filter(|&j| j != i)
        .map(|j| {
            let mut acc = F::zero();
            for c in 0..points.ncols() {
                let d = points[[i, c]] - points[[j, c]];
                acc += d * d;
            }
            (acc, j)
        })
        .collect();
    dists.select_nth_unstable_by(k - 1, |a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then(a.1.cmp(&b.1))
    });
    dists[k - 1].0.sqrt()
}

/// `ln Gamma(d/2 + 1)` for integer dimension `d`, exact in closed form.
fn ln_gamma_half_dim_plus_one(d: usize) -> f64 {
    let ln_fact = |n: usize| -> f64 { (2..=n).map(|j| (j as f64).ln()).sum() };
    if d % 2 == 0 {
        ln_fact(d / 2)
    } else {
        // Gamma(m + 3/2) = sqrt(pi) (2m+2)! / (4^(m+1) (m+1)!), d = 2m+1.
        let m = d / 2;
        0.5 * std::f64::consts::PI.ln() + ln_fact(2 * m + 2)
            - ((m + 1) as f64) * 4.0f64.ln()
            - ln_fact(m + 1)
    }
}

/// Digamma at a positive integer: `psi(k) = H_{k-1} - gamma`.
fn digamma_int(k: usize) -> f64 {
    (1..k).map(|j| 1.0 / j as f64).sum::<f64>() - EULER_MASCHERONI
}

/// k-NN differential entropy estimate over all points of the batch:
/// `(1/N) sum_i log(N ||x_i - x_i^kNN||^D pi^(D/2) / (k Gamma(D/2+1))) + log k - psi(k)`.
pub fn knn_entropy<F: Scalar>(batch: &FeatureBatch<F>, k: usize) -> Result<F, EstimationError> {
    let n = batch.n_points();
    if k == 0 || n <= k {
        return Err(EstimationError::InsufficientPoints { group: 0, have: n, k });
    }
    let d = batch.dim();
    let constant = (n as f64).ln() + 0.5 * (d as f64) * std::f64::consts::PI.ln()
        - (k as f64).ln()
        - ln_gamma_half_dim_plus_one(d)
        + (k as f64).ln()
        - digamma_int(k);
    let dim_f = F::cast(d as f64);
    let mut acc = F::zero();
    for i in 0..n {
        let eps = kth_neighbor_distance(batch.points(), 0..n, i, k);
        acc += dim_f * eps.ln();
    }
    Ok(acc / F::cast(n as f64) + F::cast(constant))
}

/// Per-point exploration bonus `log(||y_i - y_i^kNN|| + 1)`, neighbors
/// searched within each group of `group_size` rollouts. Rewards come back in
/// the batch's point order.
pub fn intrinsic_reward<F: Scalar>(batch: &FeatureBatch<F>, k: usize) -> Result<Vec<F>, EstimationError> {
    let mut rewards = vec![F::zero(); batch.n_points()];
    for (g, range) in batch.group_ranges().into_iter().enumerate() {
        let have = range.len();
        if k == 0 || have <= k {
            return Err(EstimationError::InsufficientPoints { group: g, have, k });
        }
        for i in range.clone() {
            let eps = kth_neighbor_distance(batch.points(), range.clone(), i, k);
            rewards[i] = (eps + F::one()).ln();
        }
    }
    Ok(rewards)
}

/// `r_total = extrinsic + beta * gamma_t * intrinsic`.
pub fn total_reward<F: Scalar>(extrinsic: F, intrinsic: F, beta: F, gamma_t: F) -> F {
    debug_assert!(beta >= F::zero());
    debug_assert!(gamma_t > F::zero() && gamma_t <= F::one());
    extrinsic + beta * gamma_t * intrinsic
}

/// Cosine decay from `beta_start` down to `beta_end` over `total_steps`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TemperatureSchedule<F> {
    pub beta_start: F,
    pub beta_end: F,
    pub total_steps: usize,
}

impl<F: Scalar> TemperatureSchedule<F> {
    pub fn new(beta_start: F, beta_end: F, total_steps: usize) -> Result<Self, EstimationError> {
        if !(beta_end > F::zero()) || beta_start < beta_end {
            return Err(EstimationError::InvalidSchedule {
                start: beta_start.as_f64(),
                end: beta_end.as_f64(),
            });
        }
        Ok(Self { beta_start, beta_end, total_steps })
    }

    /// `beta_t = beta_end + (beta_start - beta_end)/2 (1 + cos(pi (t-1)/T))`
    /// for `t` in `1..=total_steps`.
    pub fn temperature_at(&self, t: usize) -> Result<F, EstimationError> {
        if t == 0 || t > self.total_steps {
            return Err(EstimationError::ScheduleOutOfRange { t, total: self.total_steps });
        }
        let phase = F::PI() * F::cast((t - 1) as f64) / F::cast(self.total_steps as f64);
        Ok(self.beta_end + (self.beta_start - self.beta_end) / F::cast(2.0) * (F::one() + phase.cos()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn batch_from(points: Vec<Vec<f64>>) -> FeatureBatch<f64> {
        let rows = points.len();
        let cols = points[0].len();
        let flat: Vec<f64> = points.into_iter().flatten().collect();
        FeatureBatch::new(Array2::from_shape_vec((rows, cols), flat).unwrap()).unwrap()
    }

    fn box_muller(rng: &mut impl Rng) -> (f64, f64) {
        let u1: f64 = rng.random::<f64>().max(1e-15);
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        (r * t.cos(), r * t.sin())
    }

    #[test]
    fn two_point_estimate_matches_direct_formula() {
        let batch = batch_from(vec![vec![0.0], vec![1.0]]);
        let est = knn_entropy(&batch, 1).unwrap();
        // N = 2, D = 1, eps = 1 for both points:
        // (1/2) sum log(2 * 1 * pi^(1/2) / Gamma(3/2)) + log 1 - psi(1)
        let gamma_3_2 = std::f64::consts::PI.sqrt() / 2.0;
        let direct = (2.0 * std::f64::consts::PI.sqrt() / gamma_3_2).ln() + EULER_MASCHERONI;
        assert_abs_diff_eq!(est, direct, epsilon = 1e-12);
    }

    #[test]
    fn uniform_square_entropy_is_near_zero() {
        let mut rng = crate::test_rng(101);
        let n = 10_000;
        let pts = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
        let batch = FeatureBatch::new(pts).unwrap();
        let est = knn_entropy(&batch, 3).unwrap();
        assert!(est.abs() < 0.05, "estimate {est}");
    }

    #[test]
    fn gaussian_entropy_matches_closed_form() {
        let mut rng = crate::test_rng(103);
        let n = 10_000;
        let mut pts = Array2::zeros((n, 2));
        for i in 0..n {
            let (a, b) = box_muller(&mut rng);
            pts[[i, 0]] = a;
            pts[[i, 1]] = b;
        }
        let batch = FeatureBatch::new(pts).unwrap();
        let est = knn_entropy(&batch, 3).unwrap();
        let truth = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((est - truth).abs() < 0.05, "estimate {est}, truth {truth}");
    }

    #[test]
    fn estimate_shifts_exactly_under_scaling_and_not_under_translation() {
        let mut rng = crate::test_rng(107);
        let n = 200;
        let pts = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
        let base = knn_entropy(&FeatureBatch::new(pts.clone()).unwrap(), 4).unwrap();
        let scaled = knn_entropy(&FeatureBatch::new(pts.mapv(|v| 2.5 * v)).unwrap(), 4).unwrap();
        assert_abs_diff_eq!(scaled - base, 3.0 * 2.5f64.ln(), epsilon = 1e-10);
        let shifted = knn_entropy(&FeatureBatch::new(pts.mapv(|v| v + 7.0)).unwrap(), 4).unwrap();
        assert_abs_diff_eq!(shifted, base, epsilon = 1e-10);
    }

    #[test]
    fn estimate_is_permutation_invariant() {
        let mut rng = crate::test_rng(109);
        let n = 50;
        let pts = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
        let base = knn_entropy(&FeatureBatch::new(pts.clone()).unwrap(), 3).unwrap();
        let mut reversed = Array2::zeros((n, 2));
        for i in 0..n {
            reversed.row_mut(i).assign(&pts.row(n - 1 - i));
        }
        let rev = knn_entropy(&FeatureBatch::new(reversed).unwrap(), 3).unwrap();
        assert_abs_diff_eq!(base, rev, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_error_shrinks_with_ten_times_the_data() {
        let truth = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        let mut errs = Vec::new();
        for &n in &[1_000usize, 10_000] {
            let mut rng = crate::test_rng(113);
            let mut pts = Array2::zeros((n, 2));
            for i in 0..n {
                let (a, b) = box_muller(&mut rng);
                pts[[i, 0]] = a;
                pts[[i, 1]] = b;
            }
            let est = knn_entropy(&FeatureBatch::new(pts).unwrap(), 3).unwrap();
            errs.push((est - truth).abs());
        }
        assert!(errs[1] < errs[0], "errors {errs:?}");
    }

    #[test]
    fn intrinsic_reward_hand_values() {
        let gap = std::f64::consts::E - 1.0;
        let batch = batch_from(vec![vec![0.0], vec![gap]]);
        let rewards = intrinsic_reward(&batch, 1).unwrap();
        assert_abs_diff_eq!(rewards[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rewards[1], 1.0, epsilon = 1e-12);

        let coincident = batch_from(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        for r in intrinsic_reward(&coincident, 1).unwrap() {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn duplicated_batch_gets_zero_rewards() {
        let mut rng = crate::test_rng(127);
        let pts: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random(), rng.random()]).collect();
        let doubled: Vec<Vec<f64>> = pts.iter().chain(pts.iter()).cloned().collect();
        let batch = batch_from(doubled);
        for r in intrinsic_reward(&batch, 1).unwrap() {
            assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn intrinsic_rewards_are_nonnegative_and_permutation_equivariant() {
        let mut rng = crate::test_rng(131);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random(), rng.random()]).collect();
        let rewards = intrinsic_reward(&batch_from(pts.clone()), 3).unwrap();
        assert!(rewards.iter().all(|&r| r >= 0.0));
        let mut perm = pts.clone();
        perm.rotate_left(7);
        let rotated = intrinsic_reward(&batch_from(perm), 3).unwrap();
        for i in 0..pts.len() {
            assert_abs_diff_eq!(rewards[(i + 7) % pts.len()], rotated[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn single_group_matches_ungrouped_computation() {
        let mut rng = crate::test_rng(137);
        let rollouts: Vec<Array2<f64>> = (0..4)
            .map(|_| Array2::from_shape_fn((15, 2), |_| rng.random::<f64>()))
            .collect();
        let grouped = FeatureBatch::from_rollouts(&rollouts, 4).unwrap();
        let pooled = FeatureBatch::new(grouped.points().clone()).unwrap();
        let a = intrinsic_reward(&grouped, 3).unwrap();
        let b = intrinsic_reward(&pooled, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn per_rollout_groups_ignore_other_rollouts() {
        // Two far-apart rollouts: grouped per rollout, neighbors stay local
        // and rewards are small; pooled, each point's neighbor may cross.
        let near = Array2::from_shape_fn((5, 1), |(i, _)| i as f64 * 0.01);
        let far = Array2::from_shape_fn((5, 1), |(i, _)| 1000.0 + i as f64 * 0.01);
        let grouped = FeatureBatch::from_rollouts(&[near.clone(), far.clone()], 1).unwrap();
        let rewards = intrinsic_reward(&grouped, 1).unwrap();
        for &r in &rewards {
            assert!(r < 0.02, "local neighbor expected, got {r}");
        }
        let insufficient = FeatureBatch::from_rollouts(&[near, far], 1).unwrap();
        assert!(matches!(
            intrinsic_reward(&insufficient, 5),
            Err(EstimationError::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn total_reward_is_the_displayed_sum() {
        assert_abs_diff_eq!(total_reward(1.0, 0.5, 0.2, 0.9), 1.09, epsilon = 1e-15);
        assert_abs_diff_eq!(total_reward(2.0, 5.0, 0.0, 1.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(total_reward(0.0, 3.0, 1.0, 1.0), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let sched = TemperatureSchedule::new(2.0f64, 0.5, 100).unwrap();
        assert_abs_diff_eq!(sched.temperature_at(1).unwrap(), 2.0, epsilon = 1e-12);
        // (t-1)/T = 1/2 gives beta_end + (beta_start - beta_end)/2.
        assert_abs_diff_eq!(sched.temperature_at(51).unwrap(), 0.5 + 0.75, epsilon = 1e-12);
        // Tail approaches beta_end within the cosine Taylor bound.
        let t_end = sched.temperature_at(100).unwrap();
        let bound = (2.0 - 0.5) * std::f64::consts::PI.powi(2) / (2.0 * 100.0f64.powi(2));
        assert!(t_end - 0.5 <= bound, "tail {t_end}");
        assert!(sched.temperature_at(0).is_err());
        assert!(sched.temperature_at(101).is_err());
    }

    #[test]
    fn schedule_is_monotone_non_increasing() {
        let sched = TemperatureSchedule::new(1.0f64, 0.1, 64).unwrap();
        let mut prev = f64::INFINITY;
        for t in 1..=64 {
            let b = sched.temperature_at(t).unwrap();
            assert!(b <= prev + 1e-15);
            prev = b;
        }
    }

    #[test]
    fn f32_estimator_is_close_to_f64() {
        let mut rng = crate::test_rng(139);
        let pts64 = Array2::from_shape_fn((200, 2), |_| rng.random::<f64>());
        let pts32 = pts64.mapv(|v| v as f32);
        let e64 = knn_entropy(&FeatureBatch::new(pts64).unwrap(), 3).unwrap();
        let e32 = knn_entropy(&FeatureBatch::new(pts32).unwrap(), 3).unwrap();
        assert!((e64 - e32 as f64).abs() < 1e-3);
    }
}
