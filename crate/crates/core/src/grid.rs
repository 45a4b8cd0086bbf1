//! Gridworld benchmark: nominal grid construction, the three perturbation
//! families (wall segment, scattered obstacles, goal shift), the 2x6 snake
//! grid, episodic simulation and perturbed-environment evaluation.
//!
//! Cells are `(x, y)` with `x` as the column; the state index is
//! `y * width + x`. Actions are the four cardinal moves; walking into a wall
//! or the boundary is a no-op. The goal is absorbing and pays its reward on
//! the transition that enters it.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Mdp, MdpError, Policy};
use crate::scalar::Scalar;

/// Cardinal moves: up, right, down, left (in `(dx, dy)`).
pub const DIRECTIONS: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

/// 96% central normal quantile used for evaluation confidence bounds.
const WILSON_Z: f64 = 2.053748910631823;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

pub type Cell = (usize, usize);

/// Geometry and rewards of a gridworld.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
pub struct GridSpec<F> {
    pub width: usize,
    pub height: usize,
    pub start: Cell,
    pub goal: Cell,
    #[serde(default)]
    pub walls: BTreeSet<Cell>,
    #[serde(default = "zero_scalar")]
    pub step_reward: F,
    #[serde(default = "one_scalar")]
    pub goal_reward: F,
    #[serde(default = "zero_scalar")]
    pub slip_prob: F,
}

fn zero_scalar<F: Scalar>() -> F {
    F::zero()
}

fn one_scalar<F: Scalar>() -> F {
    F::one()
}

impl<F: Scalar> GridSpec<F> {
    pub fn empty(width: usize, height: usize, start: Cell, goal: Cell) -> Self {
        Self {
            width,
            height,
            start,
            goal,
            walls: BTreeSet::new(),
            step_reward: F::zero(),
            goal_reward: F::one(),
            slip_prob: F::zero(),
        }
    }

    /// The 8x8 empty grid: start top-left, goal bottom-right, sparse reward.
    pub fn benchmark_8x8() -> Self {
        Self::empty(8, 8, (0, 0), (7, 7))
    }

    /// The 2x6 snake grid: start top-left, goal top-right.
    pub fn snake() -> Self {
        Self::empty(6, 2, (0, 0), (5, 0))
    }

    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn state_index(&self, cell: Cell) -> usize {
        cell.1 * self.width + cell.0
    }

    pub fn cell_of(&self, state: usize) -> Cell {
        (state % self.width, state / self.width)
    }

    fn in_bounds(&self, cell: Cell) -> bool {
        cell.0 < self.width && cell.1 < self.height
    }

    /// Structural checks every spec must pass (perturbed ones included).
    pub fn validate(&self) -> Result<(), GridError> {
        if self.width == 0 || self.height == 0 {
            return Err(GridError::InvalidSpec("empty grid".into()));
        }
        for &cell in [&self.start, &self.goal] {
            if !self.in_bounds(cell) {
                return Err(GridError::InvalidSpec(format!("cell {cell:?} out of bounds")));
            }
            if self.walls.contains(&cell) {
                return Err(GridError::InvalidSpec(format!("cell {cell:?} is a wall")));
            }
        }
        if self.walls.iter().any(|&w| !self.in_bounds(w)) {
            return Err(GridError::InvalidSpec("wall out of bounds".into()));
        }
        if !(self.slip_prob >= F::zero() && self.slip_prob < F::one()) {
            return Err(GridError::InvalidSpec(format!(
                "slip_prob {} outside [0, 1)",
                self.slip_prob
            )));
        }
        Ok(())
    }

    /// Nominal specs must also keep the goal reachable.
    pub fn validate_nominal(&self) -> Result<(), GridError> {
        self.validate()?;
        if !self.is_connected() {
            return Err(GridError::InvalidSpec("walls disconnect start from goal".into()));
        }
        Ok(())
    }

    /// BFS reachability from start to goal.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_states()];
        let mut queue = std::collections::VecDeque::new();
        seen[self.state_index(self.start)] = true;
        queue.push_back(self.start);
        while let Some(cell) = queue.pop_front() {
            if cell == self.goal {
                return true;
            }
            for next in self.neighbors(cell) {
                let idx = self.state_index(next);
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push_back(next);
                }
            }
        }
        false
    }

    /// Passable neighboring cells.
    pub fn neighbors(&self, cell: Cell) -> Vec<Cell> {
        DIRECTIONS
            .iter()
            .filter_map(|&(dx, dy)| self.target_cell(cell, dx, dy))
            .filter(|c| !self.walls.contains(c))
            .collect()
    }

    fn target_cell(&self, cell: Cell, dx: isize, dy: isize) -> Option<Cell> {
        let x = cell.0 as isize + dx;
        let y = cell.1 as isize + dy;
        if x < 0 || y < 0 {
            return None;
        }
        let out = (x as usize, y as usize);
        self.in_bounds(out).then_some(out)
    }

    /// Destination of `action` from `cell` ignoring slip: walls and the
    /// boundary are no-ops.
    pub fn move_from(&self, cell: Cell, action: usize) -> Cell {
        let (dx, dy) = DIRECTIONS[action];
        match self.target_cell(cell, dx, dy) {
            Some(next) if !self.walls.contains(&next) => next,
            _ => cell,
        }
    }

    /// Length of the shortest start-to-goal path, if one exists.
    pub fn shortest_path_len(&self) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.n_states()];
        let mut queue = std::collections::VecDeque::new();
        dist[self.state_index(self.start)] = 0;
        queue.push_back(self.start);
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.state_index(cell)];
            if cell == self.goal {
                return Some(d);
            }
            for next in self.neighbors(cell) {
                let idx = self.state_index(next);
                if dist[idx] == usize::MAX {
                    dist[idx] = d + 1;
                    queue.push_back(next);
                }
            }
        }
        None
    }

    /// `(x, y)` feature table, one row per state.
    pub fn state_features(&self) -> Array2<F> {
        Array2::from_shape_fn((self.n_states(), 2), |(s, c)| {
            let cell = self.cell_of(s);
            F::cast(if c == 0 { cell.0 as f64 } else { cell.1 as f64 })
        })
    }
}

/// Tabular MDP of the grid under discount `gamma`: 4 cardinal actions,
/// wall/boundary moves are no-ops, the goal absorbs after paying
/// `goal_reward` once (folded into `r(s, a)` as the probability-weighted
/// entry reward).
pub fn build_grid<F: Scalar>(spec: &GridSpec<F>, gamma: F) -> Result<Mdp<F>, GridError> {
    spec.validate()?;
    let n = spec.n_states();
    let goal = spec.state_index(spec.goal);
    let slip = spec.slip_prob;
    let quarter_slip = slip / F::cast(4.0);
    let mut kernel = Array3::zeros((n, 4, n));
    let mut reward = Array2::zeros((n, 4));
    for s in 0..n {
        let cell = spec.cell_of(s);
        let absorbing = s == goal || spec.walls.contains(&cell);
        for a in 0..4 {
            if absorbing {
                kernel[[s, a, s]] = F::one();
                continue;
            }
            for executed in 0..4 {
                let mut p = if executed == a { F::one() - slip } else { F::zero() };
                p += quarter_slip;
                if p == F::zero() {
                    continue;
                }
                let dest = spec.state_index(spec.move_from(cell, executed));
                kernel[[s, a, dest]] += p;
            }
            reward[[s, a]] = spec.step_reward + spec.goal_reward * kernel[[s, a, goal]];
        }
    }
    let mut initial = Array1::zeros(n);
    initial[spec.state_index(spec.start)] = F::one();
    Ok(Mdp::new(kernel, reward, gamma, initial)?)
}

/// The three test-time perturbation families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Vertical wall at a sampled column, spanning rows `1..=height-2`.
    WallSegment {
        /// Inclusive column range `x0` is drawn from; boundary columns are
        /// excluded by default.
        column_min: Option<usize>,
        column_max: Option<usize>,
    },
    /// Obstacles dropped on distinct random cells (start and goal excluded).
    ScatteredObstacles { count: usize },
    /// Goal moved to the given cell, or a random non-start cell.
    GoalShift { new_goal: Option<Cell> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    #[serde(default)]
    pub seed: u64,
}

/// Apply `pert` to a nominal spec. The result is structurally valid but may
/// be disconnected; wall perturbations are exactly the catastrophic case.
pub fn apply_perturbation<F: Scalar>(
    spec: &GridSpec<F>,
    pert: &PerturbationSpec,
) -> Result<GridSpec<F>, GridError> {
    spec.validate()?;
    let mut rng = crate::seeded_rng(pert.seed);
    let mut out = spec.clone();
    match pert.kind {
        PerturbationKind::WallSegment { column_min, column_max } => {
            let lo = column_min.unwrap_or(1);
            let hi = column_max.unwrap_or(spec.width.saturating_sub(2));
            if lo > hi || hi >= spec.width {
                return Err(GridError::InvalidSpec(format!("bad column range {lo}..={hi}")));
            }
            let x0 = lo + rng.random_range(0..=(hi - lo));
            for y in 1..spec.height.saturating_sub(1) {
                let cell = (x0, y);
                if cell != spec.start && cell != spec.goal {
                    out.walls.insert(cell);
                }
            }
        }
        PerturbationKind::ScatteredObstacles { count } => {
            let mut open: Vec<Cell> = (0..spec.n_states())
                .map(|s| spec.cell_of(s))
                .filter(|&c| c != spec.start && c != spec.goal && !spec.walls.contains(&c))
                .collect();
            if count > open.len() {
                return Err(GridError::InvalidSpec(format!(
                    "cannot place {count} obstacles on {} open cells",
                    open.len()
                )));
            }
            for _ in 0..count {
                let i = rng.random_range(0..open.len());
                out.walls.insert(open.swap_remove(i));
            }
        }
        PerturbationKind::GoalShift { new_goal } => {
            let goal = match new_goal {
                Some(cell) => cell,
                None => {
                    let open: Vec<Cell> = (0..spec.n_states())
                        .map(|s| spec.cell_of(s))
                        .filter(|&c| c != spec.start && !spec.walls.contains(&c))
                        .collect();
                    open[rng.random_range(0..open.len())]
                }
            };
            if goal == spec.start {
                return Err(GridError::InvalidSpec("goal shifted onto the start".into()));
            }
            out.goal = goal;
        }
    }
    out.validate()?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Simulation and evaluation
// ---------------------------------------------------------------------------

/// Step simulator over a grid spec. Slip replaces the chosen action by a
/// uniformly random one with probability `slip_prob`.
#[derive(Debug, Clone)]
pub struct GridEnv<F> {
    spec: GridSpec<F>,
    goal: usize,
}

impl<F: Scalar> GridEnv<F> {
    pub fn new(spec: GridSpec<F>) -> Result<Self, GridError> {
        spec.validate()?;
        let goal = spec.state_index(spec.goal);
        Ok(Self { spec, goal })
    }

    pub fn spec(&self) -> &GridSpec<F> {
        &self.spec
    }

    pub fn start_state(&self) -> usize {
        self.spec.state_index(self.spec.start)
    }

    pub fn is_goal(&self, state: usize) -> bool {
        state == self.goal
    }

    /// One transition; returns `(next_state, reward, reached_goal)`.
    pub fn step<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> (usize, F, bool) {
        let executed = if self.spec.slip_prob > F::zero()
            && F::cast(rng.random::<f64>()) < self.spec.slip_prob
        {
            rng.random_range(0..4)
        } else {
            action
        };
        let next = self.spec.state_index(self.spec.move_from(self.spec.cell_of(state), executed));
        let reached = next == self.goal && state != self.goal;
        let reward = self.spec.step_reward + if reached { self.spec.goal_reward } else { F::zero() };
        (next, reward, reached)
    }
}

/// Sample an action from a policy row.
pub fn sample_action<F: Scalar, R: Rng + ?Sized>(policy: &Policy<F>, state: usize, rng: &mut R) -> usize {
    let u = F::cast(rng.random::<f64>());
    let mut acc = F::zero();
    let row = policy.probs().row(state);
    for (a, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    row.len() - 1
}

/// Success statistics of one spec at every horizon up to the maximum.
#[derive(Debug, Clone, Serialize)]
pub struct SpecEvaluation<F> {
    pub spec_id: String,
    pub episodes: usize,
    /// `success_by_horizon[h-1]` = fraction of episodes reaching the goal
    /// within `h` steps.
    pub success_by_horizon: Vec<F>,
    pub success: F,
    pub ci_low: F,
    pub ci_high: F,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport<F> {
    pub horizon: usize,
    pub per_spec: Vec<SpecEvaluation<F>>,
}

/// Roll `policy` for `episodes` episodes on each spec and report goal-within-
/// horizon success rates with Wilson 96% confidence bounds. Specs must share
/// the policy's grid dimensions. Deterministic in `(policy, specs, seed)`.
pub fn evaluate<F: Scalar>(
    policy: &Policy<F>,
    specs: &[GridSpec<F>],
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<EvalReport<F>, GridError> {
    let mut per_spec = Vec::with_capacity(specs.len());
    for (index, spec) in specs.iter().enumerate() {
        if spec.n_states() != policy.n_states() {
            return Err(GridError::InvalidSpec(format!(
                "spec {index} has {} states, policy has {}",
                spec.n_states(),
                policy.n_states()
            )));
        }
        let env = GridEnv::new(spec.clone())?;
        let mut rng = crate::seeded_rng(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut hit_counts = vec![0usize; horizon + 1];
        for _ in 0..episodes {
            let mut state = env.start_state();
            for t in 1..=horizon {
                let action = sample_action(policy, state, &mut rng);
                let (next, _, reached) = env.step(state, action, &mut rng);
                state = next;
                if reached {
                    hit_counts[t] += 1;
                    break;
                }
            }
        }
        let mut cumulative = 0usize;
        let mut success_by_horizon = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            cumulative += hit_counts[t];
            success_by_horizon.push(F::cast(cumulative as f64 / episodes as f64));
        }
        let success = *success_by_horizon.last().expect("horizon >= 1");
        let (ci_low, ci_high) = wilson_interval(cumulative, episodes);
        per_spec.push(SpecEvaluation {
            spec_id: format!("spec{index}"),
            episodes,
            success_by_horizon,
            success,
            ci_low,
            ci_high,
        });
    }
    Ok(EvalReport { horizon, per_spec })
}

/// Wilson score interval at the 96% level.
pub fn wilson_interval<F: Scalar>(successes: usize, trials: usize) -> (F, F) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = WILSON_Z;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()) / denom;
    (F::cast((center - half).max(0.0)), F::cast((center + half).min(1.0)))
}

// ---------------------------------------------------------------------------
// Path enumeration
// ---------------------------------------------------------------------------

/// Maximum number of distinct states visitable by any start-to-goal
/// trajectory of at most `max_moves` moves (revisits allowed), by exhaustive
/// search.
pub fn max_distinct_states_to_goal<F: Scalar>(spec: &GridSpec<F>, max_moves: usize) -> usize {
    fn dfs<F: Scalar>(
        spec: &GridSpec<F>,
        cell: Cell,
        visited: &mut BTreeSet<Cell>,
        moves_left: usize,
        best: &mut usize,
    ) {
        if cell == spec.goal {
            *best = (*best).max(visited.len());
            return;
        }
        if moves_left == 0 || visited.len() + moves_left <= *best {
            return;
        }
        for next in spec.neighbors(cell) {
            let inserted = visited.insert(next);
            dfs(spec, next, visited, moves_left - 1, best);
            if inserted {
                visited.remove(&next);
            }
        }
    }
    let mut visited = BTreeSet::new();
    visited.insert(spec.start);
    let mut best = 0;
    dfs(spec, spec.start, &mut visited, max_moves, &mut best);
    best
}

/// All simple start-to-goal paths (as state sequences) of at most
/// `max_moves` moves. Deterministic policies can only realize simple paths:
/// revisiting a state would loop forever.
pub fn enumerate_simple_goal_paths<F: Scalar>(spec: &GridSpec<F>, max_moves: usize) -> Vec<Vec<usize>> {
    fn dfs<F: Scalar>(
        spec: &GridSpec<F>,
        cell: Cell,
        path: &mut Vec<usize>,
        on_path: &mut BTreeSet<Cell>,
        max_moves: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cell == spec.goal {
            out.push(path.clone());
            return;
        }
        if path.len() > max_moves {
            return;
        }
        for next in spec.neighbors(cell) {
            if on_path.contains(&next) {
                continue;
            }
            on_path.insert(next);
            path.push(spec.state_index(next));
            dfs(spec, next, path, on_path, max_moves, out);
            path.pop();
            on_path.remove(&next);
        }
    }
    let mut out = Vec::new();
    let mut on_path = BTreeSet::from([spec.start]);
    let mut path = vec![spec.state_index(spec.start)];
    dfs(spec, spec.start, &mut path, &mut on_path, max_moves, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_by_two_grid_rewards_and_absorbs() {
        let spec = GridSpec::<f64>::empty(2, 1, (0, 0), (1, 0));
        let mdp = build_grid(&spec, 0.9).unwrap();
        assert_eq!(mdp.n_states(), 2);
        // Action right (index 1) from start enters the goal with reward 1.
        assert_abs_diff_eq!(mdp.reward()[[0, 1]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mdp.kernel()[[0, 1, 1]], 1.0, epsilon = 1e-15);
        // Goal self-loops with zero reward under every action.
        for a in 0..4 {
            assert_abs_diff_eq!(mdp.kernel()[[1, a, 1]], 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(mdp.reward()[[1, a]], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn benchmark_grid_has_64_states_and_manhattan_shortest_path() {
        let spec = GridSpec::<f64>::benchmark_8x8();
        spec.validate_nominal().unwrap();
        assert_eq!(spec.n_states(), 64);
        assert_eq!(spec.shortest_path_len(), Some(14));
        let mdp = build_grid(&spec, 0.99).unwrap();
        assert_eq!(mdp.n_states(), 64);
    }

    #[test]
    fn snake_longest_trajectory_visits_all_twelve_states() {
        let spec = GridSpec::<f64>::snake();
        assert_eq!(spec.shortest_path_len(), Some(5));
        assert_eq!(max_distinct_states_to_goal(&spec, 11), 12);
        // No trajectory of fewer moves can do better than its move budget.
        assert!(max_distinct_states_to_goal(&spec, 7) <= 8);
        let paths = enumerate_simple_goal_paths(&spec, 11);
        let longest = paths.iter().map(Vec::len).max().unwrap();
        assert_eq!(longest, 12);
    }

    #[test]
    fn wall_segment_matches_the_quoted_cells() {
        let spec = GridSpec::<f64>::benchmark_8x8();
        let pert = PerturbationSpec {
            kind: PerturbationKind::WallSegment { column_min: Some(3), column_max: Some(3) },
            seed: 0,
        };
        let perturbed = apply_perturbation(&spec, &pert).unwrap();
        let expected: BTreeSet<Cell> = (1..=6).map(|y| (3, y)).collect();
        assert_eq!(perturbed.walls, expected);
        // Differs from nominal only in the declared cells.
        assert_eq!(perturbed.start, spec.start);
        assert_eq!(perturbed.goal, spec.goal);
    }

    #[test]
    fn goal_shift_next_to_start_is_scoreable() {
        let spec = GridSpec::<f64>::benchmark_8x8();
        let pert = PerturbationSpec {
            kind: PerturbationKind::GoalShift { new_goal: Some((0, 1)) },
            seed: 0,
        };
        let perturbed = apply_perturbation(&spec, &pert).unwrap();
        assert_eq!(perturbed.goal, (0, 1));
        // A policy that just walks down scores immediately.
        let down = Policy::deterministic(4, &vec![2usize; 64]);
        let report = evaluate(&down, &[perturbed], 50, 5, 9).unwrap();
        assert_abs_diff_eq!(report.per_spec[0].success, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scattered_obstacles_are_seed_deterministic() {
        let spec = GridSpec::<f64>::benchmark_8x8();
        let pert = PerturbationSpec {
            kind: PerturbationKind::ScatteredObstacles { count: 7 },
            seed: 1234,
        };
        let a = apply_perturbation(&spec, &pert).unwrap();
        let b = apply_perturbation(&spec, &pert).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.walls.len(), 7);
        assert!(!a.walls.contains(&spec.start) && !a.walls.contains(&spec.goal));
        // Regression fixture for the seeded sampler.
        let frozen: Vec<Cell> = a.walls.iter().copied().collect();
        assert_eq!(frozen, fixture_cells());
    }

    fn fixture_cells() -> Vec<Cell> {
        // Frozen from seed 1234 on the 8x8 benchmark grid.
        vec![(0, 1), (0, 3), (3, 4), (3, 7), (4, 0), (4, 5), (4, 6)]
    }

    #[test]
    fn shortest_path_policy_succeeds_at_manhattan_horizon() {
        let spec = GridSpec::<f64>::benchmark_8x8();
        // Right until the last column, then down.
        let actions: Vec<usize> = (0..64)
            .map(|s| if s % 8 < 7 { 1 } else { 2 })
            .collect();
        let policy = Policy::deterministic(4, &actions);
        let report = evaluate(&policy, &[spec], 100, 14, 3).unwrap();
        assert_abs_diff_eq!(report.per_spec[0].success, 1.0, epsilon = 1e-12);
        // Cannot be done in fewer than 14 moves.
        assert_abs_diff_eq!(report.per_spec[0].success_by_horizon[12], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn disconnected_perturbation_scores_zero() {
        let mut spec = GridSpec::<f64>::empty(3, 1, (0, 0), (2, 0));
        spec.walls.insert((1, 0));
        // validate() allows it; nominal validation rejects it.
        assert!(spec.validate().is_ok());
        assert!(spec.validate_nominal().is_err());
        let any = Policy::uniform(3, 4);
        let report = evaluate(&any, &[spec], 50, 30, 5).unwrap();
        assert_abs_diff_eq!(report.per_spec[0].success, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluation_is_bit_reproducible() {
        let spec = GridSpec::<f64>::benchmark_8x8();
        let mut rng = crate::test_rng(77);
        let policy = Policy::random(64, 4, &mut rng);
        let a = evaluate(&policy, &[spec.clone()], 200, 50, 42).unwrap();
        let b = evaluate(&policy, &[spec], 200, 50, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn grid_spec_json_round_trips() {
        let mut spec = GridSpec::<f64>::benchmark_8x8();
        spec.walls.insert((3, 3));
        spec.slip_prob = 0.125;
        let text = serde_json::to_string(&spec).unwrap();
        let back: GridSpec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn slip_changes_dynamics_but_rows_still_normalize() {
        let mut spec = GridSpec::<f64>::benchmark_8x8();
        spec.slip_prob = 0.2;
        let mdp = build_grid(&spec, 0.95).unwrap();
        // Mdp::new validated row sums; spot-check the slip split.
        assert_abs_diff_eq!(mdp.kernel()[[9, 1, 10]], 0.85, epsilon = 1e-12);
    }
}
