//! Ground truth for tests: exhaustive DST Pareto fronts and tabular
//! multi-objective Q-learning.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{epsilon_at, EpsilonSchedule};
use crate::envs::{dst_reset, dst_step, DstAction, DstState, EnvConfig, GridSpec, RewardVector};
use crate::error::{invalid, Result};
use crate::metrics::{nondominated_filter, Front};
use crate::scalarize::{epsilon_greedy, greedy_action, QMatrix, ScalarizationSpec};

/// Shortest-path return `(value, -steps)` for every reachable treasure,
/// reduced to its non-dominated subset.
pub fn enumerate_dst_front(spec: &GridSpec) -> Front {
    let start = dst_reset(spec);
    let mut dist = vec![usize::MAX; spec.n_cells()];
    let idx = |s: &DstState| s.row * spec.cols() + s.col;
    dist[idx(&start)] = 0;
    let mut queue = VecDeque::from([start]);
    let mut candidates = Vec::new();
    while let Some(s) = queue.pop_front() {
        let d = dist[idx(&s)];
        if let Some(value) = spec.treasure_at(s.row, s.col) {
            if d <= spec.max_episode_frames() {
                candidates.push(vec![value, -(d as f64)]);
            }
            continue;
        }
        for a in DstAction::ALL {
            let Ok(step) = dst_step(spec, &DstState { frames_elapsed: 0, ..s }, a) else { continue };
            let n = DstState { frames_elapsed: 0, ..step.next_state };
            if dist[idx(&n)] == usize::MAX {
                dist[idx(&n)] = d + 1;
                queue.push_back(n);
            }
        }
    }
    nondominated_filter(&candidates).expect("candidate returns share one dimension")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    n_states: usize,
    n_actions: usize,
    n_objectives: usize,
    /// `[state][action][objective]`, flattened.
    values: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

impl TabularQ {
    pub fn new(n_states: usize, n_actions: usize, n_objectives: usize, alpha: f64, gamma: f64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || n_objectives == 0 {
            return Err(invalid("tabular dimensions must be positive"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("alpha = {alpha} is outside (0, 1]")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid(format!("gamma = {gamma} is outside [0, 1]")));
        }
        Ok(Self { n_states, n_actions, n_objectives, values: vec![0.0; n_states * n_actions * n_objectives], alpha, gamma })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn q(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_objectives;
        &self.values[start..start + self.n_objectives]
    }

    pub fn matrix(&self, state: usize) -> QMatrix {
        let start = state * self.n_actions * self.n_objectives;
        let len = self.n_actions * self.n_objectives;
        QMatrix::new(self.n_actions, self.n_objectives, self.values[start..start + len].to_vec())
            .expect("table slice has matrix shape")
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn greedy(&self, state: usize, scalarization: &ScalarizationSpec) -> Result<usize> {
        greedy_action(&crate::scalarize::scalarize(&self.matrix(state), scalarization)?)
    }

    /// One Q-learning update; the bootstrap row is the one the scalarized
    /// greedy policy picks at `next`.
    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: &[f64],
        next: Option<usize>,
        scalarization: &ScalarizationSpec,
    ) -> Result<()> {
        if reward.len() != self.n_objectives {
            return Err(invalid("reward length differs from table objectives"));
        }
        let bootstrap = match next {
            Some(n) => self.q(n, self.greedy(n, scalarization)?).to_vec(),
            None => vec![0.0; self.n_objectives],
        };
        let (alpha, gamma) = (self.alpha, self.gamma);
        let start = (state * self.n_actions + action) * self.n_objectives;
        for (k, q) in self.values[start..start + self.n_objectives].iter_mut().enumerate() {
            *q += alpha * (reward[k] + gamma * bootstrap[k] - *q);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularOutcome {
    pub table: TabularQ,
    pub greedy_return: RewardVector,
}

pub const TABULAR_GAMMA: f64 = 0.9;

/// Trains a tabular agent on DST for `episodes` episodes. ε is held at 1
/// for the first tenth of episodes and annealed linearly to 0 by 92% of
/// them.
pub fn tabular_moq(
    env: &EnvConfig,
    scalarization: &ScalarizationSpec,
    episodes: usize,
    alpha: f64,
    seed: u64,
) -> Result<TabularOutcome> {
    let EnvConfig::Dst { .. } = env else {
        return Err(invalid("tabular learning needs a discrete-state environment"));
    };
    let grid = env.grid_spec()?;
    if scalarization.n_objectives() != 2 {
        return Err(invalid("DST has two objectives"));
    }
    if episodes == 0 {
        return Err(invalid("episodes must be positive"));
    }
    let cell = |s: &DstState| s.row * grid.cols() + s.col;
    let mut table = TabularQ::new(grid.n_cells(), DstAction::ALL.len(), 2, alpha, TABULAR_GAMMA)?;
    let schedule = EpsilonSchedule {
        initial: 1.0,
        end: 0.0,
        anneal_steps: (episodes * 92).div_ceil(100),
        warmup_steps: episodes / 10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for ep in 0..episodes {
        let eps = epsilon_at(ep, &schedule);
        let mut s = dst_reset(&grid);
        loop {
            let scores = crate::scalarize::scalarize(&table.matrix(cell(&s)), scalarization)?;
            let a = epsilon_greedy(&scores, eps, &mut rng)?;
            let step = dst_step(&grid, &s, DstAction::ALL[a])?;
            let next = (!step.terminal).then(|| cell(&step.next_state));
            table.update(cell(&s), a, &step.reward, next, scalarization)?;
            if step.terminal || step.truncated {
                break;
            }
            s = step.next_state;
        }
    }
    let greedy_return = greedy_rollout(&table, &grid, scalarization)?;
    Ok(TabularOutcome { table, greedy_return })
}

fn greedy_rollout(table: &TabularQ, grid: &GridSpec, scalarization: &ScalarizationSpec) -> Result<RewardVector> {
    let mut s = dst_reset(grid);
    let mut ret = vec![0.0; 2];
    loop {
        let a = table.greedy(s.row * grid.cols() + s.col, scalarization)?;
        let step = dst_step(grid, &s, DstAction::ALL[a])?;
        ret[0] += step.reward[0];
        ret[1] += step.reward[1];
        if step.terminal || step.truncated {
            return Ok(ret);
        }
        s = step.next_state;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::dst_layout;

    #[test]
    fn dst3_front() {
        let front = enumerate_dst_front(&dst_layout(3).unwrap());
        assert_eq!(front, vec![vec![1.0, -3.0], vec![26.25, -5.0], vec![100.0, -7.0]]);
    }

    #[test]
    fn dst5_front() {
        let front = enumerate_dst_front(&dst_layout(5).unwrap());
        assert_eq!(
            front,
            vec![vec![1.0, -3.0], vec![5.0, -5.0], vec![17.0, -7.0], vec![49.0, -10.0], vec![100.0, -13.0]]
        );
    }

    #[test]
    fn enumerated_fronts_are_already_nondominated() {
        for w in [3, 5] {
            let front = enumerate_dst_front(&dst_layout(w).unwrap());
            assert_eq!(nondominated_filter(&front).unwrap(), front);
        }
    }

    #[test]
    fn unreachable_within_frame_cap_is_dropped() {
        let grid = dst_layout(3).unwrap().with_max_episode_frames(5).unwrap();
        assert_eq!(enumerate_dst_front(&grid), vec![vec![1.0, -3.0], vec![26.25, -5.0]]);
    }

    #[test]
    fn one_step_fixed_point() {
        let scal = ScalarizationSpec::linear(vec![0.5, 0.5]).unwrap();
        let mut t = TabularQ::new(2, 4, 2, 1.0, 0.0).unwrap();
        t.update(0, 2, &[3.0, -1.0], Some(1), &scal).unwrap();
        assert_eq!(t.q(0, 2), &[3.0, -1.0]);
        assert_eq!(t.q(0, 1), &[0.0, 0.0]);
    }

    #[test]
    fn linear_converges_to_nearest_treasure() {
        let scal = ScalarizationSpec::linear(vec![0.01, 0.99]).unwrap();
        let out = tabular_moq(&EnvConfig::dst(3), &scal, 5000, 0.1, 0).unwrap();
        assert_eq!(out.greedy_return, vec![1.0, -3.0]);
        assert!(out.table.is_finite());
    }

    #[test]
    fn tlo_reaches_middle_and_far_treasures() {
        let mid = ScalarizationSpec::tlo_uniform(vec![13.625]).unwrap();
        let far = ScalarizationSpec::tlo_uniform(vec![63.125]).unwrap();
        assert_eq!(tabular_moq(&EnvConfig::dst(3), &mid, 5000, 0.1, 1).unwrap().greedy_return, vec![26.25, -5.0]);
        assert_eq!(tabular_moq(&EnvConfig::dst(3), &far, 5000, 0.1, 1).unwrap().greedy_return, vec![100.0, -7.0]);
    }

    #[test]
    fn continuous_env_rejected() {
        let scal = ScalarizationSpec::linear(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(tabular_moq(&EnvConfig::mountain_car(), &scal, 10, 0.1, 0).is_err());
    }
}
