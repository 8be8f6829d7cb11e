//! Multi-objective DQN agent: one network head per objective, action
//! selection through a scalarization, per-objective TD targets from a
//! periodically synchronised target network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::{EnvConfig, RewardVector};
use crate::error::{invalid, Error, Result};
use crate::net::{sync_target, Gradients, InputShape, NetworkSpec, Parameters, RmsProp};
use crate::replay::{ReplayBuffer, Transition};
use crate::scalarize::{epsilon_greedy, greedy_action, scalarize, QMatrix, ScalarizationSpec};

/// How the bootstrap action is chosen at the next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// The action the scalarized greedy policy would take under θ′.
    ScalarizedGreedy,
    /// An independent maximum per objective.
    PerObjectiveMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub end: f64,
    pub anneal_steps: usize,
    /// ε stays at `initial` while fewer decisions than this have been taken.
    pub warmup_steps: usize,
}

/// Linear from `initial` at step 0 to `end` at `anneal_steps`, clamped
/// afterwards, held at `initial` during warmup.
pub fn epsilon_at(step: usize, schedule: &EpsilonSchedule) -> f64 {
    if step < schedule.warmup_steps {
        return schedule.initial;
    }
    if schedule.anneal_steps == 0 || step >= schedule.anneal_steps {
        return schedule.end;
    }
    let frac = step as f64 / schedule.anneal_steps as f64;
    schedule.initial + (schedule.end - schedule.initial) * frac
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    pub epsilon_anneal_steps: usize,
    pub target_sync_period: usize,
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub training_steps: usize,
    pub action_repeat: usize,
    pub scalarization: ScalarizationSpec,
    pub target_mode: TargetMode,
    /// Hidden dense widths for flat inputs; image inputs use the
    /// three-convolution reference network.
    pub hidden: Vec<usize>,
}

impl AgentConfig {
    fn table1(
        anneal: usize,
        replay: usize,
        warmup: usize,
        training: usize,
        repeat: usize,
        scalarization: ScalarizationSpec,
    ) -> Self {
        Self {
            gamma: 0.9,
            learning_rate: crate::net::DEFAULT_LEARNING_RATE,
            rms_decay: crate::net::DEFAULT_DECAY,
            rms_epsilon: crate::net::DEFAULT_EPSILON,
            epsilon_initial: 1.0,
            epsilon_final: 0.0,
            epsilon_anneal_steps: anneal,
            target_sync_period: 1000,
            warmup_steps: warmup,
            batch_size: 32,
            replay_capacity: replay,
            training_steps: training,
            action_repeat: repeat,
            scalarization,
            target_mode: TargetMode::ScalarizedGreedy,
            hidden: vec![64, 64],
        }
    }

    pub fn dst3(scalarization: ScalarizationSpec) -> Self {
        Self::table1(46_000, 50_000, 5_000, 50_000, 1, scalarization)
    }

    pub fn dst5(scalarization: ScalarizationSpec) -> Self {
        Self::table1(190_000, 100_000, 10_000, 200_000, 1, scalarization)
    }

    pub fn mountain_car(scalarization: ScalarizationSpec) -> Self {
        Self::table1(200_000, 20_000, 2_000, 200_000, 5, scalarization)
    }

    /// Defaults for the given environment.
    pub fn defaults_for(env: &EnvConfig, scalarization: ScalarizationSpec) -> Result<Self> {
        match env {
            EnvConfig::Dst { width: 3, .. } => Ok(Self::dst3(scalarization)),
            EnvConfig::Dst { width: 5, .. } => Ok(Self::dst5(scalarization)),
            EnvConfig::Dst { width, .. } => Err(invalid(format!("no defaults for DST width {width}"))),
            EnvConfig::MountainCar { .. } => Ok(Self::mountain_car(scalarization)),
        }
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            initial: self.epsilon_initial,
            end: self.epsilon_final,
            anneal_steps: self.epsilon_anneal_steps,
            warmup_steps: self.warmup_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {x} is outside [0, 1]")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("epsilon_initial", self.epsilon_initial)?;
        unit("epsilon_final", self.epsilon_final)?;
        unit("rms_decay", self.rms_decay)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        if self.rms_epsilon.is_nan() || self.rms_epsilon <= 0.0 {
            return Err(invalid("rms_epsilon must be positive"));
        }
        let counts = [
            ("epsilon_anneal_steps", self.epsilon_anneal_steps),
            ("target_sync_period", self.target_sync_period),
            ("warmup_steps", self.warmup_steps),
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("training_steps", self.training_steps),
            ("action_repeat", self.action_repeat),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.batch_size > self.replay_capacity {
            return Err(invalid("batch_size exceeds replay_capacity"));
        }
        if self.training_steps < self.warmup_steps {
            return Err(invalid("training_steps must be at least warmup_steps"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden layer widths must be positive"));
        }
        Ok(())
    }

    pub fn network_spec(&self, input: InputShape, n_objectives: usize, n_actions: usize) -> Result<NetworkSpec> {
        match input {
            InputShape::Flat(n) => NetworkSpec::mlp(n, &self.hidden, n_objectives, n_actions),
            InputShape::Image { .. } => NetworkSpec::image_reference(input, n_objectives, n_actions),
        }
    }
}

/// Per-objective bootstrap targets, `batch × n_objectives` row-major.
pub fn compute_targets(
    spec: &NetworkSpec,
    batch: &[&Transition],
    target_params: &Parameters,
    config: &AgentConfig,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(invalid("cannot compute targets for an empty batch"));
    }
    let n_obj = spec.n_objectives();
    let next: Vec<f64> = batch.iter().flat_map(|t| t.next_state.iter().copied()).collect();
    let pass = spec.forward_batch(target_params, &next, batch.len())?;
    let mut targets = Vec::with_capacity(batch.len() * n_obj);
    for (b, t) in batch.iter().enumerate() {
        if t.reward.len() != n_obj {
            return Err(invalid("reward length does not match objective count"));
        }
        if t.terminal {
            targets.extend_from_slice(&t.reward);
            continue;
        }
        let q = spec.q_matrix(&pass, b)?;
        let bootstrap = bootstrap_values(&q, &config.scalarization, config.target_mode)?;
        targets.extend(t.reward.iter().zip(bootstrap).map(|(r, v)| r + config.gamma * v));
    }
    Ok(targets)
}

fn bootstrap_values(q: &QMatrix, scalarization: &ScalarizationSpec, mode: TargetMode) -> Result<RewardVector> {
    Ok(match mode {
        TargetMode::ScalarizedGreedy => {
            let a = greedy_action(&scalarize(q, scalarization)?)?;
            q.row(a).to_vec()
        }
        TargetMode::PerObjectiveMax => (0..q.n_objectives())
            .map(|i| (0..q.n_actions()).map(|a| q.get(a, i)).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
    })
}

/// Mean over the batch of Σᵢ (targetᵢ − Qᵢ(s, a; θ))² and its gradient.
pub fn td_loss(
    spec: &NetworkSpec,
    params: &Parameters,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<(f64, Gradients)> {
    let n = batch.len();
    let (n_obj, n_act) = (spec.n_objectives(), spec.n_actions());
    if n == 0 || targets.len() != n * n_obj {
        return Err(invalid("targets do not match batch"));
    }
    let states: Vec<f64> = batch.iter().flat_map(|t| t.state.iter().copied()).collect();
    let pass = spec.forward_batch(params, &states, n)?;
    let out_len = spec.output_len();
    let mut grad = vec![0.0; n * out_len];
    let mut loss = 0.0;
    for (b, t) in batch.iter().enumerate() {
        if t.action >= n_act {
            return Err(invalid(format!("action {} out of range", t.action)));
        }
        let out = pass.sample_output(b);
        for i in 0..n_obj {
            let idx = i * n_act + t.action;
            let err = out[idx] - targets[b * n_obj + i];
            loss += err * err;
            grad[b * out_len + idx] = 2.0 * err / n as f64;
        }
    }
    let grads = spec.backward(params, &pass, &grad)?;
    Ok((loss / n as f64, grads))
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    spec: NetworkSpec,
    online: Parameters,
    target: Parameters,
    optimizer: RmsProp,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    /// Environment decisions recorded; drives ε.
    decisions: usize,
    /// Gradient updates performed; drives target sync.
    updates: usize,
}

impl Agent {
    pub fn new(config: AgentConfig, spec: NetworkSpec, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.scalarization.n_objectives() != spec.n_objectives() {
            return Err(invalid("scalarization and network disagree on objective count"));
        }
        let online = spec.init_params(seed);
        let target = online.clone();
        let optimizer = RmsProp::new(&online, config.learning_rate, config.rms_decay, config.rms_epsilon);
        let replay = ReplayBuffer::new(config.replay_capacity);
        // Separate stream from the parameter initialisation.
        let rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        Ok(Self { config, spec, online, target, optimizer, replay, rng, decisions: 0, updates: 0 })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn online(&self) -> &Parameters {
        &self.online
    }

    pub fn target(&self) -> &Parameters {
        &self.target
    }

    pub fn optimizer(&self) -> &RmsProp {
        &self.optimizer
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn decisions(&self) -> usize {
        self.decisions
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Replaces both parameter sets (online and target).
    pub fn set_params(&mut self, params: Parameters) -> Result<()> {
        self.spec.check_params(&params)?;
        self.online = params;
        self.target = self.online.clone();
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(self.decisions, &self.config.epsilon_schedule())
    }

    pub fn q_values(&self, features: &[f64]) -> Result<QMatrix> {
        self.spec.q_values(&self.online, features)
    }

    /// Exploration-free action; does not touch the agent's RNG.
    pub fn greedy_action(&self, features: &[f64]) -> Result<usize> {
        greedy_action(&scalarize(&self.q_values(features)?, &self.config.scalarization)?)
    }

    pub fn select_action(&mut self, features: &[f64]) -> Result<usize> {
        let scores = scalarize(&self.q_values(features)?, &self.config.scalarization)?;
        let eps = self.epsilon();
        epsilon_greedy(&scores, eps, &mut self.rng)
    }

    /// Stores a transition and counts one decision.
    pub fn observe(&mut self, transition: Transition) {
        self.replay.push(transition);
        self.decisions += 1;
    }

    pub fn ready_to_train(&self) -> bool {
        self.replay.len() >= self.config.warmup_steps.max(self.config.batch_size)
    }

    pub fn train_step(&mut self) -> Result<f64> {
        if !self.ready_to_train() {
            return Err(Error::NotReady(format!(
                "replay holds {} transitions; training starts at {}",
                self.replay.len(),
                self.config.warmup_steps.max(self.config.batch_size)
            )));
        }
        let batch = self.replay.sample(self.config.batch_size, &mut self.rng)?;
        let targets = compute_targets(&self.spec, &batch, &self.target, &self.config)?;
        let (loss, grads) = td_loss(&self.spec, &self.online, &batch, &targets)?;
        self.optimizer.update(&mut self.online, &grads)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync_period) {
            if !self.online.is_finite() {
                return Err(Error::NonFinite(format!("online parameters at update {}", self.updates)));
            }
            sync_target(&self.online, &mut self.target)?;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{LayerParams, NetworkSpec};

    fn linear(w: &[f64]) -> ScalarizationSpec {
        ScalarizationSpec::linear(w.to_vec()).unwrap()
    }

    /// Head-only network on a one-hot input of length 3 whose weights make
    /// row `a` of Q equal to `rows[a]` when the input is `e_0`.
    fn scripted(rows: &[[f64; 2]]) -> (NetworkSpec, Parameters) {
        let n_act = rows.len();
        let spec = NetworkSpec::mlp(3, &[], 2, n_act).unwrap();
        let mut weights = vec![0.0; 2 * n_act * 3];
        for (a, row) in rows.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                weights[(i * n_act + a) * 3] = v;
            }
        }
        let params = Parameters::from_layers(vec![LayerParams { weights, bias: vec![0.0; 2 * n_act] }]);
        (spec, params)
    }

    fn tiny_config(scalarization: ScalarizationSpec) -> AgentConfig {
        AgentConfig {
            warmup_steps: 1,
            batch_size: 1,
            replay_capacity: 10,
            training_steps: 10,
            epsilon_anneal_steps: 1,
            epsilon_initial: 0.0,
            hidden: vec![],
            ..AgentConfig::dst3(scalarization)
        }
    }

    #[test]
    fn epsilon_schedule_points() {
        let s = AgentConfig::dst3(linear(&[0.5, 0.5])).epsilon_schedule();
        assert_eq!(epsilon_at(0, &s), 1.0);
        assert_eq!(epsilon_at(46_000, &s), 0.0);
        assert_eq!(epsilon_at(60_000, &s), 0.0);
        assert_eq!(epsilon_at(23_000, &s), 0.5);
        assert_eq!(epsilon_at(4_999, &s), 1.0);
        assert!((epsilon_at(5_000, &s) - (1.0 - 5.0 / 46.0)).abs() < 1e-12);
    }

    #[test]
    fn select_action_follows_scalarization() {
        let rows = [[1.0, -3.0], [26.25, -5.0], [100.0, -7.0]];
        let (spec, params) = scripted(&rows);
        let x = [1.0, 0.0, 0.0];
        let pick = |s: ScalarizationSpec| {
            let mut agent = Agent::new(tiny_config(s), spec.clone(), 0).unwrap();
            agent.set_params(params.clone()).unwrap();
            assert_eq!(agent.epsilon(), 0.0);
            agent.select_action(&x).unwrap()
        };
        assert_eq!(pick(linear(&[0.5, 0.5])), 2);
        assert_eq!(pick(ScalarizationSpec::tlo(vec![20.0], vec![0.5, 0.5]).unwrap()), 1);
        assert_eq!(pick(linear(&[0.01, 0.99])), 0);
    }

    fn transition(reward: Vec<f64>, terminal: bool) -> Transition {
        Transition { state: vec![0.0, 1.0, 0.0], action: 1, reward, next_state: vec![1.0, 0.0, 0.0], terminal }
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let (spec, params) = scripted(&[[0.0, -2.0], [10.0, -4.0]]);
        let cfg = tiny_config(linear(&[0.5, 0.5]));
        let t = transition(vec![1.0, -1.0], true);
        assert_eq!(compute_targets(&spec, &[&t], &params, &cfg).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn gamma_zero_kills_bootstrap() {
        let (spec, params) = scripted(&[[0.0, -2.0], [10.0, -4.0]]);
        let cfg = AgentConfig { gamma: 0.0, ..tiny_config(linear(&[0.5, 0.5])) };
        let t = transition(vec![0.0, -1.0], false);
        assert_eq!(compute_targets(&spec, &[&t], &params, &cfg).unwrap(), vec![0.0, -1.0]);
    }

    #[test]
    fn scalarized_greedy_bootstrap() {
        let (spec, params) = scripted(&[[0.0, -2.0], [10.0, -4.0]]);
        let cfg = tiny_config(linear(&[0.5, 0.5]));
        let t = transition(vec![0.0, -1.0], false);
        let got = compute_targets(&spec, &[&t], &params, &cfg).unwrap();
        // scores -1 vs 3 → action 1; (0 + 0.9·10, -1 + 0.9·(-4))
        assert!((got[0] - 9.0).abs() < 1e-12 && (got[1] + 4.6).abs() < 1e-12, "{got:?}");

        let cfg = AgentConfig { target_mode: TargetMode::PerObjectiveMax, ..cfg };
        let got = compute_targets(&spec, &[&t], &params, &cfg).unwrap();
        // independent maxima: 10 and -2
        assert!((got[0] - 9.0).abs() < 1e-12 && (got[1] + 2.8).abs() < 1e-12, "{got:?}");
    }

    #[test]
    fn tlo_above_max_matches_linear_targets() {
        let (spec, params) = scripted(&[[0.0, -2.0], [10.0, -4.0], [3.0, -1.0]]);
        let t = transition(vec![0.5, -1.0], false);
        let lin = compute_targets(&spec, &[&t], &params, &tiny_config(linear(&[0.3, 0.7]))).unwrap();
        let tlo = ScalarizationSpec::tlo(vec![10.0], vec![0.3, 0.7]).unwrap();
        assert_eq!(compute_targets(&spec, &[&t], &params, &tiny_config(tlo)).unwrap(), lin);
    }

    #[test]
    fn single_terminal_loss_is_two() {
        let spec = NetworkSpec::mlp(3, &[], 2, 2).unwrap();
        let params = spec.zero_params();
        let t = transition(vec![1.0, -1.0], true);
        let cfg = tiny_config(linear(&[0.5, 0.5]));
        let targets = compute_targets(&spec, &[&t], &params, &cfg).unwrap();
        let (loss, grads) = td_loss(&spec, &params, &[&t], &targets).unwrap();
        assert_eq!(loss, 2.0);
        // only the taken action's outputs (indices 1 and 3) carry gradient
        let bias = &grads.layers[0].bias;
        assert_eq!(bias[0], 0.0);
        assert_eq!(bias[2], 0.0);
        assert_eq!(bias[1], -2.0);
        assert_eq!(bias[3], 2.0);
    }

    #[test]
    fn zero_td_error_leaves_params() {
        let (spec, params) = scripted(&[[0.0, 0.0], [0.0, 0.0]]);
        let mut agent = Agent::new(tiny_config(linear(&[0.5, 0.5])), spec, 0).unwrap();
        agent.set_params(params.clone()).unwrap();
        agent.observe(transition(vec![0.0, 0.0], true));
        let loss = agent.train_step().unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(agent.online(), &params);
    }

    #[test]
    fn not_ready_before_warmup() {
        let spec = NetworkSpec::mlp(3, &[4], 2, 2).unwrap();
        let cfg = AgentConfig { warmup_steps: 3, ..tiny_config(linear(&[0.5, 0.5])) };
        let mut agent = Agent::new(cfg, spec, 0).unwrap();
        agent.observe(transition(vec![0.0, -1.0], false));
        assert!(matches!(agent.train_step(), Err(Error::NotReady(_))));
    }

    #[test]
    fn target_syncs_on_period_only() {
        let spec = NetworkSpec::mlp(3, &[4], 2, 2).unwrap();
        let cfg = AgentConfig { target_sync_period: 3, ..tiny_config(linear(&[0.5, 0.5])) };
        let mut agent = Agent::new(cfg, spec, 1).unwrap();
        for _ in 0..4 {
            agent.observe(transition(vec![1.0, -1.0], false));
        }
        let start = agent.target().clone();
        for k in 1..=7 {
            agent.train_step().unwrap();
            assert_eq!(agent.updates(), k);
            if k % 3 == 0 {
                assert_eq!(agent.target(), agent.online());
            } else {
                assert_ne!(agent.target(), agent.online());
                if k < 3 {
                    assert_eq!(agent.target(), &start);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let base = AgentConfig::dst3(linear(&[0.5, 0.5]));
        assert!(base.validate().is_ok());
        assert!(AgentConfig { gamma: 1.5, ..base.clone() }.validate().is_err());
        assert!(AgentConfig { batch_size: 0, ..base.clone() }.validate().is_err());
        assert!(AgentConfig { training_steps: 10, ..base.clone() }.validate().is_err());
        assert!(AgentConfig { epsilon_final: -0.1, ..base }.validate().is_err());
    }
}
