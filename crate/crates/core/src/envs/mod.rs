//! Deterministic vector-reward benchmark environments.

pub mod dst;
pub mod encoding;
pub mod mountain_car;

pub use dst::{dst_layout, dst_reset, dst_step, DstAction, DstState, GridSpec, Treasure};
pub use encoding::{encode_dst, encode_mc, EncodingMode, ImageDims, StateEncoding};
pub use mountain_car::{mc_reset, mc_step, McAction, MountainCarState};

use crate::error::{invalid, Error, Result};
use crate::net::InputShape;

/// Per-objective reward signal; every objective is maximised.
pub type RewardVector = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<S> {
    pub next_state: S,
    pub reward: RewardVector,
    pub terminal: bool,
    pub truncated: bool,
}

pub trait Action: Sized + Copy {
    const COUNT: usize;
    fn from_index(index: usize) -> Result<Self>;
    fn index(self) -> usize;
}

/// Outcome of one agent decision.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub reward: RewardVector,
    pub terminal: bool,
    pub truncated: bool,
}

impl EnvStep {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// Stateful wrapper used by the training loop.
pub trait Environment: Send {
    fn n_actions(&self) -> usize;
    fn n_objectives(&self) -> usize;
    fn input_shape(&self) -> InputShape;
    fn reset(&mut self);
    fn observe(&self) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<EnvStep>;
    /// Physics frames elapsed in the current episode.
    fn frames_elapsed(&self) -> usize;
}

fn shape_for(encoding: &StateEncoding, flat_len: usize) -> InputShape {
    match (encoding.mode, encoding.image) {
        (EncodingMode::Image, Some(d)) => InputShape::Image { channels: 1, height: d.height, width: d.width },
        _ => InputShape::Flat(flat_len),
    }
}

pub struct DeepSeaTreasure {
    spec: GridSpec,
    encoding: StateEncoding,
    action_repeat: usize,
    state: DstState,
}

impl DeepSeaTreasure {
    pub fn new(spec: GridSpec, encoding: StateEncoding, action_repeat: usize) -> Result<Self> {
        encoding.dst_len(&spec)?;
        if action_repeat == 0 {
            return Err(invalid("action repeat must be at least 1"));
        }
        let state = dst_reset(&spec);
        Ok(Self { spec, encoding, action_repeat, state })
    }

    pub fn state(&self) -> DstState {
        self.state
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
}

impl Environment for DeepSeaTreasure {
    fn n_actions(&self) -> usize {
        DstAction::COUNT
    }

    fn n_objectives(&self) -> usize {
        2
    }

    fn input_shape(&self) -> InputShape {
        shape_for(&self.encoding, self.encoding.dst_len(&self.spec).unwrap_or(0))
    }

    fn reset(&mut self) {
        self.state = dst_reset(&self.spec);
    }

    fn observe(&self) -> Vec<f64> {
        encode_dst(&self.spec, &self.state, &self.encoding).expect("encoding validated at construction")
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let action = DstAction::from_index(action)?;
        let mut out = EnvStep { reward: vec![0.0; 2], terminal: false, truncated: false };
        for _ in 0..self.action_repeat {
            let r = dst_step(&self.spec, &self.state, action)?;
            self.state = r.next_state;
            out.reward[0] += r.reward[0];
            out.reward[1] += r.reward[1];
            out.terminal = r.terminal;
            out.truncated = r.truncated;
            if out.done() {
                break;
            }
        }
        Ok(out)
    }

    fn frames_elapsed(&self) -> usize {
        self.state.frames_elapsed
    }
}

pub struct MountainCar {
    encoding: StateEncoding,
    action_repeat: usize,
    max_decisions: usize,
    state: MountainCarState,
}

impl MountainCar {
    pub fn new(encoding: StateEncoding, action_repeat: usize, max_decisions: usize) -> Result<Self> {
        encoding.mc_len()?;
        if action_repeat == 0 || max_decisions == 0 {
            return Err(invalid("action repeat and decision cap must be positive"));
        }
        Ok(Self { encoding, action_repeat, max_decisions, state: mc_reset() })
    }

    pub fn state(&self) -> MountainCarState {
        self.state
    }
}

impl Environment for MountainCar {
    fn n_actions(&self) -> usize {
        McAction::COUNT
    }

    fn n_objectives(&self) -> usize {
        3
    }

    fn input_shape(&self) -> InputShape {
        shape_for(&self.encoding, self.encoding.mc_len().unwrap_or(0))
    }

    fn reset(&mut self) {
        self.state = mc_reset();
    }

    fn observe(&self) -> Vec<f64> {
        encode_mc(&self.state, &self.encoding).expect("encoding validated at construction")
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let action = McAction::from_index(action)?;
        let r = mountain_car::mc_step_capped(&self.state, action, self.action_repeat, self.max_decisions)?;
        self.state = r.next_state;
        Ok(EnvStep { reward: r.reward, terminal: r.terminal, truncated: r.truncated })
    }

    fn frames_elapsed(&self) -> usize {
        self.state.frames_elapsed
    }
}

/// Environment selection; enough to build fresh instances for training and
/// for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Dst { width: usize, max_frames: usize, encoding: StateEncoding },
    MountainCar { max_decisions: usize, encoding: StateEncoding },
}

impl EnvConfig {
    pub fn dst(width: usize) -> Self {
        Self::Dst { width, max_frames: dst::DST_MAX_EPISODE_FRAMES, encoding: StateEncoding::one_hot() }
    }

    pub fn mountain_car() -> Self {
        Self::MountainCar { max_decisions: mountain_car::MC_MAX_DECISIONS, encoding: StateEncoding::vector() }
    }

    pub fn n_objectives(&self) -> usize {
        match self {
            Self::Dst { .. } => 2,
            Self::MountainCar { .. } => 3,
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        match self {
            Self::Dst { width, max_frames, .. } => dst_layout(*width)?.with_max_episode_frames(*max_frames),
            Self::MountainCar { .. } => Err(Error::Unsupported("mountain car has no grid".into())),
        }
    }

    pub fn build(&self, action_repeat: usize) -> Result<Box<dyn Environment>> {
        Ok(match self {
            Self::Dst { encoding, .. } => Box::new(DeepSeaTreasure::new(self.grid_spec()?, *encoding, action_repeat)?),
            Self::MountainCar { max_decisions, encoding } => {
                Box::new(MountainCar::new(*encoding, action_repeat, *max_decisions)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rollout(env: &mut dyn Environment, actions: &[usize]) -> Vec<(Vec<f64>, EnvStep)> {
        env.reset();
        let mut out = Vec::new();
        for &a in actions {
            let step = env.step(a).unwrap();
            let done = step.done();
            out.push((env.observe(), step));
            if done {
                break;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn dst_rewards_and_bounds(actions in prop::collection::vec(0usize..4, 1..150), width in prop::sample::select(vec![3usize, 5])) {
            let cfg = EnvConfig::dst(width);
            let spec = cfg.grid_spec().unwrap();
            let mut env = DeepSeaTreasure::new(spec.clone(), StateEncoding::one_hot(), 1).unwrap();
            let mut time = 0.0;
            let mut steps = 0.0;
            for &a in &actions {
                let r = env.step(a).unwrap();
                let s = env.state();
                prop_assert!(spec.is_accessible(s.row, s.col));
                prop_assert_eq!(r.reward[1], -1.0);
                if r.terminal {
                    prop_assert_eq!(Some(r.reward[0]), spec.treasure_at(s.row, s.col));
                } else {
                    prop_assert_eq!(r.reward[0], 0.0);
                }
                let obs = env.observe();
                prop_assert_eq!(obs.iter().sum::<f64>(), 1.0);
                time += r.reward[1];
                steps += 1.0;
                if r.done() { break; }
            }
            prop_assert_eq!(time, -steps);
        }

        #[test]
        fn mc_bounds_and_accounting(actions in prop::collection::vec(0usize..3, 1..120)) {
            let mut env = MountainCar::new(StateEncoding::vector(), 5, 100).unwrap();
            let mut ret = [0.0f64; 3];
            let (mut back, mut fwd, mut decisions) = (0.0, 0.0, 0.0);
            for &a in &actions {
                let r = env.step(a).unwrap();
                let s = env.state();
                prop_assert!((-1.2..=0.6).contains(&s.position));
                prop_assert!((-0.07..=0.07).contains(&s.velocity));
                for (acc, x) in ret.iter_mut().zip(&r.reward) { *acc += x; }
                decisions += 1.0;
                if a == 0 { back += 1.0; }
                if a == 2 { fwd += 1.0; }
                if r.done() { break; }
            }
            prop_assert_eq!(ret, [-decisions, -back, -fwd]);
        }

        #[test]
        fn environments_are_deterministic(actions in prop::collection::vec(0usize..3, 1..60)) {
            for cfg in [EnvConfig::dst(5), EnvConfig::mountain_car()] {
                let mut a = cfg.build(if matches!(cfg, EnvConfig::Dst { .. }) { 1 } else { 5 }).unwrap();
                let mut b = cfg.build(if matches!(cfg, EnvConfig::Dst { .. }) { 1 } else { 5 }).unwrap();
                let ra = rollout(a.as_mut(), &actions);
                let rb = rollout(b.as_mut(), &actions);
                prop_assert_eq!(ra, rb);
            }
        }
    }

    #[test]
    fn built_envs_report_dimensions() {
        let env = EnvConfig::dst(3).build(1).unwrap();
        assert_eq!((env.n_actions(), env.n_objectives()), (4, 2));
        assert_eq!(env.input_shape(), InputShape::Flat(18));
        let env = EnvConfig::mountain_car().build(5).unwrap();
        assert_eq!((env.n_actions(), env.n_objectives()), (3, 3));
        assert_eq!(env.input_shape(), InputShape::Flat(2));
        let cfg = EnvConfig::Dst { width: 3, max_frames: 100, encoding: StateEncoding::image(84, 84) };
        assert_eq!(
            cfg.build(1).unwrap().input_shape(),
            InputShape::Image { channels: 1, height: 84, width: 84 }
        );
        let bad = EnvConfig::MountainCar { max_decisions: 100, encoding: StateEncoding::one_hot() };
        assert!(bad.build(5).is_err());
    }
}
