//! Three-objective mountain car: minimise time, backward accelerations and
//! forward accelerations. Time and both acceleration penalties are charged
//! once per agent decision; each decision holds its action for
//! `action_repeat` physics frames.

use super::{Action, StepResult};
use crate::error::{invalid, Error, Result};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const START_POSITION: f64 = -0.5;
/// Decision cap per episode.
pub const MC_MAX_DECISIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
    /// Physics frames simulated this episode.
    pub frames_elapsed: usize,
    /// Agent decisions taken this episode.
    pub decisions: usize,
}

impl MountainCarState {
    pub fn at_goal(&self) -> bool {
        self.position >= GOAL_POSITION
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum McAction {
    Backward,
    Null,
    Forward,
}

impl McAction {
    pub const ALL: [McAction; 3] = [Self::Backward, Self::Null, Self::Forward];

    fn thrust(self) -> f64 {
        match self {
            Self::Backward => -1.0,
            Self::Null => 0.0,
            Self::Forward => 1.0,
        }
    }
}

impl Action for McAction {
    const COUNT: usize = 3;

    fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| invalid(format!("mountain-car action index {index} out of range")))
    }

    fn index(self) -> usize {
        self as usize
    }
}

pub fn mc_reset() -> MountainCarState {
    MountainCarState { position: START_POSITION, velocity: 0.0, frames_elapsed: 0, decisions: 0 }
}

/// One physics frame.
pub fn mc_frame(position: f64, velocity: f64, action: McAction) -> (f64, f64) {
    let mut v = velocity + FORCE * action.thrust() - GRAVITY * (3.0 * position).cos();
    v = v.clamp(-MAX_SPEED, MAX_SPEED);
    let p = (position + v).clamp(MIN_POSITION, MAX_POSITION);
    if p <= MIN_POSITION && v < 0.0 {
        v = 0.0;
    }
    (p, v)
}

pub fn mc_step(state: &MountainCarState, action: McAction, repeat: usize) -> Result<StepResult<MountainCarState>> {
    mc_step_capped(state, action, repeat, MC_MAX_DECISIONS)
}

pub fn mc_step_capped(
    state: &MountainCarState,
    action: McAction,
    repeat: usize,
    max_decisions: usize,
) -> Result<StepResult<MountainCarState>> {
    if repeat == 0 {
        return Err(invalid("action repeat must be at least 1"));
    }
    if state.at_goal() || state.decisions >= max_decisions {
        return Err(Error::ContractViolation("cannot step a terminal mountain-car state".into()));
    }
    let mut next = *state;
    for _ in 0..repeat {
        let (p, v) = mc_frame(next.position, next.velocity, action);
        next.position = p;
        next.velocity = v;
        next.frames_elapsed += 1;
        if next.at_goal() {
            break;
        }
    }
    next.decisions += 1;
    let reward = vec![
        -1.0,
        if action == McAction::Backward { -1.0 } else { 0.0 },
        if action == McAction::Forward { -1.0 } else { 0.0 },
    ];
    Ok(StepResult {
        terminal: next.at_goal(),
        truncated: next.decisions >= max_decisions,
        next_state: next,
        reward,
    })
}
