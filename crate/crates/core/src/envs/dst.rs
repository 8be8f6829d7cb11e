//! Deep Sea Treasure: a submarine starts in the top-left cell and searches
//! for treasure. Each column holds one treasure resting on the sea floor;
//! deeper treasures are worth more and take longer to reach.

use super::{Action, StepResult};
use crate::error::{invalid, Error, Result};

/// Episode frame cap for both layouts.
pub const DST_MAX_EPISODE_FRAMES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Treasure {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
    /// Sorted by column, one per column.
    treasures: Vec<Treasure>,
    max_episode_frames: usize,
}

impl GridSpec {
    pub fn new(
        rows: usize,
        cols: usize,
        mut treasures: Vec<Treasure>,
        max_episode_frames: usize,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("grid must have at least one row and column"));
        }
        if max_episode_frames == 0 {
            return Err(invalid("max_episode_frames must be positive"));
        }
        treasures.sort_by_key(|t| t.col);
        if treasures.len() != cols || treasures.iter().enumerate().any(|(c, t)| t.col != c) {
            return Err(invalid("exactly one treasure per column is required"));
        }
        for t in &treasures {
            if t.row >= rows {
                return Err(invalid(format!("treasure at ({}, {}) is out of bounds", t.row, t.col)));
            }
            if !t.value.is_finite() {
                return Err(invalid("treasure values must be finite"));
            }
        }
        for pair in treasures.windows(2) {
            if pair[1].row <= pair[0].row {
                return Err(invalid("treasure depth must strictly increase with column"));
            }
            if pair[1].value <= pair[0].value {
                return Err(invalid("treasure value must strictly increase with column"));
            }
        }
        Ok(Self { rows, cols, treasures, max_episode_frames })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn treasures(&self) -> &[Treasure] {
        &self.treasures
    }

    pub fn max_episode_frames(&self) -> usize {
        self.max_episode_frames
    }

    pub fn with_max_episode_frames(mut self, frames: usize) -> Result<Self> {
        if frames == 0 {
            return Err(invalid("max_episode_frames must be positive"));
        }
        self.max_episode_frames = frames;
        Ok(self)
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Row of the treasure in `col`; cells below it are sea floor.
    pub fn depth(&self, col: usize) -> usize {
        self.treasures[col].row
    }

    pub fn is_accessible(&self, row: usize, col: usize) -> bool {
        col < self.cols && row < self.rows && row <= self.depth(col)
    }

    pub fn treasure_at(&self, row: usize, col: usize) -> Option<f64> {
        self.treasures
            .get(col)
            .filter(|t| t.row == row)
            .map(|t| t.value)
    }

    pub fn is_terminal(&self, state: &DstState) -> bool {
        self.treasure_at(state.row, state.col).is_some()
            || state.frames_elapsed >= self.max_episode_frames
    }
}

/// Standard layouts. Treasure in column `c` sits at depth `d` such that
/// `c + d` equals the optimal step count of the matching front point.
pub fn dst_layout(width: usize) -> Result<GridSpec> {
    let (rows, placements): (usize, &[(usize, f64)]) = match width {
        3 => (6, &[(3, 1.0), (4, 26.25), (5, 100.0)]),
        5 => (10, &[(3, 1.0), (4, 5.0), (5, 17.0), (7, 49.0), (9, 100.0)]),
        other => return Err(invalid(format!("unsupported DST width {other}; expected 3 or 5"))),
    };
    let treasures = placements
        .iter()
        .enumerate()
        .map(|(col, &(row, value))| Treasure { row, col, value })
        .collect();
    GridSpec::new(rows, width, treasures, DST_MAX_EPISODE_FRAMES)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DstState {
    pub row: usize,
    pub col: usize,
    pub frames_elapsed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DstAction {
    Up,
    Down,
    Left,
    Right,
}

impl DstAction {
    pub const ALL: [DstAction; 4] = [Self::Up, Self::Down, Self::Left, Self::Right];
}

impl Action for DstAction {
    const COUNT: usize = 4;

    fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| invalid(format!("DST action index {index} out of range")))
    }

    fn index(self) -> usize {
        self as usize
    }
}

pub fn dst_reset(_spec: &GridSpec) -> DstState {
    DstState { row: 0, col: 0, frames_elapsed: 0 }
}

pub fn dst_step(spec: &GridSpec, state: &DstState, action: DstAction) -> Result<StepResult<DstState>> {
    if !spec.is_accessible(state.row, state.col) {
        return Err(Error::ContractViolation(format!(
            "state ({}, {}) is not an accessible cell",
            state.row, state.col
        )));
    }
    if spec.is_terminal(state) {
        return Err(Error::ContractViolation("cannot step a terminal DST state".into()));
    }
    let (row, col) = (state.row as isize, state.col as isize);
    let (tr, tc) = match action {
        DstAction::Up => (row - 1, col),
        DstAction::Down => (row + 1, col),
        DstAction::Left => (row, col - 1),
        DstAction::Right => (row, col + 1),
    };
    let (row, col) = if tr >= 0 && tc >= 0 && spec.is_accessible(tr as usize, tc as usize) {
        (tr as usize, tc as usize)
    } else {
        (state.row, state.col)
    };
    let next = DstState { row, col, frames_elapsed: state.frames_elapsed + 1 };
    let treasure = spec.treasure_at(row, col);
    Ok(StepResult {
        next_state: next,
        reward: vec![treasure.unwrap_or(0.0), -1.0],
        terminal: treasure.is_some(),
        truncated: next.frames_elapsed >= spec.max_episode_frames,
    })
}
