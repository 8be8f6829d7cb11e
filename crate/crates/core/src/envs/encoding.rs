//! Feature encodings for environment states: one-hot cells, scaled vectors
//! and grayscale renderings.

use super::dst::{DstState, GridSpec};
use super::mountain_car::{MountainCarState, MAX_POSITION, MAX_SPEED, MIN_POSITION};
use crate::error::{invalid, Result};

pub const DEFAULT_IMAGE_SIZE: usize = 84;

const FLOOR: f64 = 0.0;
const WATER: f64 = 0.25;
const TREASURE: f64 = 0.6;
const TRACK: f64 = 0.5;
const AGENT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingMode {
    OneHot,
    Vector,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageDims {
    pub height: usize,
    pub width: usize,
}

impl Default for ImageDims {
    fn default() -> Self {
        Self { height: DEFAULT_IMAGE_SIZE, width: DEFAULT_IMAGE_SIZE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateEncoding {
    pub mode: EncodingMode,
    /// Required when `mode` is `Image`.
    pub image: Option<ImageDims>,
}

impl StateEncoding {
    pub fn one_hot() -> Self {
        Self { mode: EncodingMode::OneHot, image: None }
    }

    pub fn vector() -> Self {
        Self { mode: EncodingMode::Vector, image: None }
    }

    pub fn image(height: usize, width: usize) -> Self {
        Self { mode: EncodingMode::Image, image: Some(ImageDims { height, width }) }
    }

    fn image_dims(&self) -> Result<ImageDims> {
        match self.image {
            Some(d) if d.height > 0 && d.width > 0 => Ok(d),
            Some(_) => Err(invalid("image dimensions must be positive")),
            None => Err(invalid("image encoding requires configured dimensions")),
        }
    }

    /// Length of the produced feature vector for a DST grid.
    pub fn dst_len(&self, spec: &GridSpec) -> Result<usize> {
        Ok(match self.mode {
            EncodingMode::OneHot => spec.n_cells(),
            EncodingMode::Vector => 2,
            EncodingMode::Image => {
                let d = self.image_dims()?;
                d.height * d.width
            }
        })
    }

    pub fn mc_len(&self) -> Result<usize> {
        match self.mode {
            EncodingMode::OneHot => Err(invalid("one-hot encoding is undefined for mountain car")),
            EncodingMode::Vector => Ok(2),
            EncodingMode::Image => {
                let d = self.image_dims()?;
                Ok(d.height * d.width)
            }
        }
    }
}

fn scale_index(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * i as f64 / (n - 1) as f64 - 1.0
    }
}

pub fn encode_dst(spec: &GridSpec, state: &DstState, encoding: &StateEncoding) -> Result<Vec<f64>> {
    if !spec.is_accessible(state.row, state.col) {
        return Err(invalid(format!("({}, {}) is not an accessible cell", state.row, state.col)));
    }
    match encoding.mode {
        EncodingMode::OneHot => {
            let mut v = vec![0.0; spec.n_cells()];
            v[state.row * spec.cols() + state.col] = 1.0;
            Ok(v)
        }
        EncodingMode::Vector => {
            Ok(vec![scale_index(state.row, spec.rows()), scale_index(state.col, spec.cols())])
        }
        EncodingMode::Image => {
            let d = encoding.image_dims()?;
            Ok(render_dst(spec, state, d))
        }
    }
}

pub fn encode_mc(state: &MountainCarState, encoding: &StateEncoding) -> Result<Vec<f64>> {
    match encoding.mode {
        EncodingMode::OneHot => Err(invalid("one-hot encoding is undefined for mountain car")),
        EncodingMode::Vector => Ok(vec![(state.position + 0.3) / 0.9, state.velocity / MAX_SPEED]),
        EncodingMode::Image => {
            let d = encoding.image_dims()?;
            Ok(render_mc(state, d))
        }
    }
}

fn render_dst(spec: &GridSpec, state: &DstState, dims: ImageDims) -> Vec<f64> {
    let mut img = vec![0.0; dims.height * dims.width];
    for y in 0..dims.height {
        let row = y * spec.rows() / dims.height;
        for x in 0..dims.width {
            let col = x * spec.cols() / dims.width;
            img[y * dims.width + x] = if row == state.row && col == state.col {
                AGENT
            } else if spec.treasure_at(row, col).is_some() {
                TREASURE
            } else if spec.is_accessible(row, col) {
                WATER
            } else {
                FLOOR
            };
        }
    }
    img
}

fn render_mc(state: &MountainCarState, dims: ImageDims) -> Vec<f64> {
    let ImageDims { height, width } = dims;
    let mut img = vec![0.0; height * width];
    let span = MAX_POSITION - MIN_POSITION;
    let row_of = |p: f64| -> usize {
        // one row of margin so the car marker is never clipped
        let h = ((3.0 * p).sin() + 1.0) / 2.0;
        let usable = height.saturating_sub(3) as f64;
        (usize::from(height >= 3) + ((1.0 - h) * usable).round() as usize).min(height - 1)
    };
    let col_of = |p: f64| -> usize {
        if width == 1 {
            return 0;
        }
        ((((p - MIN_POSITION) / span) * (width - 1) as f64).round() as usize).min(width - 1)
    };
    for x in 0..width {
        let p = if width == 1 { MIN_POSITION } else { MIN_POSITION + span * x as f64 / (width - 1) as f64 };
        img[row_of(p) * width + x] = TRACK;
    }
    let (cy, cx) = (row_of(state.position), col_of(state.position));
    for y in cy.saturating_sub(1)..=(cy + 1).min(height - 1) {
        for x in cx.saturating_sub(1)..=(cx + 1).min(width - 1) {
            img[y * width + x] = AGENT;
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::dst::dst_layout;
    use crate::envs::mountain_car::mc_reset;

    #[test]
    fn one_hot_origin_and_index() {
        let spec = dst_layout(3).unwrap();
        let s = DstState { row: 0, col: 0, frames_elapsed: 0 };
        let v = encode_dst(&spec, &s, &StateEncoding::one_hot()).unwrap();
        assert_eq!(v.len(), 18);
        assert_eq!(v[0], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
        let v = encode_dst(&spec, &DstState { row: 3, ..s }, &StateEncoding::one_hot()).unwrap();
        assert_eq!(v.iter().position(|&x| x == 1.0), Some(9));
    }

    #[test]
    fn mc_vector_midpoint_is_zero() {
        let s = MountainCarState { position: -0.3, velocity: 0.0, ..mc_reset() };
        assert_eq!(encode_mc(&s, &StateEncoding::vector()).unwrap(), vec![0.0, 0.0]);
        let s = MountainCarState { position: 0.6, velocity: -0.07, ..mc_reset() };
        let v = encode_mc(&s, &StateEncoding::vector()).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn image_without_dims_rejected() {
        let enc = StateEncoding { mode: EncodingMode::Image, image: None };
        let spec = dst_layout(3).unwrap();
        assert!(encode_dst(&spec, &DstState { row: 0, col: 0, frames_elapsed: 0 }, &enc).is_err());
        assert!(encode_mc(&mc_reset(), &enc).is_err());
        assert!(encode_mc(&mc_reset(), &StateEncoding::one_hot()).is_err());
    }

    #[test]
    fn dst_image_marks_agent_and_treasures() {
        let spec = dst_layout(3).unwrap();
        let s = DstState { row: 0, col: 0, frames_elapsed: 0 };
        let img = encode_dst(&spec, &s, &StateEncoding::image(84, 84)).unwrap();
        assert_eq!(img.len(), 84 * 84);
        assert_eq!(img[0], AGENT);
        // cell (3, 0) covers rows 42..56, cols 0..28
        assert_eq!(img[45 * 84 + 5], TREASURE);
        // cell (5, 0) is sea floor
        assert_eq!(img[80 * 84 + 5], FLOOR);
        assert_eq!(img[10 * 84 + 60], WATER);
    }

    #[test]
    fn mc_image_has_car_marker() {
        let img = encode_mc(&mc_reset(), &StateEncoding::image(84, 84)).unwrap();
        assert_eq!(img.iter().filter(|&&x| x == AGENT).count(), 9);
        assert!(img.contains(&TRACK));
    }
}
