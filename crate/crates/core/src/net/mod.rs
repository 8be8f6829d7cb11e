//! A small feed-forward Q-network engine: dense and valid-padding 2-D
//! convolution layers with optional ReLU, a grouped multi-objective head,
//! exact backpropagation and RMSProp.

mod checkpoint;
mod pass;
mod rmsprop;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use pass::ForwardPass;
pub use rmsprop::{RmsProp, DEFAULT_DECAY, DEFAULT_EPSILON, DEFAULT_LEARNING_RATE};

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputShape {
    Flat(usize),
    Image { channels: usize, height: usize, width: usize },
}

impl InputShape {
    pub fn len(&self) -> usize {
        match *self {
            Self::Flat(n) => n,
            Self::Image { channels, height, width } => channels * height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Dense { units: usize, relu: bool },
    Conv2d { filters: usize, kernel: usize, stride: usize, relu: bool },
}

/// Resolved layer geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Geom {
    Dense { inputs: usize, outputs: usize, relu: bool },
    Conv {
        in_c: usize,
        in_h: usize,
        in_w: usize,
        out_c: usize,
        out_h: usize,
        out_w: usize,
        kernel: usize,
        stride: usize,
        relu: bool,
    },
}

impl Geom {
    fn input_len(&self) -> usize {
        match *self {
            Self::Dense { inputs, .. } => inputs,
            Self::Conv { in_c, in_h, in_w, .. } => in_c * in_h * in_w,
        }
    }

    fn output_len(&self) -> usize {
        match *self {
            Self::Dense { outputs, .. } => outputs,
            Self::Conv { out_c, out_h, out_w, .. } => out_c * out_h * out_w,
        }
    }

    fn relu(&self) -> bool {
        match *self {
            Self::Dense { relu, .. } | Self::Conv { relu, .. } => relu,
        }
    }

    fn weight_len(&self) -> usize {
        match *self {
            Self::Dense { inputs, outputs, .. } => inputs * outputs,
            Self::Conv { in_c, out_c, kernel, .. } => out_c * in_c * kernel * kernel,
        }
    }

    fn bias_len(&self) -> usize {
        match *self {
            Self::Dense { outputs, .. } => outputs,
            Self::Conv { out_c, .. } => out_c,
        }
    }

    fn fans(&self) -> (usize, usize) {
        match *self {
            Self::Dense { inputs, outputs, .. } => (inputs, outputs),
            Self::Conv { in_c, out_c, kernel, .. } => (in_c * kernel * kernel, out_c * kernel * kernel),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpecDescriptor {
    input: InputShape,
    layers: Vec<Layer>,
    n_objectives: usize,
    n_actions: usize,
}

/// Layer stack followed by a linear head of `n_objectives` groups of
/// `n_actions` outputs each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDescriptor", into = "SpecDescriptor")]
pub struct NetworkSpec {
    input: InputShape,
    layers: Vec<Layer>,
    n_objectives: usize,
    n_actions: usize,
    geoms: Vec<Geom>,
}

impl TryFrom<SpecDescriptor> for NetworkSpec {
    type Error = Error;

    fn try_from(d: SpecDescriptor) -> Result<Self> {
        Self::new(d.input, d.layers, d.n_objectives, d.n_actions)
    }
}

impl From<NetworkSpec> for SpecDescriptor {
    fn from(s: NetworkSpec) -> Self {
        Self { input: s.input, layers: s.layers, n_objectives: s.n_objectives, n_actions: s.n_actions }
    }
}

impl NetworkSpec {
    pub fn new(input: InputShape, layers: Vec<Layer>, n_objectives: usize, n_actions: usize) -> Result<Self> {
        if input.is_empty() {
            return Err(invalid("network input must be non-empty"));
        }
        if n_objectives == 0 || n_actions == 0 {
            return Err(invalid("head needs at least one objective and one action"));
        }
        // (channels, height, width) while spatial, None once flattened
        let mut spatial = match input {
            InputShape::Flat(_) => None,
            InputShape::Image { channels, height, width } => Some((channels, height, width)),
        };
        let mut flat = input.len();
        let mut geoms = Vec::with_capacity(layers.len() + 1);
        for (i, layer) in layers.iter().enumerate() {
            match *layer {
                Layer::Dense { units, relu } => {
                    if units == 0 {
                        return Err(invalid(format!("layer {i}: dense layer needs units > 0")));
                    }
                    geoms.push(Geom::Dense { inputs: flat, outputs: units, relu });
                    spatial = None;
                    flat = units;
                }
                Layer::Conv2d { filters, kernel, stride, relu } => {
                    let Some((c, h, w)) = spatial else {
                        return Err(invalid(format!("layer {i}: convolution needs a spatial input")));
                    };
                    if filters == 0 || kernel == 0 || stride == 0 {
                        return Err(invalid(format!("layer {i}: filters, kernel and stride must be positive")));
                    }
                    if kernel > h || kernel > w {
                        return Err(invalid(format!("layer {i}: kernel {kernel} exceeds input {h}x{w}")));
                    }
                    let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
                    geoms.push(Geom::Conv {
                        in_c: c,
                        in_h: h,
                        in_w: w,
                        out_c: filters,
                        out_h: oh,
                        out_w: ow,
                        kernel,
                        stride,
                        relu,
                    });
                    spatial = Some((filters, oh, ow));
                    flat = filters * oh * ow;
                }
            }
        }
        geoms.push(Geom::Dense { inputs: flat, outputs: n_objectives * n_actions, relu: false });
        Ok(Self { input, layers, n_objectives, n_actions, geoms })
    }

    /// Dense(64)-ReLU-Dense(64)-ReLU-head.
    pub fn vector_reference(input_len: usize, n_objectives: usize, n_actions: usize) -> Result<Self> {
        Self::mlp(input_len, &[64, 64], n_objectives, n_actions)
    }

    pub fn mlp(input_len: usize, hidden: &[usize], n_objectives: usize, n_actions: usize) -> Result<Self> {
        let layers = hidden.iter().map(|&units| Layer::Dense { units, relu: true }).collect();
        Self::new(InputShape::Flat(input_len), layers, n_objectives, n_actions)
    }

    /// Three ReLU convolutions (32@8x8/4, 64@4x4/2, 64@3x3/1), a 512-unit
    /// ReLU dense layer and the grouped head.
    pub fn image_reference(input: InputShape, n_objectives: usize, n_actions: usize) -> Result<Self> {
        let layers = vec![
            Layer::Conv2d { filters: 32, kernel: 8, stride: 4, relu: true },
            Layer::Conv2d { filters: 64, kernel: 4, stride: 2, relu: true },
            Layer::Conv2d { filters: 64, kernel: 3, stride: 1, relu: true },
            Layer::Dense { units: 512, relu: true },
        ];
        Self::new(input, layers, n_objectives, n_actions)
    }

    pub fn input(&self) -> InputShape {
        self.input
    }

    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_objectives(&self) -> usize {
        self.n_objectives
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn output_len(&self) -> usize {
        self.n_objectives * self.n_actions
    }

    /// Output (channels, height, width) of every convolution, in order.
    pub fn conv_output_dims(&self) -> Vec<(usize, usize, usize)> {
        self.geoms
            .iter()
            .filter_map(|g| match *g {
                Geom::Conv { out_c, out_h, out_w, .. } => Some((out_c, out_h, out_w)),
                Geom::Dense { .. } => None,
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.geoms.iter().map(|g| g.weight_len() + g.bias_len()).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init_params(&self, seed: u64) -> Parameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = self
            .geoms
            .iter()
            .map(|g| {
                let (fan_in, fan_out) = g.fans();
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                LayerParams {
                    weights: (0..g.weight_len()).map(|_| rng.gen_range(-limit..=limit)).collect(),
                    bias: vec![0.0; g.bias_len()],
                }
            })
            .collect();
        Parameters::from_layers(layers)
    }

    pub fn zero_params(&self) -> Parameters {
        Parameters::from_layers(
            self.geoms
                .iter()
                .map(|g| LayerParams { weights: vec![0.0; g.weight_len()], bias: vec![0.0; g.bias_len()] })
                .collect(),
        )
    }

    pub(crate) fn check_params(&self, params: &Parameters) -> Result<()> {
        let ok = params.layers.len() == self.geoms.len()
            && params
                .layers
                .iter()
                .zip(&self.geoms)
                .all(|(p, g)| p.weights.len() == g.weight_len() && p.bias.len() == g.bias_len());
        if ok {
            Ok(())
        } else {
            Err(invalid("parameter shapes do not match the network spec"))
        }
    }
}

/// Weights and biases for one layer. Dense weights are `[out][in]`;
/// convolution weights are `[filter][channel][row][col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn same_shape(&self, other: &LayerParams) -> bool {
        self.weights.len() == other.weights.len() && self.bias.len() == other.bias.len()
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn next_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// A full parameter set. Every mutation re-stamps the set so forward
/// caches taken before the change are rejected by `backward`.
#[derive(Debug, Clone)]
pub struct Parameters {
    layers: Vec<LayerParams>,
    stamp: u64,
}

impl PartialEq for Parameters {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Parameters {
    pub fn from_layers(layers: Vec<LayerParams>) -> Self {
        Self { layers, stamp: next_stamp() }
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable access; invalidates outstanding forward caches.
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        self.stamp = next_stamp();
        &mut self.layers
    }

    pub(crate) fn stamp(&self) -> u64 {
        self.stamp
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    fn same_shape(&self, other: &Parameters) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

/// Same layout as [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|&g| g == 0.0)
    }
}

/// Copies the online parameters into the target set.
pub fn sync_target(online: &Parameters, target: &mut Parameters) -> Result<()> {
    if !online.same_shape(target) {
        return Err(invalid("online and target parameters have different shapes"));
    }
    target.layers.clone_from(&online.layers);
    target.stamp = next_stamp();
    Ok(())
}
