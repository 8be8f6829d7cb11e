use super::{Gradients, LayerParams, Parameters};
use crate::error::{invalid, Result};

pub const DEFAULT_DECAY: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

/// RMSProp with a per-parameter running mean of squared gradients:
/// `cache ← decay·cache + (1−decay)·g²`, `θ ← θ − lr·g / (√cache + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub decay: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    cache: Vec<LayerParams>,
}

impl RmsProp {
    pub fn new(params: &Parameters, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        let cache = params
            .layers()
            .iter()
            .map(|l| LayerParams { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
            .collect();
        Self { decay, epsilon, learning_rate, cache }
    }

    pub fn with_defaults(params: &Parameters) -> Self {
        Self::new(params, DEFAULT_LEARNING_RATE, DEFAULT_DECAY, DEFAULT_EPSILON)
    }

    pub fn cache(&self) -> &[LayerParams] {
        &self.cache
    }

    pub fn update(&mut self, params: &mut Parameters, grads: &Gradients) -> Result<()> {
        let shapes_match = self.cache.len() == grads.layers.len()
            && params.layers().len() == grads.layers.len()
            && self.cache.iter().zip(&grads.layers).all(|(c, g)| c.same_shape(g));
        if !shapes_match {
            return Err(invalid("gradient shapes do not match the optimizer state"));
        }
        let (decay, eps, lr) = (self.decay, self.epsilon, self.learning_rate);
        let step = |theta: &mut [f64], cache: &mut [f64], grad: &[f64]| {
            for ((t, c), &g) in theta.iter_mut().zip(cache.iter_mut()).zip(grad) {
                *c = decay * *c + (1.0 - decay) * g * g;
                *t -= lr * g / (c.sqrt() + eps);
            }
        };
        for ((p, c), g) in params.layers_mut().iter_mut().zip(&mut self.cache).zip(&grads.layers) {
            step(&mut p.weights, &mut c.weights, &g.weights);
            step(&mut p.bias, &mut c.bias, &g.bias);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64) -> Parameters {
        Parameters::from_layers(vec![LayerParams { weights: vec![w], bias: vec![] }])
    }

    fn grad(g: f64) -> Gradients {
        Gradients { layers: vec![LayerParams { weights: vec![g], bias: vec![] }] }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = single(0.3);
        let mut opt = RmsProp::with_defaults(&p);
        opt.update(&mut p, &grad(0.0)).unwrap();
        assert_eq!(p.layers()[0].weights[0], 0.3);
    }

    #[test]
    fn first_step_arithmetic() {
        let mut p = single(0.0);
        let mut opt = RmsProp::with_defaults(&p);
        opt.update(&mut p, &grad(1.0)).unwrap();
        assert!((opt.cache()[0].weights[0] - 0.01).abs() < 1e-15);
        let expected = -1e-4 / (0.1 + 1e-6);
        assert!((p.layers()[0].weights[0] - expected).abs() < 1e-15);
        assert!((expected + 9.9999e-4).abs() < 1e-8);
    }

    #[test]
    fn repeated_gradient_step_approaches_learning_rate() {
        let mut p = single(0.0);
        let mut opt = RmsProp::with_defaults(&p);
        let mut prev = 0.0;
        let mut delta = 0.0;
        for _ in 0..2000 {
            opt.update(&mut p, &grad(2.0)).unwrap();
            let w = p.layers()[0].weights[0];
            delta = (w - prev).abs();
            prev = w;
        }
        // cache → 4 after ~2000 steps at decay 0.99; step → lr·2/(2+eps)
        assert!((delta - 1e-4).abs() < 1e-8, "{delta}");
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut p = single(0.0);
        let mut opt = RmsProp::with_defaults(&p);
        let bad = Gradients { layers: vec![] };
        assert!(opt.update(&mut p, &bad).is_err());
    }
}
