use super::{Geom, Gradients, LayerParams, NetworkSpec, Parameters};
use crate::error::{invalid, Error, Result};
use crate::scalarize::QMatrix;

/// Activations recorded by a forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    batch: usize,
    stamp: u64,
    /// `activations[0]` is the input, `activations[l + 1]` the (post-ReLU)
    /// output of layer `l`.
    activations: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// `batch × output_len` head values.
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the head layer")
    }

    pub fn sample_output(&self, sample: usize) -> &[f64] {
        let out = self.output();
        let n = out.len() / self.batch;
        &out[sample * n..(sample + 1) * n]
    }
}

/// `c = beta * c + a · b` for strided row/column-major views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Unfolds one `c × h × w` sample into a `(c·k·k) × (oh·ow)` matrix.
fn im2col(x: &[f64], g: &Geom, cols: &mut [f64]) {
    let Geom::Conv { in_c, in_h, in_w, out_h, out_w, kernel, stride, .. } = *g else {
        unreachable!()
    };
    let p = out_h * out_w;
    for c in 0..in_c {
        for ki in 0..kernel {
            for kj in 0..kernel {
                let r = (c * kernel + ki) * kernel + kj;
                let row = &mut cols[r * p..(r + 1) * p];
                for oy in 0..out_h {
                    let src = &x[(c * in_h + oy * stride + ki) * in_w..];
                    for ox in 0..out_w {
                        row[oy * out_w + ox] = src[ox * stride + kj];
                    }
                }
            }
        }
    }
}

fn col2im_add(cols: &[f64], g: &Geom, dx: &mut [f64]) {
    let Geom::Conv { in_c, in_h, in_w, out_h, out_w, kernel, stride, .. } = *g else {
        unreachable!()
    };
    let p = out_h * out_w;
    for c in 0..in_c {
        for ki in 0..kernel {
            for kj in 0..kernel {
                let r = (c * kernel + ki) * kernel + kj;
                let row = &cols[r * p..(r + 1) * p];
                for oy in 0..out_h {
                    let base = (c * in_h + oy * stride + ki) * in_w + kj;
                    for ox in 0..out_w {
                        dx[base + ox * stride] += row[oy * out_w + ox];
                    }
                }
            }
        }
    }
}

fn layer_forward(g: &Geom, p: &LayerParams, x: &[f64], batch: usize) -> Vec<f64> {
    let out_len = g.output_len();
    let mut y = vec![0.0; batch * out_len];
    match *g {
        Geom::Dense { inputs, outputs, .. } => {
            for row in y.chunks_mut(outputs) {
                row.copy_from_slice(&p.bias);
            }
            gemm(batch, inputs, outputs, x, (inputs, 1), &p.weights, (1, inputs), 1.0, &mut y, (outputs, 1));
        }
        Geom::Conv { in_c, out_c, out_h, out_w, kernel, .. } => {
            let (ckk, np) = (in_c * kernel * kernel, out_h * out_w);
            let in_len = g.input_len();
            let mut cols = vec![0.0; ckk * np];
            for b in 0..batch {
                im2col(&x[b * in_len..(b + 1) * in_len], g, &mut cols);
                let yb = &mut y[b * out_len..(b + 1) * out_len];
                for (f, chunk) in yb.chunks_mut(np).enumerate() {
                    chunk.fill(p.bias[f]);
                }
                gemm(out_c, ckk, np, &p.weights, (ckk, 1), &cols, (np, 1), 1.0, yb, (np, 1));
            }
        }
    }
    if g.relu() {
        for v in &mut y {
            *v = v.max(0.0);
        }
    }
    y
}

/// Returns parameter gradients and, if requested, the input gradient.
fn layer_backward(
    g: &Geom,
    p: &LayerParams,
    x: &[f64],
    dy: &[f64],
    batch: usize,
    want_dx: bool,
) -> (LayerParams, Option<Vec<f64>>) {
    let mut grad = LayerParams { weights: vec![0.0; p.weights.len()], bias: vec![0.0; p.bias.len()] };
    let in_len = g.input_len();
    let mut dx = want_dx.then(|| vec![0.0; batch * in_len]);
    match *g {
        Geom::Dense { inputs, outputs, .. } => {
            gemm(outputs, batch, inputs, dy, (1, outputs), x, (inputs, 1), 0.0, &mut grad.weights, (inputs, 1));
            for row in dy.chunks(outputs) {
                for (gb, d) in grad.bias.iter_mut().zip(row) {
                    *gb += d;
                }
            }
            if let Some(dx) = dx.as_mut() {
                gemm(batch, outputs, inputs, dy, (outputs, 1), &p.weights, (inputs, 1), 0.0, dx, (inputs, 1));
            }
        }
        Geom::Conv { in_c, out_c, out_h, out_w, kernel, .. } => {
            let (ckk, np) = (in_c * kernel * kernel, out_h * out_w);
            let out_len = g.output_len();
            let mut cols = vec![0.0; ckk * np];
            let mut dcols = vec![0.0; ckk * np];
            for b in 0..batch {
                let dyb = &dy[b * out_len..(b + 1) * out_len];
                im2col(&x[b * in_len..(b + 1) * in_len], g, &mut cols);
                gemm(out_c, np, ckk, dyb, (np, 1), &cols, (1, np), 1.0, &mut grad.weights, (ckk, 1));
                for (f, chunk) in dyb.chunks(np).enumerate() {
                    grad.bias[f] += chunk.iter().sum::<f64>();
                }
                if let Some(dx) = dx.as_mut() {
                    gemm(ckk, out_c, np, &p.weights, (1, ckk), dyb, (np, 1), 0.0, &mut dcols, (np, 1));
                    col2im_add(&dcols, g, &mut dx[b * in_len..(b + 1) * in_len]);
                }
            }
        }
    }
    (grad, dx)
}

impl NetworkSpec {
    /// Runs `batch` samples laid out back to back in `input`.
    pub fn forward_batch(&self, params: &Parameters, input: &[f64], batch: usize) -> Result<ForwardPass> {
        self.check_params(params)?;
        if batch == 0 {
            return Err(invalid("batch must contain at least one sample"));
        }
        if input.len() != batch * self.input_len() {
            return Err(invalid(format!(
                "input has {} values, expected {} samples of {}",
                input.len(),
                batch,
                self.input_len()
            )));
        }
        let mut activations = Vec::with_capacity(self.geoms.len() + 1);
        activations.push(input.to_vec());
        for (g, p) in self.geoms.iter().zip(params.layers()) {
            let y = layer_forward(g, p, activations.last().expect("non-empty"), batch);
            activations.push(y);
        }
        Ok(ForwardPass { batch, stamp: params.stamp(), activations })
    }

    pub fn forward(&self, params: &Parameters, input: &[f64]) -> Result<(QMatrix, ForwardPass)> {
        let pass = self.forward_batch(params, input, 1)?;
        let q = self.q_matrix(&pass, 0)?;
        Ok((q, pass))
    }

    pub fn q_values(&self, params: &Parameters, input: &[f64]) -> Result<QMatrix> {
        Ok(self.forward(params, input)?.0)
    }

    pub fn q_matrix(&self, pass: &ForwardPass, sample: usize) -> Result<QMatrix> {
        if sample >= pass.batch {
            return Err(invalid(format!("sample {sample} outside batch of {}", pass.batch)));
        }
        QMatrix::from_grouped_head(pass.sample_output(sample), self.n_actions, self.n_objectives)
    }

    /// Gradients of a scalar loss given its gradient w.r.t. the head output
    /// (`batch × output_len`, same layout as [`ForwardPass::output`]).
    pub fn backward(&self, params: &Parameters, pass: &ForwardPass, output_grad: &[f64]) -> Result<Gradients> {
        self.check_params(params)?;
        if pass.stamp != params.stamp() || pass.activations.len() != self.geoms.len() + 1 {
            return Err(Error::ContractViolation(
                "forward cache does not belong to these parameters".into(),
            ));
        }
        if output_grad.len() != pass.output().len() {
            return Err(invalid("output gradient does not match the forward output"));
        }
        let mut grads = vec![None; self.geoms.len()];
        let mut dy = output_grad.to_vec();
        for (l, g) in self.geoms.iter().enumerate().rev() {
            if g.relu() {
                for (d, &y) in dy.iter_mut().zip(&pass.activations[l + 1]) {
                    if y <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let (grad, dx) = layer_backward(g, &params.layers()[l], &pass.activations[l], &dy, pass.batch, l > 0);
            grads[l] = Some(grad);
            if let Some(dx) = dx {
                dy = dx;
            }
        }
        Ok(Gradients { layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect() })
    }
}
