use modrl::net::{InputShape, Layer, NetworkSpec, Parameters};
fn param_mut(p: &mut Parameters, layer: usize, bias: bool, i: usize) -> &mut f64 {
    let l = &mut p.layers_mut()[layer];
    if bias { &mut l.bias[i] } else { &mut l.weights[i] }
}
fn main() {
    let cases = vec![
        ("ref36", NetworkSpec::image_reference(InputShape::Image { channels: 1, height: 36, width: 36 }, 2, 4).unwrap()),
        ("k8s4", NetworkSpec::new(InputShape::Image { channels: 1, height: 12, width: 12 }, vec![Layer::Conv2d { filters: 2, kernel: 8, stride: 4, relu: false }], 1, 2).unwrap()),
        ("k8s4relu", NetworkSpec::new(InputShape::Image { channels: 1, height: 12, width: 12 }, vec![Layer::Conv2d { filters: 2, kernel: 8, stride: 4, relu: true }, Layer::Dense{units: 5, relu: true}], 1, 2).unwrap()),
    ];
    for (name, spec) in cases {
        let batch = 1;
        let params = spec.init_params(7);
        let input: Vec<f64> = (0..batch * spec.input_len()).map(|i| ((i * 7919 % 101) as f64 / 50.0) - 1.0).collect();
        let coef: Vec<f64> = (0..batch * spec.output_len()).map(|i| ((i * 31 % 17) as f64 / 8.0) - 1.0).collect();
        let loss = |p: &Parameters| -> f64 {
            let pass = spec.forward_batch(p, &input, batch).unwrap();
            pass.output().iter().zip(&coef).map(|(y, c)| c * y + 0.5 * y * y).sum()
        };
        let pass = spec.forward_batch(&params, &input, batch).unwrap();
        let dy: Vec<f64> = pass.output().iter().zip(&coef).map(|(y, c)| c + y).collect();
        let g = spec.backward(&params, &pass, &dy).unwrap();
        let mut p = params.clone();
        let mut bad = 0; let mut total = 0;
        for l in 0..p.layers().len() {
            for bias in [false, true] {
                let n = if bias { p.layers()[l].bias.len() } else { p.layers()[l].weights.len() };
                let step = if n > 3000 { 97 } else { 1 };
                for i in (0..n).step_by(step) {
                    let a = if bias { g.layers[l].bias[i] } else { g.layers[l].weights[i] };
                    let o = *param_mut(&mut p, l, bias, i);
                    *param_mut(&mut p, l, bias, i) = o + 1e-5; let up = loss(&p);
                    *param_mut(&mut p, l, bias, i) = o - 1e-5; let dn = loss(&p);
                    *param_mut(&mut p, l, bias, i) = o;
                    let num = (up - dn) / 2e-5;
                    total += 1;
                    if (a - num).abs() / (a.abs() + 1e-8) > 1e-4 && !(a.abs() < 1e-9 && num.abs() < 1e-7) {
                        bad += 1;
                        if bad < 6 { let f0 = loss(&p); println!("{name} layer {l} bias {bias} i {i}: a={a:e} n={num:e} right={:e} left={:e}", (up-f0)/1e-5, (f0-dn)/1e-5); }
                    }
                }
            }
        }
        println!("{name}: {bad}/{total} bad");
    }
}
