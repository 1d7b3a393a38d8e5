//! Every tape op: forward values against direct formulas, and backward
//! against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sewdiff::numerics::gradcheck::relative_error;
use sewdiff::numerics::{Tape, Tensor, Var};
use sewdiff::Result;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    Tensor::new(shape.to_vec(), v).unwrap()
}

/// Weighted sum of `f(inputs)` so every output element gets a distinct
/// upstream gradient.
fn scalar_loss<F>(inputs: &[Tensor<f64>], weights: &Tensor<f64>, f: &F) -> Result<(Tape<f64>, Vec<Var>, Var)>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = f(&mut tape, &vars)?;
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w)?;
    let loss = tape.sum(prod)?;
    Ok((tape, vars, loss))
}

fn check<F>(name: &str, inputs: Vec<Tensor<f64>>, f: F)
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64);
    let probe = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let out = f(&mut tape, &vars).unwrap();
        tape.value(out).shape().to_vec()
    };
    let weights = random(&mut rng, &probe);
    let (tape, vars, loss) = scalar_loss(&inputs, &weights, &f).unwrap();
    let grads = tape.backward(loss).unwrap();

    let h = 1e-6;
    let mut worst = 0.0f64;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; input.len()]);
        for i in 0..input.len() {
            let eval = |delta: f64| {
                let mut moved = inputs.clone();
                moved[k].data_mut()[i] += delta;
                let (t, _, l) = scalar_loss(&moved, &weights, &f).unwrap();
                t.value(l).data()[0]
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            worst = worst.max(relative_error(analytic[i], numeric));
        }
    }
    assert!(worst < 1e-6, "{name}: max relative error {worst:.3e}");
}

#[test]
fn matmul_forward_and_backward() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random(&mut rng, &[3, 4]);
    let b = random(&mut rng, &[4, 2]);
    let mut tape = Tape::new();
    let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
    let c = tape.matmul(va, vb).unwrap();
    for i in 0..3 {
        for j in 0..2 {
            let want: f64 = (0..4).map(|k| a.data()[i * 4 + k] * b.data()[k * 2 + j]).sum();
            assert!((tape.value(c).data()[i * 2 + j] - want).abs() < 1e-12);
        }
    }
    check("matmul", vec![a.clone(), b], |t, v| t.matmul(v[0], v[1]));
    let bt = random(&mut rng, &[5, 4]);
    check("matmul_nt", vec![a, bt], |t, v| t.matmul_nt(v[0], v[1]));
}

#[test]
fn elementwise_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random(&mut rng, &[3, 4]);
    let b = random(&mut rng, &[3, 4]);
    let row = random(&mut rng, &[1, 4]);
    check("add", vec![a.clone(), b.clone()], |t, v| t.add(v[0], v[1]));
    check("add_broadcast", vec![a.clone(), row], |t, v| t.add(v[0], v[1]));
    check("mul", vec![a.clone(), b], |t, v| t.mul(v[0], v[1]));
    check("scale", vec![a.clone()], |t, v| t.scale(v[0], -0.7));
    check("gelu", vec![a], |t, v| t.gelu(v[0]));
}

#[test]
fn gelu_matches_tanh_formula() {
    let xs: [f64; 5] = [-3.0, -0.5, 0.0, 0.2, 1.7];
    let mut tape = Tape::new();
    let v = tape.constant(Tensor::new(vec![1, 5], xs.to_vec()).unwrap());
    let g = tape.gelu(v).unwrap();
    for (&x, y) in xs.iter().zip(tape.value(g).data()) {
        let c = (2.0 / std::f64::consts::PI).sqrt();
        let want = 0.5 * x * (1.0 + (c * (x + 0.044715 * x.powi(3))).tanh());
        assert!((y - want).abs() < 1e-14);
    }
}

#[test]
fn softmax_rows_are_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random(&mut rng, &[4, 5]);
    let mut tape = Tape::new();
    let v = tape.constant(a.clone());
    let s = tape.softmax_rows(v).unwrap();
    for r in 0..4 {
        let row = &tape.value(s).data()[r * 5..(r + 1) * 5];
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let z: f64 = a.data()[r * 5..(r + 1) * 5].iter().map(|x| x.exp()).sum();
        assert!((row[2] - a.data()[r * 5 + 2].exp() / z).abs() < 1e-12);
    }
    check("softmax_rows", vec![a], |t, v| t.softmax_rows(v[0]));
}

#[test]
fn layer_norm_normalizes_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&mut rng, &[3, 6]);
    let mut tape = Tape::new();
    let vx = tape.constant(x.clone());
    let g = tape.constant(Tensor::full(&[1, 6], 1.0));
    let b = tape.constant(Tensor::zeros(&[1, 6]));
    let y = tape.layer_norm(vx, g, b, 1e-5).unwrap();
    for r in 0..3 {
        let row = &tape.value(y).data()[r * 6..(r + 1) * 6];
        let mean = row.iter().sum::<f64>() / 6.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
        assert!(mean.abs() < 1e-12);
        // eps slightly shrinks the variance below one
        assert!((var - 1.0).abs() < 1e-3);
    }
    let gain = random(&mut rng, &[1, 6]);
    let bias = random(&mut rng, &[1, 6]);
    check("layer_norm", vec![x, gain, bias], |t, v| t.layer_norm(v[0], v[1], v[2], 1e-5));
}

#[test]
fn structural_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random(&mut rng, &[2, 3]);
    let b = random(&mut rng, &[4, 3]);
    let c = random(&mut rng, &[2, 5]);
    check("concat_rows", vec![a.clone(), b.clone()], |t, v| t.concat_rows(&[v[0], v[1]]));
    check("slice_rows", vec![b.clone()], |t, v| t.slice_rows(v[0], 1, 3));
    check("concat_cols", vec![a.clone(), c.clone()], |t, v| t.concat_cols(&[v[0], v[1]]));
    check("slice_cols", vec![c], |t, v| t.slice_cols(v[0], 2, 4));
    let table = random(&mut rng, &[4, 3]);
    // repeated index accumulates
    check("embedding", vec![table], |t, v| t.embedding(v[0], &[2, 0, 2, 3]));
}

#[test]
fn mse_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random(&mut rng, &[3, 3]);
    let target: Vec<f64> = (0..9).map(|i| i as f64 * 0.1).collect();
    let mut tape = Tape::new();
    let v = tape.leaf(a.clone(), true);
    let l = tape.mse(v, &target).unwrap();
    let want: f64 = a.data().iter().zip(&target).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 9.0;
    assert!((tape.value(l).data()[0] - want).abs() < 1e-14);
    let g = tape.backward(l).unwrap();
    for ((gi, x), y) in g.get(v).unwrap().iter().zip(a.data()).zip(&target) {
        assert!((gi - 2.0 * (x - y) / 9.0).abs() < 1e-14);
    }
}

#[test]
fn checked_tape_rejects_non_finite() {
    let mut tape = Tape::<f64>::checked();
    let a = tape.constant(Tensor::new(vec![1, 2], vec![1e308, 1e308]).unwrap());
    assert!(tape.scale(a, 10.0).is_err());
}
