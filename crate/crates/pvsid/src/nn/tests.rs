use super::*;
use ndarray::{arr1, arr2};
use rand::Rng;

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Straight-line re-implementation of the forward pass with plain loops,
/// kept independent of the ndarray-based code path.
fn forward_oracle(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let last = net.weights.len() - 1;
    for l in 0..net.weights.len() {
        let w = &net.weights[l];
        let b = &net.biases[l];
        let mut z = vec![0.0; w.nrows()];
        for i in 0..w.nrows() {
            let mut acc = b[i];
            for j in 0..w.ncols() {
                acc += w[(i, j)] * a[j];
            }
            z[i] = acc;
        }
        if l < last {
            for v in &mut z {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        a = z;
    }
    a
}

fn weighted_loss(net: &Mlp, inputs: &Array2<f64>, targets: &Array2<f64>, w: &Array1<f64>) -> f64 {
    let out = net.forward_batch(inputs).unwrap();
    let err = &out - targets;
    let mut loss = 0.0;
    for (j, row) in err.axis_iter(Axis(0)).enumerate() {
        loss += w[j] * row.iter().map(|e| e * e).sum::<f64>();
    }
    loss / inputs.ncols() as f64
}

fn random_instance(
    rng: &mut impl Rng,
) -> (Mlp, Array2<f64>, Array2<f64>, Array1<f64>) {
    let depth = rng.random_range(2..=4);
    let mut dims = Vec::new();
    for _ in 0..=depth {
        dims.push(rng.random_range(1..=7usize));
    }
    let net = Mlp::init(&dims, rng.random()).unwrap();
    let batch = rng.random_range(1..=6usize);
    let inputs = Array2::from_shape_fn((dims[0], batch), |_| rng.random_range(-1.5..1.5));
    let targets =
        Array2::from_shape_fn((*dims.last().unwrap(), batch), |_| rng.random_range(-1.5..1.5));
    let weights =
        Array1::from_shape_fn(*dims.last().unwrap(), |_| rng.random_range(0.0..2.0));
    (net, inputs, targets, weights)
}

/// Central finite differences of the weighted loss with respect to every
/// parameter. Used as the independent oracle for the analytic gradient.
pub fn fd_param_gradient(
    net: &Mlp,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    w: &Array1<f64>,
    h: f64,
) -> Gradients {
    let mut g = Gradients::zeros_like(net);
    let mut net = net.clone();
    for l in 0..net.weights.len() {
        for idx in 0..net.weights[l].len() {
            let slice = net.weights[l].as_slice_mut().unwrap();
            let orig = slice[idx];
            slice[idx] = orig + h;
            let up = weighted_loss(&net, inputs, targets, w);
            net.weights[l].as_slice_mut().unwrap()[idx] = orig - h;
            let down = weighted_loss(&net, inputs, targets, w);
            net.weights[l].as_slice_mut().unwrap()[idx] = orig;
            g.weights[l].as_slice_mut().unwrap()[idx] = (up - down) / (2.0 * h);
        }
        for idx in 0..net.biases[l].len() {
            let orig = net.biases[l][idx];
            net.biases[l][idx] = orig + h;
            let up = weighted_loss(&net, inputs, targets, w);
            net.biases[l][idx] = orig - h;
            let down = weighted_loss(&net, inputs, targets, w);
            net.biases[l][idx] = orig;
            g.biases[l][idx] = (up - down) / (2.0 * h);
        }
    }
    g
}

pub fn max_gradient_mismatch(a: &Gradients, b: &Gradients) -> f64 {
    let mut worst = 0.0f64;
    for (ga, gb) in a.weights.iter().zip(&b.weights) {
        for (&x, &y) in ga.iter().zip(gb.iter()) {
            worst = worst.max(relative_error(x, y));
        }
    }
    for (ga, gb) in a.biases.iter().zip(&b.biases) {
        for (&x, &y) in ga.iter().zip(gb.iter()) {
            worst = worst.max(relative_error(x, y));
        }
    }
    worst
}

#[test]
fn init_rejects_degenerate_dims() {
    assert!(Mlp::init(&[3], 0).is_err());
    assert!(Mlp::init(&[], 0).is_err());
    assert!(Mlp::init(&[3, 0, 2], 0).is_err());
}

#[test]
fn init_zeroed_weights_give_zero_map() {
    let mut net = Mlp::init(&[2, 1], 7).unwrap();
    for w in &mut net.weights {
        w.fill(0.0);
    }
    for b in &mut net.biases {
        b.fill(0.0);
    }
    assert_eq!(net.forward(&[3.0, -4.0]).unwrap(), vec![0.0]);
}

#[test]
fn zero_weight_network_returns_output_bias() {
    let mut net = Mlp::init(&[3, 4, 2], 5).unwrap();
    for w in &mut net.weights {
        w.fill(0.0);
    }
    net.biases[1] = arr1(&[0.25, -1.5]);
    assert_eq!(net.forward(&[9.0, -2.0, 0.1]).unwrap(), vec![0.25, -1.5]);
}

#[test]
fn param_count_small_net() {
    let net = Mlp::init(&[3, 4, 2], 1).unwrap();
    assert_eq!(net.param_count(), 3 * 4 + 4 + 4 * 2 + 2);
    assert_eq!(net.param_count(), 26);
}

#[test]
fn init_is_seed_deterministic() {
    let a = Mlp::init(&[5, 32, 32, 32, 8], 42).unwrap();
    let b = Mlp::init(&[5, 32, 32, 32, 8], 42).unwrap();
    assert_eq!(a, b);
    let c = Mlp::init(&[5, 32, 32, 32, 8], 43).unwrap();
    assert_ne!(a, c);
}

#[test]
fn forward_identity_layer() {
    let net = Mlp::from_parts(
        vec![2, 2],
        vec![arr2(&[[1.0, 0.0], [0.0, 1.0]])],
        vec![arr1(&[0.0, 0.0])],
    )
    .unwrap();
    assert_eq!(net.forward(&[1.0, -2.0]).unwrap(), vec![1.0, -2.0]);
}

#[test]
fn forward_dead_relu_unit() {
    let net = Mlp::from_parts(
        vec![1, 1, 1],
        vec![arr2(&[[1.0]]), arr2(&[[1.0]])],
        vec![arr1(&[-1.0]), arr1(&[0.0])],
    )
    .unwrap();
    // relu(0.5 - 1) = 0
    assert_eq!(net.forward(&[0.5]).unwrap(), vec![0.0]);
}

#[test]
fn forward_matches_loop_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for _ in 0..25 {
        let (net, inputs, _, _) = random_instance(&mut rng);
        for col in inputs.axis_iter(Axis(1)) {
            let x: Vec<f64> = col.to_vec();
            let got = net.forward(&x).unwrap();
            let expect = forward_oracle(&net, &x);
            for (g, e) in got.iter().zip(&expect) {
                assert!((g - e).abs() < 1e-12, "forward disagrees with oracle");
            }
        }
    }
}

#[test]
fn forward_is_pure_and_batch_consistent() {
    let net = Mlp::init(&[4, 8, 3], 3).unwrap();
    let x = [0.3, -0.7, 1.1, 0.0];
    let a = net.forward(&x).unwrap();
    let b = net.forward(&x).unwrap();
    assert_eq!(a, b);
    let batch = Array2::from_shape_fn((4, 3), |(i, _)| x[i]);
    let out = net.forward_batch(&batch).unwrap();
    for col in out.axis_iter(Axis(1)) {
        assert_eq!(col.to_vec(), a);
    }
}

#[test]
fn forward_rejects_dimension_mismatch() {
    let net = Mlp::init(&[3, 2], 0).unwrap();
    assert!(net.forward(&[1.0, 2.0]).is_err());
}

#[test]
fn loss_zero_output_weights_annihilate() {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let (net, inputs, targets, _) = random_instance(&mut rng);
    let w = Array1::zeros(net.output_dim());
    let (loss, grads) = net.loss_and_param_gradient(&inputs, &targets, &w).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(grads.max_abs(), 0.0);
}

#[test]
fn loss_zero_on_perfect_fit() {
    let net = Mlp::init(&[3, 6, 2], 9).unwrap();
    let inputs = Array2::from_shape_fn((3, 4), |(i, j)| 0.3 * i as f64 - 0.2 * j as f64);
    let targets = net.forward_batch(&inputs).unwrap();
    let w = Array1::ones(2);
    let (loss, _) = net.loss_and_param_gradient(&inputs, &targets, &w).unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn loss_rejects_shape_mismatch() {
    let net = Mlp::init(&[3, 2], 0).unwrap();
    let inputs = Array2::zeros((3, 4));
    let bad_targets = Array2::zeros((3, 4));
    let w = Array1::ones(2);
    assert!(net
        .loss_and_param_gradient(&inputs, &bad_targets, &w)
        .is_err());
    let empty: Array2<f64> = Array2::zeros((3, 0));
    assert!(net
        .loss_and_param_gradient(&empty, &Array2::zeros((2, 0)), &w)
        .is_err());
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    for _ in 0..20 {
        let (net, inputs, targets, w) = random_instance(&mut rng);
        let (_, analytic) = net.loss_and_param_gradient(&inputs, &targets, &w).unwrap();
        let fd = fd_param_gradient(&net, &inputs, &targets, &w, 1e-6);
        let worst = max_gradient_mismatch(&analytic, &fd);
        assert!(worst < 1e-4, "gradient mismatch {worst}");
    }
}

#[test]
fn jacobian_of_linear_net_is_weight_matrix() {
    let w = arr2(&[[1.5, -0.5, 2.0], [0.0, 3.0, -1.0]]);
    let net = Mlp::from_parts(vec![3, 2], vec![w.clone()], vec![arr1(&[0.1, 0.2])]).unwrap();
    let jac = net.input_jacobian(&[0.4, -0.8, 0.3], 0..3).unwrap();
    assert_eq!(jac, w);
}

#[test]
fn jacobian_empty_slice_has_zero_columns() {
    let net = Mlp::init(&[3, 4, 2], 1).unwrap();
    let jac = net.input_jacobian(&[0.1, 0.2, 0.3], 1..1).unwrap();
    assert_eq!(jac.dim(), (2, 0));
}

#[test]
fn jacobian_rejects_out_of_range_slice() {
    let net = Mlp::init(&[3, 2], 1).unwrap();
    assert!(net.input_jacobian(&[0.1, 0.2, 0.3], 2..4).is_err());
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha12Rng::seed_from_u64(404);
    for _ in 0..20 {
        let (net, inputs, _, _) = random_instance(&mut rng);
        let x: Vec<f64> = inputs.column(0).to_vec();
        let lo = rng.random_range(0..=x.len() - 1);
        let hi = rng.random_range(lo + 1..=x.len());
        let jac = net.input_jacobian(&x, lo..hi).unwrap();
        let h = 1e-6;
        for (j, col) in (lo..hi).enumerate() {
            let mut xp = x.clone();
            xp[col] += h;
            let up = net.forward(&xp).unwrap();
            xp[col] = x[col] - h;
            let down = net.forward(&xp).unwrap();
            for i in 0..net.output_dim() {
                let fd = (up[i] - down[i]) / (2.0 * h);
                let rel = relative_error(jac[(i, j)], fd);
                assert!(rel < 1e-4, "jacobian mismatch {rel} at ({i}, {j})");
            }
        }
    }
}

#[test]
fn adamw_zero_gradient_applies_pure_decay() {
    let mut net = Mlp::init(&[3, 4, 2], 8).unwrap();
    let reference = net.clone();
    let cfg = AdamWConfig {
        learning_rate: 0.05,
        weight_decay: 0.1,
        ..AdamWConfig::default()
    };
    let mut state = OptimizerState::new(&net);
    let grad = Gradients::zeros_like(&net);
    adamw_step(&mut net, &grad, &cfg, &mut state).unwrap();
    let factor = 1.0 - 0.05 * 0.1;
    for (w, w0) in net.weights.iter().zip(reference.weights.iter()) {
        for (&a, &b) in w.iter().zip(w0.iter()) {
            assert!((a - b * factor).abs() < 1e-15);
        }
    }
    for (b, b0) in net.biases.iter().zip(reference.biases.iter()) {
        for (&a, &x) in b.iter().zip(b0.iter()) {
            assert!((a - x * factor).abs() < 1e-15);
        }
    }
    assert_eq!(state.step(), 1);
}

#[test]
fn adamw_first_step_matches_hand_computation() {
    // One parameter, gradient g: after one step with zero decay the update is
    // lr * g / (|g| + eps) with both moments bias-corrected away.
    let mut net = Mlp::from_parts(vec![1, 1], vec![arr2(&[[0.7]])], vec![arr1(&[0.0])]).unwrap();
    let cfg = AdamWConfig {
        learning_rate: 1e-3,
        weight_decay: 0.0,
        ..AdamWConfig::default()
    };
    let mut state = OptimizerState::new(&net);
    let mut grad = Gradients::zeros_like(&net);
    grad.weights[0][(0, 0)] = 0.3;
    adamw_step(&mut net, &grad, &cfg, &mut state).unwrap();
    let expected = 0.7 - 1e-3 * 0.3 / (0.3 + 1e-8);
    assert!((net.weights[0][(0, 0)] - expected).abs() < 1e-15);
}

#[test]
fn adamw_rejects_non_finite_gradient() {
    let mut net = Mlp::init(&[2, 2], 0).unwrap();
    let before = net.clone();
    let mut state = OptimizerState::new(&net);
    let mut grad = Gradients::zeros_like(&net);
    grad.weights[0][(0, 0)] = f64::NAN;
    let err = adamw_step(&mut net, &grad, &AdamWConfig::default(), &mut state);
    assert!(matches!(err, Err(Error::Numeric(_))));
    assert_eq!(net, before);
    assert_eq!(state.step(), 0);
}

#[test]
fn adamw_sequence_is_deterministic() {
    let run = || {
        let mut net = Mlp::init(&[4, 8, 2], 21).unwrap();
        let cfg = AdamWConfig::default();
        let mut state = OptimizerState::new(&net);
        let inputs = Array2::from_shape_fn((4, 16), |(i, j)| ((i * 7 + j) as f64 * 0.37).sin());
        let targets = Array2::from_shape_fn((2, 16), |(i, j)| ((i + 3 * j) as f64 * 0.11).cos());
        let w = Array1::ones(2);
        for _ in 0..50 {
            let (_, grads) = net.loss_and_param_gradient(&inputs, &targets, &w).unwrap();
            adamw_step(&mut net, &grads, &cfg, &mut state).unwrap();
        }
        net
    };
    assert_eq!(run(), run());
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn param_count_formula(dims in proptest::collection::vec(1usize..12, 2..5), seed in any::<u64>()) {
            let net = Mlp::init(&dims, seed).unwrap();
            let expected: usize = dims.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
            prop_assert_eq!(net.param_count(), expected);
        }

        #[test]
        fn forward_repeat_is_bitwise_identical(seed in any::<u64>(), x in proptest::collection::vec(-3.0f64..3.0, 5)) {
            let net = Mlp::init(&[5, 9, 4], seed).unwrap();
            let a = net.forward(&x).unwrap();
            let b = net.forward(&x).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
