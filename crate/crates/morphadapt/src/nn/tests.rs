use ndarray::{Array1, Array2, Array3};

use super::*;
use crate::rng;

fn rand_array2(r: usize, c: usize, seed: u64) -> Array2<f64> {
    let mut s = rng::derive(seed, &[7]);
    Array2::from_shape_simple_fn((r, c), || s.random::<f64>() * 2.0 - 1.0)
}

/// Scalar loss used across layer checks: weighted sum of squared outputs.
fn sq_loss(y: &Array2<f64>) -> f64 {
    y.iter().enumerate().map(|(i, v)| (i as f64 * 0.1 + 1.0) * v * v).sum()
}

fn sq_loss_grad(y: &Array2<f64>) -> Array2<f64> {
    let mut g = y.clone();
    g.iter_mut()
        .enumerate()
        .for_each(|(i, v)| *v = 2.0 * (i as f64 * 0.1 + 1.0) * *v);
    g
}

#[test]
fn dense_gradients_match_finite_differences() {
    let mut stream = rng::derive(1, &[0]);
    let mut layer: Dense<f64> = Dense::new(4, 3, &mut stream);
    let x = rand_array2(5, 4, 2);
    let mut grads = layer.zeros_like();
    let y = layer.forward(&x);
    layer.backward(&x, &sq_loss_grad(&y), &mut grads);
    let err = finite_difference_max_rel_err(&mut layer, &grads, 20, 1e-6, 3, |l| {
        sq_loss(&l.forward(&x))
    });
    assert!(err < 1e-5, "rel err {err}");
}

#[test]
fn layernorm_gradients_match_finite_differences() {
    let mut layer: LayerNorm<f64> = LayerNorm::new(6);
    let mut s = rng::derive(4, &[0]);
    layer.gain.iter_mut().for_each(|v| *v = 0.5 + s.random::<f64>());
    layer.bias.iter_mut().for_each(|v| *v = s.random::<f64>() - 0.5);
    let x = rand_array2(3, 6, 5);
    let (y, cache) = layer.forward(&x);
    let mut grads = layer.zeros_like();
    layer.backward(&cache, &sq_loss_grad(&y), &mut grads);
    let err = finite_difference_max_rel_err(&mut layer, &grads, 12, 1e-6, 6, |l| {
        sq_loss(&l.forward(&x).0)
    });
    assert!(err < 1e-5, "rel err {err}");
}

#[test]
fn layernorm_input_gradient_matches_finite_differences() {
    let layer: LayerNorm<f64> = LayerNorm::new(5);
    let x = rand_array2(2, 5, 9);
    let (y, cache) = layer.forward(&x);
    let mut grads = layer.zeros_like();
    let dx = layer.backward(&cache, &sq_loss_grad(&y), &mut grads);
    let h = 1e-6;
    for probe in [[0usize, 0usize], [1, 3], [0, 4]] {
        let mut xp = x.clone();
        xp[probe] += h;
        let lp = sq_loss(&layer.forward(&xp).0);
        let mut xm = x.clone();
        xm[probe] -= h;
        let lm = sq_loss(&layer.forward(&xm).0);
        let numeric = (lp - lm) / (2.0 * h);
        assert!(
            (numeric - dx[probe]).abs() / numeric.abs().max(1e-8) < 1e-5,
            "dx mismatch at {probe:?}: {numeric} vs {}",
            dx[probe]
        );
    }
}

#[test]
fn conv1d_gradients_match_finite_differences() {
    let mut stream = rng::derive(2, &[0]);
    let mut layer: Conv1d<f64> = Conv1d::new(3, 4, 3, 2, &mut stream);
    let x = rand_array2(3, 9, 8);
    let y = layer.forward(&x);
    assert_eq!(y.shape(), &[4, layer.out_len(9)]);
    let mut grads = layer.zeros_like();
    let dx = layer.backward(&x, &sq_loss_grad(&y), &mut grads);
    assert_eq!(dx.shape(), x.shape());
    let err = finite_difference_max_rel_err(&mut layer, &grads, 20, 1e-6, 9, |l| {
        sq_loss(&l.forward(&x))
    });
    assert!(err < 1e-5, "rel err {err}");
}

#[test]
fn conv2d_gradients_match_finite_differences() {
    let mut stream = rng::derive(3, &[0]);
    let mut layer: Conv2d<f64> = Conv2d::new(2, 3, 3, 1, &mut stream);
    let mut s = rng::derive(11, &[0]);
    let x = Array3::from_shape_simple_fn((2, 6, 6), || s.random::<f64>() - 0.5);
    let y = layer.forward(&x);
    let dy = y.mapv(|v| 2.0 * v);
    let mut grads = layer.zeros_like();
    layer.backward(&x, &dy, &mut grads);
    let err = finite_difference_max_rel_err(&mut layer, &grads, 20, 1e-6, 12, |l| {
        l.forward(&x).iter().map(|v| v * v).sum()
    });
    assert!(err < 1e-5, "rel err {err}");
}

#[test]
fn lstm_gradients_match_finite_differences_through_time() {
    let mut stream = rng::derive(5, &[0]);
    let mut cell: LstmCell<f64> = LstmCell::new(3, 4, &mut stream);
    let xs: Vec<Array2<f64>> = (0..3).map(|t| rand_array2(2, 3, 20 + t)).collect();

    let run = |cell: &LstmCell<f64>| -> (f64, Vec<LstmCache<f64>>) {
        let mut h = Array2::zeros((2, 4));
        let mut c = Array2::zeros((2, 4));
        let mut caches = Vec::new();
        let mut loss = 0.0;
        for x in &xs {
            let (h2, c2, cache) = cell.forward(x, &h, &c);
            loss += sq_loss(&h2);
            h = h2;
            c = c2;
            caches.push(cache);
        }
        (loss, caches)
    };

    let (_, caches) = run(&cell);
    let mut grads = cell.zeros_like();
    let mut dh = Array2::zeros((2, 4));
    let mut dc = Array2::zeros((2, 4));
    for t in (0..3).rev() {
        // loss hits every step's h directly
        let h_t = &caches[t].o * &caches[t].c.mapv(f64::tanh);
        let dh_total = &dh + &sq_loss_grad(&h_t);
        let (_, dh_prev, dc_prev) = cell.backward(&caches[t], &dh_total, &dc, &mut grads);
        dh = dh_prev;
        dc = dc_prev;
    }
    let err = finite_difference_max_rel_err(&mut cell, &grads, 30, 1e-6, 21, |c| run(c).0);
    assert!(err < 1e-5, "rel err {err}");
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut stream = rng::derive(6, &[0]);
    let mut mlp: Mlp<f64> = Mlp::new(&[5, 8, 8, 2], &mut stream);
    let x = rand_array2(4, 5, 30);
    let (y, cache) = mlp.forward(&x);
    let mut grads = mlp.zeros_like();
    mlp.backward(&cache, &sq_loss_grad(&y), &mut grads);
    let err = finite_difference_max_rel_err(&mut mlp, &grads, 40, 1e-6, 31, |m| {
        sq_loss(&m.forward(&x).0)
    });
    assert!(err < 1e-5, "rel err {err}");
}

#[test]
fn sgd_with_momentum_matches_hand_computation() {
    let mut p: Dense<f64> = Dense::zeroed(1, 1);
    p.w[[0, 0]] = 1.0;
    let mut g = p.zeros_like();
    g.w[[0, 0]] = 2.0;
    let mut opt = Sgd::new(0.1, 0.9);
    opt.step(&mut p, &g);
    assert!((p.w[[0, 0]] - (1.0 - 0.1 * 2.0)).abs() < 1e-12);
    g.w[[0, 0]] = 1.0;
    opt.step(&mut p, &g);
    // velocity = 0.9*2 + 1 = 2.8; w = 0.8 - 0.1*2.8
    assert!((p.w[[0, 0]] - (0.8 - 0.28)).abs() < 1e-12);
}

#[test]
fn params_flat_round_trip() {
    let mut stream = rng::derive(7, &[0]);
    let mlp: Mlp<f32> = Mlp::new(&[3, 4, 2], &mut stream);
    let flat = mlp.to_flat();
    assert_eq!(flat.len(), mlp.count());
    let mut other = mlp.zeros_like();
    other.set_flat(&flat).unwrap();
    assert_eq!(other.to_flat(), flat);
    assert!(other.set_flat(&flat[1..]).is_err());
}

#[test]
fn f32_and_f64_nets_initialize_from_the_same_stream() {
    let a: Mlp<f32> = Mlp::new(&[3, 4, 2], &mut rng::derive(8, &[0]));
    let b: Mlp<f64> = Mlp::new(&[3, 4, 2], &mut rng::derive(8, &[0]));
    for (x, y) in a.to_flat().iter().zip(b.to_flat().iter()) {
        assert!((*x as f64 - *y).abs() < 1e-7);
    }
}

#[test]
fn activation_backwards_are_consistent() {
    let x = rand_array2(3, 4, 40);
    let y = leaky_relu(&x);
    let ones = Array2::from_elem((3, 4), 1.0);
    let dx = leaky_relu_backward(&y, &ones);
    for (xv, dv) in x.iter().zip(dx.iter()) {
        let expect = if *xv > 0.0 { 1.0 } else { LEAKY_SLOPE };
        assert!((dv - expect).abs() < 1e-12);
    }
    let t = tanh(&x);
    let dt = tanh_backward(&t, &ones);
    for (tv, dv) in t.iter().zip(dt.iter()) {
        assert!((dv - (1.0 - tv * tv)).abs() < 1e-12);
    }
}

#[test]
fn zeroed_dense_outputs_zero() {
    let layer: Dense<f64> = Dense::zeroed(3, 2);
    let x = rand_array2(2, 3, 50);
    assert!(layer.forward(&x).iter().all(|v| *v == 0.0));
    let _ = Array1::<f64>::zeros(1);
}
