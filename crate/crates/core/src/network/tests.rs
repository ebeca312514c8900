use super::*;
use crate::autodiff::Tape;
use crate::tensor::Tensor;
use proptest::prelude::*;

fn layer(w: Vec<Vec<f64>>, b: Vec<f64>) -> LayerParams {
    LayerParams {
        weight: Tensor::from_rows(&w).unwrap(),
        bias: Tensor::vector(b).unwrap(),
    }
}

#[test]
fn zero_weights_give_bias_output() {
    let spec = NetworkSpec::mlp(vec![2, 4, 1], Activation::Tanh);
    let mut p = init_params(&spec, 0).unwrap();
    for l in &mut p.layers {
        l.weight.data_mut().fill(0.0);
    }
    let x = Tensor::from_rows(&[vec![0.3, -2.0], vec![5.0, 1.0]]).unwrap();
    assert!(mlp_forward(&spec, &p, &x).unwrap().data().iter().all(|&v| v == 0.0));
    p.layers[1].bias.data_mut()[0] = 0.7;
    assert!(mlp_forward(&spec, &p, &x).unwrap().data().iter().all(|&v| v == 0.7));
}

#[test]
fn linear_identity_chain() {
    let spec = NetworkSpec::mlp(vec![2, 2, 2], Activation::Linear);
    let id = || layer(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
    let p = NetworkParams {
        layers: vec![id(), id()],
    };
    let x = Tensor::from_rows(&[vec![0.25, -3.5], vec![1e3, 7.0]]).unwrap();
    assert_eq!(mlp_forward(&spec, &p, &x).unwrap(), x);
}

#[test]
fn small_tanh_network_matches_hand_computation() {
    let spec = NetworkSpec::mlp(vec![2, 2, 1], Activation::Tanh);
    let p = NetworkParams {
        layers: vec![
            layer(vec![vec![0.5, -1.0], vec![2.0, 0.25]], vec![0.1, -0.2]),
            layer(vec![vec![1.5, -0.5]], vec![0.3]),
        ],
    };
    let (x0, x1) = (0.4, -0.8);
    let h0 = (0.5 * x0 - 1.0 * x1 + 0.1f64).tanh();
    let h1 = (2.0 * x0 + 0.25 * x1 - 0.2f64).tanh();
    let expected = 1.5 * h0 - 0.5 * h1 + 0.3;
    let y = mlp_forward(&spec, &p, &Tensor::from_rows(&[vec![x0, x1]]).unwrap()).unwrap();
    assert!((y.data()[0] - expected).abs() < 1e-15);
    let trace = mlp_trace(&spec, &p, &Tensor::from_rows(&[vec![x0, x1]]).unwrap()).unwrap();
    assert_eq!(trace.pre.len(), 2);
    assert!((trace.outputs[0].data()[1] - h1).abs() < 1e-15);
}

#[test]
fn input_bounds_normalize_to_unit_box() {
    let spec = NetworkSpec::mlp(vec![2, 2, 2], Activation::Linear)
        .with_input_bounds(vec![[0.0, 4.0], [-1.0, 1.0]]);
    let id = || layer(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
    let p = NetworkParams {
        layers: vec![id(), id()],
    };
    let x = Tensor::from_rows(&[vec![0.0, 0.5], vec![4.0, -1.0], vec![1.0, 1.0]]).unwrap();
    let y = mlp_forward(&spec, &p, &x).unwrap();
    assert_eq!(y.data(), &[-1.0, 0.5, 1.0, -1.0, -0.5, 1.0]);
}

#[test]
fn rejects_bad_input_dimension() {
    let spec = NetworkSpec::mlp(vec![3, 4, 1], Activation::Tanh);
    let p = init_params(&spec, 0).unwrap();
    let x = Tensor::zeros(&[5, 2]);
    assert_eq!(
        mlp_forward(&spec, &p, &x).unwrap_err(),
        NetworkError::Dimension {
            expected: 3,
            actual: 2
        }
    );
}

/// Separable network whose subnet `a` outputs exactly its (raw) coordinate
/// times `coef[a]` on each rank slot: a linear 1-1-r chain.
fn separable_linear(coefs: &[Vec<f64>], rank: usize) -> (NetworkSpec, NetworkParams) {
    let spec = NetworkSpec::separable(coefs.len(), vec![1], rank, 1, Activation::Linear);
    let mut layers = Vec::new();
    for c in coefs {
        layers.push(layer(vec![vec![1.0]], vec![0.0]));
        layers.push(layer(c.iter().map(|&v| vec![v]).collect(), vec![0.0; rank]));
    }
    (spec, NetworkParams { layers })
}

#[test]
fn separable_constant_one() {
    let spec = NetworkSpec::separable(3, vec![2], 1, 1, Activation::Tanh);
    let mut p = init_params(&spec, 4).unwrap();
    for (i, l) in p.layers.iter_mut().enumerate() {
        if i % 2 == 1 {
            l.weight.data_mut().fill(0.0);
            l.bias.data_mut().fill(1.0);
        }
    }
    let grid = spinn_forward(&spec, &p, &[vec![0.0, 1.0], vec![-1.0, 0.5, 2.0], vec![3.0]]).unwrap();
    assert_eq!(grid.shape(), &[2, 3, 1, 1]);
    assert!(grid.data().iter().all(|&v| v == 1.0));
}

#[test]
fn separable_outer_product() {
    let (spec, p) = separable_linear(&[vec![1.0], vec![1.0]], 1);
    let xs = vec![0.5, -1.0, 2.0];
    let ts = vec![3.0, 0.25];
    let grid = spinn_forward(&spec, &p, &[xs.clone(), ts.clone()]).unwrap();
    for (i, x) in xs.iter().enumerate() {
        for (j, t) in ts.iter().enumerate() {
            assert_eq!(grid.data()[i * ts.len() + j], x * t);
        }
    }
}

#[test]
fn separable_grid_matches_pointwise_oracle() {
    let spec = NetworkSpec::separable(2, vec![6, 5], 3, 2, Activation::Tanh)
        .with_input_bounds(vec![[0.0, 2.0], [-1.0, 3.0]]);
    let p = init_params(&spec, 21).unwrap();
    let xs: Vec<f64> = (0..4).map(|i| 0.5 * i as f64).collect();
    let ts: Vec<f64> = (0..5).map(|i| -1.0 + 0.8 * i as f64).collect();
    let grid = spinn_forward(&spec, &p, &[xs.clone(), ts.clone()]).unwrap();
    let mut pts = Vec::new();
    for &x in &xs {
        for &t in &ts {
            pts.push(vec![x, t]);
        }
    }
    let pointwise = evaluate_points(&spec, &p, &Tensor::from_rows(&pts).unwrap()).unwrap();
    // Independent oracle: plain scalar loops over each subnet.
    let act = |z: f64| z.tanh();
    let sub = |axis: usize, v: f64| -> Vec<f64> {
        let map = spec.input_map();
        let mut h = vec![map.apply(axis, v)];
        let ls = p.subnet(&spec, axis);
        for (k, l) in ls.iter().enumerate() {
            let mut next = Vec::new();
            for o in 0..l.fan_out() {
                let mut z = l.bias.data()[o];
                for (i, hv) in h.iter().enumerate() {
                    z += l.weight.get2(o, i) * hv;
                }
                next.push(if k + 1 == ls.len() { z } else { act(z) });
            }
            h = next;
        }
        h
    };
    for (idx, pt) in pts.iter().enumerate() {
        let (fx, ft) = (sub(0, pt[0]), sub(1, pt[1]));
        for o in 0..2 {
            let want: f64 = (0..3).map(|k| fx[o * 3 + k] * ft[o * 3 + k]).sum();
            assert!((grid.data()[idx * 2 + o] - want).abs() < 1e-13);
            assert!((pointwise.data()[idx * 2 + o] - want).abs() < 1e-13);
        }
    }
}

#[test]
fn jets_match_finite_differences() {
    let spec = NetworkSpec::mlp(vec![1, 8, 1], Activation::Tanh);
    let p = init_params(&spec, 5).unwrap();
    let f = |x: f64| {
        mlp_forward(&spec, &p, &Tensor::from_rows(&[vec![x]]).unwrap())
            .unwrap()
            .data()[0]
    };
    let h = 1e-3;
    for &x in &[-0.9, -0.1, 0.4, 1.3] {
        let j = jet2_forward(&spec, &p, &[x], 0).unwrap()[0];
        assert!((j.value - f(x)).abs() < 1e-14);
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        assert!((j.d1 - d1).abs() <= 1e-4 * d1.abs().max(1.0), "{} vs {d1}", j.d1);
        assert!((j.d2 - d2).abs() <= 1e-4 * d2.abs().max(1.0), "{} vs {d2}", j.d2);
    }
}

#[test]
fn jets_reject_relu() {
    let spec = NetworkSpec::mlp(vec![1, 3, 1], Activation::Relu);
    let p = init_params(&spec, 0).unwrap();
    assert_eq!(
        jet2_forward(&spec, &p, &[0.2], 0).unwrap_err(),
        NetworkError::UnsupportedActivation(Activation::Relu)
    );
    let mut tape = Tape::new();
    let tp = TapedParams::record(&mut tape, &p);
    let x = Tensor::from_rows(&[vec![0.2]]).unwrap();
    assert!(mlp_output_jets(&mut tape, &spec, &tp, &x, &[Direction::second(0)]).is_err());
    assert!(mlp_output_jets(&mut tape, &spec, &tp, &x, &[]).is_ok());
}

fn taped_mse(spec: &NetworkSpec, tensors: &[Tensor], x: &Tensor) -> (f64, Vec<Tensor>) {
    let params = NetworkParams::from_tensors(tensors.to_vec());
    let mut tape = Tape::new();
    let tp = TapedParams::record(&mut tape, &params);
    let out = mlp_output_jets(&mut tape, spec, &tp, x, &[]).unwrap();
    let sq = tape.square(out[0].value);
    let loss = tape.mean(sq);
    let g = tape.grad(loss, &tp.vars()).unwrap();
    (tape.scalar_value(loss), g)
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let spec = NetworkSpec::mlp(vec![2, 3, 1], Activation::Tanh);
    let p = init_params(&spec, 8).unwrap();
    let x = Tensor::from_rows(&[vec![0.3, -0.7], vec![-1.2, 0.4], vec![0.9, 0.9]]).unwrap();
    let tensors = p.tensors();
    let (_, grads) = taped_mse(&spec, &tensors, &x);
    let h = 1e-5;
    for (ti, t) in tensors.iter().enumerate() {
        for k in 0..t.len() {
            let mut plus = tensors.clone();
            plus[ti].data_mut()[k] += h;
            let mut minus = tensors.clone();
            minus[ti].data_mut()[k] -= h;
            let fd = (taped_mse(&spec, &plus, &x).0 - taped_mse(&spec, &minus, &x).0) / (2.0 * h);
            let g = grads[ti].data()[k];
            assert!((g - fd).abs() <= 1e-6 * fd.abs().max(1.0), "param {ti}[{k}]: {g} vs {fd}");
        }
    }
}

#[test]
fn taped_jets_match_scalar_jets() {
    for act in [Activation::Tanh, Activation::Sin] {
        let spec = NetworkSpec::mlp(vec![2, 6, 5, 2], act).with_input_bounds(vec![[0.0, 2.0], [-1.0, 1.0]]);
        let p = init_params(&spec, 13).unwrap();
        let pts = [vec![0.2, 0.1], vec![1.7, -0.6]];
        let mut tape = Tape::new();
        let tp = TapedParams::record(&mut tape, &p);
        let x = Tensor::from_rows(&pts).unwrap();
        let dirs = [Direction::second(0), Direction::first(1)];
        let outs = mlp_output_jets(&mut tape, &spec, &tp, &x, &dirs).unwrap();
        for (i, pt) in pts.iter().enumerate() {
            for o in 0..2 {
                let jx = jet2_forward(&spec, &p, pt, 0).unwrap()[o];
                let jt = jet2_forward(&spec, &p, pt, 1).unwrap()[o];
                let got = |v| tape.value(v).data()[i];
                assert!((got(outs[o].value) - jx.value).abs() < 1e-13);
                assert!((got(outs[o].d1(0)) - jx.d1).abs() < 1e-12);
                assert!((got(outs[o].d2(0)) - jx.d2).abs() < 1e-12);
                assert!((got(outs[o].d1(1)) - jt.d1).abs() < 1e-12);
                assert!(outs[o].d2[1].is_none());
            }
        }
    }
}

#[test]
fn taped_separable_jets_match_scalar_jets() {
    let spec = NetworkSpec::separable(3, vec![5, 4], 3, 2, Activation::Tanh)
        .with_input_bounds(vec![[-1.0, 1.0], [-1.0, 1.0], [0.0, 1.0]]);
    let p = init_params(&spec, 2).unwrap();
    let axes = vec![vec![-0.5, 0.3], vec![0.1, 0.6, 0.9], vec![0.25, 0.75]];
    let mut tape = Tape::new();
    let tp = TapedParams::record(&mut tape, &p);
    let dirs = [Direction::second(0), Direction::second(1), Direction::first(2)];
    let outs = spinn_output_jets(&mut tape, &spec, &tp, &axes, &dirs).unwrap();
    let grid = spinn_forward(&spec, &p, &axes).unwrap();
    let mut idx = 0;
    for &x in &axes[0] {
        for &y in &axes[1] {
            for &t in &axes[2] {
                let pt = [x, y, t];
                for o in 0..2 {
                    let got = |v| tape.value(v).data()[idx];
                    assert!((got(outs[o].value) - grid.data()[idx * 2 + o]).abs() < 1e-13);
                    for c in 0..3 {
                        let j = jet2_forward(&spec, &p, &pt, c).unwrap()[o];
                        assert!((got(outs[o].d1(c)) - j.d1).abs() < 1e-12);
                        if c < 2 {
                            assert!((got(outs[o].d2(c)) - j.d2).abs() < 1e-12);
                        }
                    }
                }
                idx += 1;
            }
        }
    }
}

#[test]
fn taped_one_axis_separable() {
    let (spec, p) = separable_linear(&[vec![2.0, -1.0, 0.5]], 3);
    let mut tape = Tape::new();
    let tp = TapedParams::record(&mut tape, &p);
    let outs = spinn_output_jets(&mut tape, &spec, &tp, &[vec![1.0, -2.0]], &[Direction::second(0)]).unwrap();
    assert_eq!(tape.value(outs[0].value).data(), &[1.5, -3.0]);
    assert_eq!(tape.value(outs[0].d1(0)).data(), &[1.5, 1.5]);
    assert_eq!(tape.value(outs[0].d2(0)).data(), &[0.0, 0.0]);
}

#[test]
fn parameter_counts() {
    let poisson = NetworkSpec::mlp(vec![2, 100, 100, 100, 1], Activation::Tanh);
    assert_eq!(poisson.parameter_count(), 20601);
    let burgers = NetworkSpec::mlp(vec![2, 40, 40, 40, 40, 40, 40, 1], Activation::Tanh);
    assert_eq!(burgers.parameter_count(), 8361);
    let beltrami = NetworkSpec::separable(3, vec![50, 50], 50, 3, Activation::Tanh);
    assert_eq!(beltrami.parameter_count(), 30900);
    let spinn_burgers = NetworkSpec::separable(2, vec![50, 50, 50], 50, 1, Activation::Tanh);
    assert_eq!(spinn_burgers.parameter_count(), 15500);
}

proptest! {
    #[test]
    fn forward_is_finite_and_deterministic(
        seed in 0u64..1000,
        width in 1usize..12,
        xs in proptest::collection::vec(-5.0f64..5.0, 2..20),
    ) {
        let spec = NetworkSpec::mlp(vec![2, width, width, 1], Activation::Tanh);
        let p = init_params(&spec, seed).unwrap();
        let n = xs.len() / 2;
        let x = Tensor::new(vec![n, 2], xs[..2 * n].to_vec()).unwrap();
        let a = mlp_forward(&spec, &p, &x).unwrap();
        let b = mlp_forward(&spec, &p, &x).unwrap();
        prop_assert_eq!(a.shape(), &[n, 1]);
        prop_assert!(a.data().iter().all(|v| v.is_finite()));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn batch_rows_are_independent(seed in 0u64..500, x0 in -2.0f64..2.0, x1 in -2.0f64..2.0) {
        let spec = NetworkSpec::mlp(vec![2, 7, 1], Activation::Sin);
        let p = init_params(&spec, seed).unwrap();
        let single = mlp_forward(&spec, &p, &Tensor::from_rows(&[vec![x0, x1]]).unwrap()).unwrap();
        let batch = mlp_forward(&spec, &p, &Tensor::from_rows(&[vec![0.1, 0.2], vec![x0, x1]]).unwrap()).unwrap();
        prop_assert!((single.data()[0] - batch.data()[1]).abs() < 1e-14);
    }
}
