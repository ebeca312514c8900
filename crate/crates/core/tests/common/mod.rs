#![allow(dead_code)]

use pinnsnn::autodiff::{Jet2, Tape, Var};
use pinnsnn::network::{init_params, jet2_forward, mlp_forward, Activation, NetworkParams, NetworkSpec};
use pinnsnn::pinn::{loss_and_grad, physics_loss, sample_collocation, CollocationCounts, PdeProblem, ProblemId};
use pinnsnn::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `‖a - b‖ / ‖b‖` over paired samples.
pub fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

type Build = fn(&mut Tape, &[Var]) -> Var;
type JetCase<'a> = (&'a dyn Fn(Jet2) -> Jet2, &'a dyn Fn(f64) -> f64);

fn primitive_cases() -> Vec<(&'static str, Vec<Vec<usize>>, Build)> {
    vec![
        ("add", vec![vec![3, 4], vec![3, 4]], |t, v| {
            let s = t.add(v[0], v[1]).unwrap();
            let q = t.square(s);
            t.sum(q)
        }),
        ("sub", vec![vec![3, 4], vec![3, 4]], |t, v| {
            let s = t.sub(v[0], v[1]).unwrap();
            let q = t.square(s);
            t.sum(q)
        }),
        ("mul", vec![vec![3, 4], vec![3, 4]], |t, v| {
            let s = t.mul(v[0], v[1]).unwrap();
            t.sum(s)
        }),
        ("matmul", vec![vec![3, 4], vec![4, 2]], |t, v| {
            let s = t.matmul(v[0], v[1]).unwrap();
            let q = t.tanh(s);
            t.sum(q)
        }),
        ("matmul_t", vec![vec![4, 3], vec![2, 4]], |t, v| {
            let s = t.matmul_t(v[0], true, v[1], true).unwrap();
            let q = t.sin(s);
            t.sum(q)
        }),
        ("add_row", vec![vec![3, 4], vec![4]], |t, v| {
            let s = t.add_row(v[0], v[1]).unwrap();
            let q = t.square(s);
            t.mean(q)
        }),
        ("tanh", vec![vec![5]], |t, v| {
            let s = t.tanh(v[0]);
            t.sum(s)
        }),
        ("sin", vec![vec![5]], |t, v| {
            let s = t.sin(v[0]);
            t.sum(s)
        }),
        ("exp", vec![vec![5]], |t, v| {
            let s = t.exp(v[0]);
            t.mean(s)
        }),
        ("square", vec![vec![5]], |t, v| {
            let s = t.square(v[0]);
            t.sum(s)
        }),
        ("scale_offset", vec![vec![5]], |t, v| {
            let s = t.scale(v[0], -1.7);
            let o = t.offset(s, 0.3);
            let q = t.square(o);
            t.sum(q)
        }),
        ("mean", vec![vec![2, 3]], |t, v| {
            let s = t.sin(v[0]);
            t.mean(s)
        }),
        ("cols", vec![vec![3, 5]], |t, v| {
            let s = t.cols(v[0], 1, 3).unwrap();
            let q = t.exp(s);
            t.sum(q)
        }),
        ("khatri_rao", vec![vec![2, 3], vec![4, 3]], |t, v| {
            let s = t.khatri_rao(v[0], v[1]).unwrap();
            let q = t.tanh(s);
            t.sum(q)
        }),
        ("reshape", vec![vec![2, 6]], |t, v| {
            let s = t.reshape(v[0], vec![3, 4]).unwrap();
            let w = t.constant(Tensor::new(vec![4, 1], vec![1.0, -2.0, 0.5, 3.0]).unwrap());
            let m = t.matmul(s, w).unwrap();
            let q = t.square(m);
            t.sum(q)
        }),
    ]
}

fn eval_case(build: Build, inputs: &[Tensor]) -> (f64, Vec<Tensor>) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let loss = build(&mut tape, &vars);
    let g = tape.grad(loss, &vars).unwrap();
    (tape.scalar_value(loss), g)
}

/// Reverse-mode gradient of every primitive against central differences
/// (step 1e-5) on inputs drawn from [-2, 2]; relative error per primitive.
pub fn primitive_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    primitive_cases()
        .into_iter()
        .map(|(name, shapes, build)| {
            let inputs: Vec<Tensor> = shapes.iter().map(|s| random(&mut rng, s)).collect();
            let (_, grads) = eval_case(build, &inputs);
            let (mut g, mut fd) = (Vec::new(), Vec::new());
            for (i, x) in inputs.iter().enumerate() {
                for k in 0..x.len() {
                    let mut plus = inputs.clone();
                    plus[i].data_mut()[k] += h;
                    let mut minus = inputs.clone();
                    minus[i].data_mut()[k] -= h;
                    fd.push((eval_case(build, &plus).0 - eval_case(build, &minus).0) / (2.0 * h));
                    g.push(grads[i].data()[k]);
                }
            }
            (name, rel_vec(&g, &fd))
        })
        .collect()
}

/// Loss gradient for every problem (dense, and separable where the input has
/// two or more axes) against central differences of the loss value on up to
/// `per_tensor` entries of each parameter tensor.
pub fn pde_gradient_errors(per_tensor: usize) -> Vec<(String, f64)> {
    let counts = CollocationCounts {
        interior: 30,
        boundary: 12,
        initial: 8,
        per_axis: 5,
    };
    let h = 1e-5;
    let mut out = Vec::new();
    for id in ProblemId::ALL {
        let problem = PdeProblem::new(id);
        let (din, dout) = (problem.input_dim(), problem.output_dim());
        let mut specs = vec![(
            "dense",
            NetworkSpec::mlp(vec![din, 6, 5, dout], Activation::Tanh).with_input_bounds(problem.domain.clone()),
        )];
        if din > 1 {
            specs.push((
                "separable",
                NetworkSpec::separable(din, vec![5, 4], 3, dout, Activation::Tanh).with_input_bounds(problem.domain.clone()),
            ));
        }
        let colloc = sample_collocation(&problem, counts, 2).unwrap();
        for (kind, spec) in specs {
            let params = init_params(&spec, 7).unwrap();
            let (_, grads) = loss_and_grad(&problem, &spec, &params, &colloc).unwrap();
            let tensors = params.tensors();
            let loss_at = |ts: Vec<Tensor>| physics_loss(&problem, &spec, &NetworkParams::from_tensors(ts), &colloc).unwrap().total;
            let (mut g, mut fd) = (Vec::new(), Vec::new());
            for (ti, t) in tensors.iter().enumerate() {
                let step = (t.len() / per_tensor).max(1);
                for k in (0..t.len()).step_by(step).take(per_tensor) {
                    let mut plus = tensors.clone();
                    plus[ti].data_mut()[k] += h;
                    let mut minus = tensors.clone();
                    minus[ti].data_mut()[k] -= h;
                    fd.push((loss_at(plus) - loss_at(minus)) / (2.0 * h));
                    g.push(grads[ti].data()[k]);
                }
            }
            out.push((format!("{id}/{kind}"), rel_vec(&g, &fd)));
        }
    }
    out
}

/// Largest relative error of jet second derivatives: scalar primitives and
/// a random 1-8-1 tanh network, against second-order central differences
/// with step 1e-3.
pub fn jet_second_derivative_error() -> f64 {
    let h = 1e-3;
    let fd2 = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut worst: f64 = 0.0;
    let scalar: [JetCase; 5] = [
        (&|j: Jet2| j.tanh(), &|x: f64| x.tanh()),
        (&|j: Jet2| j.sin(), &|x: f64| x.sin()),
        (&|j: Jet2| j.exp(), &|x: f64| x.exp()),
        (&|j: Jet2| j.square().tanh(), &|x: f64| (x * x).tanh()),
        (&|j: Jet2| (j * j.sin()).exp() - j.scale(0.5), &|x: f64| (x * x.sin()).exp() - 0.5 * x),
    ];
    for x in [-1.3, -0.2, 0.4, 1.1] {
        for (jf, f) in &scalar {
            let j = jf(Jet2::variable(x));
            worst = worst.max(rel(j.d2, fd2(*f, x)));
        }
    }
    let spec = NetworkSpec::mlp(vec![1, 8, 1], Activation::Tanh);
    let p = init_params(&spec, 21).unwrap();
    let net = |x: f64| mlp_forward(&spec, &p, &Tensor::new(vec![1, 1], vec![x]).unwrap()).unwrap().data()[0];
    for x in [-0.9, -0.1, 0.35, 1.4] {
        let j = jet2_forward(&spec, &p, &[x], 0).unwrap()[0];
        worst = worst.max(rel(j.d2, fd2(&net, x)));
    }
    worst
}
