use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::network::{chain_trace, normalize_inputs, Activation, LayerParams, NetworkKind, NetworkParams, NetworkSpec};
use crate::tensor::{matmul, Tensor};

/// Hessians of the mean-square output loss with respect to every layer
/// output, from the backward recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianStack {
    /// `h[l]` is `∂²L/∂x^(l)²`; `h[0]` is taken with respect to the network
    /// input and `h[n]` is `2I/m`.
    pub h: Vec<Tensor>,
    /// `f'(z^(l))` of layer `l = 1..n` (index `l - 1`).
    pub b: Vec<Vec<f64>>,
    /// `(∂L/∂x^(l)) ⊙ f''(z^(l))` of layer `l = 1..n`.
    pub c: Vec<Vec<f64>>,
    pub loss: f64,
}

impl HessianStack {
    /// Largest `‖H - Hᵀ‖_max` over the stack.
    pub fn symmetry_residual(&self) -> f64 {
        self.h
            .iter()
            .map(|h| {
                let n = h.rows();
                let mut r: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        r = r.max((h.get2(i, j) - h.get2(j, i)).abs());
                    }
                }
                r
            })
            .fold(0.0, f64::max)
    }
}

fn weighted_gram(w: &Tensor, mid: &Tensor) -> Result<Tensor, AnalysisError> {
    let t = matmul(mid, false, w, false)?;
    Ok(matmul(w, true, &t, false)?)
}

/// `L = ‖x^(n) - y‖² / m` for the MLP at a raw input `point`, with
/// `H^(l-1) = Wᵀ B H^(l) B W + Wᵀ diag(C) W` down the chain.
pub fn hessian_recursion(
    spec: &NetworkSpec,
    params: &NetworkParams,
    point: &[f64],
    target: &[f64],
) -> Result<HessianStack, AnalysisError> {
    if spec.kind != NetworkKind::Mlp {
        return Err(AnalysisError::Unsupported("Hessian recursion needs an MLP".into()));
    }
    params.check(spec)?;
    let m = spec.output_dim();
    if target.len() != m {
        return Err(AnalysisError::Shape(format!("target has {} entries, network {m} outputs", target.len())));
    }
    let x0 = normalize_inputs(spec, &Tensor::new(vec![1, point.len()], point.to_vec())?)?;
    let trace = chain_trace(&params.layers, spec.activation, &x0)?;
    let out = trace.output().data();
    let loss = out.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / m as f64;
    let mut g: Vec<f64> = out.iter().zip(target).map(|(a, b)| 2.0 * (a - b) / m as f64).collect();
    let mut eye = Tensor::zeros(&[m, m]);
    for i in 0..m {
        eye.data_mut()[i * m + i] = 2.0 / m as f64;
    }
    let n = params.layers.len();
    let mut hs = vec![eye];
    let mut bs = Vec::with_capacity(n);
    let mut cs = Vec::with_capacity(n);
    for l in (0..n).rev() {
        let layer = &params.layers[l];
        let act = if l + 1 == n { Activation::Linear } else { spec.activation };
        let z = trace.pre[l].data();
        let b: Vec<f64> = z.iter().map(|&v| act.derivative(v)).collect();
        let fpp = z
            .iter()
            .map(|&v| act.second_derivative(v).ok_or(AnalysisError::NoSecondDerivative(act)))
            .collect::<Result<Vec<_>, _>>()?;
        let c: Vec<f64> = g.iter().zip(&fpp).map(|(a, f)| a * f).collect();
        let h_next = hs.last().expect("seeded");
        let w = layer.fan_out();
        let mut mid = h_next.clone();
        for i in 0..w {
            for j in 0..w {
                mid.data_mut()[i * w + j] *= b[i] * b[j];
            }
            mid.data_mut()[i * w + i] += c[i];
        }
        hs.push(weighted_gram(&layer.weight, &mid)?);
        let bg: Vec<f64> = g.iter().zip(&b).map(|(a, d)| a * d).collect();
        g = matmul(&Tensor::new(vec![1, w], bg)?, false, &layer.weight, false)?.into_data();
        bs.push(b);
        cs.push(c);
    }
    hs.reverse();
    bs.reverse();
    cs.reverse();
    Ok(HessianStack { h: hs, b: bs, c: cs, loss })
}

/// Loss of the sub-network `layers` (the last one affine) applied to `x`.
pub fn tail_loss(layers: &[LayerParams], activation: Activation, x: &[f64], target: &[f64]) -> Result<f64, AnalysisError> {
    let t = chain_trace(layers, activation, &Tensor::new(vec![1, x.len()], x.to_vec())?)?;
    let out = t.output().data();
    Ok(out.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / target.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianLayerCheck {
    /// Index into [`HessianStack::h`].
    pub layer: usize,
    /// `‖H_rec - H_fd‖_F / ‖H_fd‖_F`.
    pub rel_error: f64,
    pub symmetry: f64,
}

/// Recursion against finite differences of the tail loss, layer by layer.
pub fn hessian_check(
    spec: &NetworkSpec,
    params: &NetworkParams,
    point: &[f64],
    target: &[f64],
    step: f64,
) -> Result<Vec<HessianLayerCheck>, AnalysisError> {
    let stack = hessian_recursion(spec, params, point, target)?;
    let x0 = normalize_inputs(spec, &Tensor::new(vec![1, point.len()], point.to_vec())?)?;
    let trace = chain_trace(&params.layers, spec.activation, &x0)?;
    let mut out = Vec::with_capacity(params.layers.len());
    for l in 0..params.layers.len() {
        let x: Vec<f64> = if l == 0 { x0.data().to_vec() } else { trace.outputs[l - 1].data().to_vec() };
        let f = |v: &[f64]| tail_loss(&params.layers[l..], spec.activation, v, target);
        let fd = fd_hessian(&f, &x, step)?;
        let h = &stack.h[l];
        let diff: f64 = h.data().iter().zip(fd.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm = fd.sum_sq();
        let rel_error = if norm > 0.0 { (diff / norm).sqrt() } else { diff.sqrt() };
        let mut symmetry: f64 = 0.0;
        let k = h.rows();
        for i in 0..k {
            for j in 0..k {
                symmetry = symmetry.max((h.get2(i, j) - h.get2(j, i)).abs());
            }
        }
        out.push(HessianLayerCheck { layer: l, rel_error, symmetry });
    }
    Ok(out)
}

/// Central four-point finite-difference Hessian of `f` at `x`.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> Result<f64, AnalysisError>, x: &[f64], h: f64) -> Result<Tensor, AnalysisError> {
    let n = x.len();
    let mut out = vec![0.0; n * n];
    let mut p = x.to_vec();
    for i in 0..n {
        for j in i..n {
            let mut eval = |si: f64, sj: f64| -> Result<f64, AnalysisError> {
                p.copy_from_slice(x);
                p[i] += si * h;
                p[j] += sj * h;
                f(&p)
            };
            let v = (eval(1.0, 1.0)? - eval(1.0, -1.0)? - eval(-1.0, 1.0)? + eval(-1.0, -1.0)?) / (4.0 * h * h);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    Ok(Tensor::new(vec![n, n], out)?)
}
