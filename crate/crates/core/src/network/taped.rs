//! Network evaluation recorded on a [`Tape`], carrying input-derivative jets
//! as extra tensor streams so that PDE residuals stay differentiable with
//! respect to the parameters.

use super::{Activation, NetworkError, NetworkKind, NetworkParams, NetworkSpec};
use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;
use std::f64::consts::FRAC_PI_2;

/// Parameters recorded on a tape, `(weight, bias)` per layer.
#[derive(Debug, Clone)]
pub struct TapedParams {
    pub layers: Vec<(Var, Var)>,
}

impl TapedParams {
    pub fn record(tape: &mut Tape, params: &NetworkParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| (tape.param(l.weight.clone()), tape.param(l.bias.clone())))
                .collect(),
        }
    }

    /// Flat `[w0, b0, w1, b1, ..]` handles matching [`NetworkParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }
}

/// Which input derivatives to carry: first derivative along `coord`, plus
/// the second one when `second` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub coord: usize,
    pub second: bool,
}

impl Direction {
    pub fn first(coord: usize) -> Self {
        Self {
            coord,
            second: false,
        }
    }

    pub fn second(coord: usize) -> Self {
        Self { coord, second: true }
    }
}

/// One network output as a column tensor `[N, 1]` with its requested partial
/// derivatives, indexed by input coordinate.
#[derive(Debug, Clone)]
pub struct OutputJets {
    pub value: Var,
    pub d1: Vec<Option<Var>>,
    pub d2: Vec<Option<Var>>,
}

impl OutputJets {
    pub fn d1(&self, coord: usize) -> Var {
        self.d1[coord].expect("first derivative was requested")
    }

    pub fn d2(&self, coord: usize) -> Var {
        self.d2[coord].expect("second derivative was requested")
    }
}

struct Streams {
    value: Var,
    d1: Vec<Option<Var>>,
    d2: Vec<Option<Var>>,
}

fn add_opt(tape: &mut Tape, a: Option<Var>, b: Option<Var>) -> Result<Option<Var>, NetworkError> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(tape.add(a, b)?),
        (a, None) => a,
        (None, b) => b,
    })
}

/// Runs one chain on a normalized `[n, d_in]` batch. `scales[c]` is the
/// derivative of the normalized coordinate `c` with respect to the raw one;
/// `dirs` refer to local coordinates of this chain.
fn chain_streams(
    tape: &mut Tape,
    layers: &[(Var, Var)],
    activation: Activation,
    input: Tensor,
    scales: &[f64],
    dirs: &[Direction],
) -> Result<Streams, NetworkError> {
    if !dirs.is_empty() && activation == Activation::Relu {
        return Err(NetworkError::UnsupportedActivation(activation));
    }
    let n = input.rows();
    let d_in = input.cols();
    let mut x = tape.constant(input);
    let mut x1: Vec<Option<Var>> = Vec::with_capacity(dirs.len());
    for dir in dirs {
        if dir.coord >= d_in {
            return Err(NetworkError::Coordinate {
                coord: dir.coord,
                dim: d_in,
            });
        }
        let mut seed = vec![0.0; n * d_in];
        for row in seed.chunks_mut(d_in) {
            row[dir.coord] = scales[dir.coord];
        }
        x1.push(Some(tape.constant(Tensor::new(vec![n, d_in], seed)?)));
    }
    let mut x2: Vec<Option<Var>> = vec![None; dirs.len()];

    for (li, &(w, b)) in layers.iter().enumerate() {
        let lin = tape.matmul_t(x, false, w, true)?;
        let z = tape.add_row(lin, b)?;
        let mut z1 = Vec::with_capacity(dirs.len());
        let mut z2 = Vec::with_capacity(dirs.len());
        for (k, dir) in dirs.iter().enumerate() {
            z1.push(match x1[k] {
                Some(v) => Some(tape.matmul_t(v, false, w, true)?),
                None => None,
            });
            z2.push(match (dir.second, x2[k]) {
                (true, Some(v)) => Some(tape.matmul_t(v, false, w, true)?),
                _ => None,
            });
        }
        if li + 1 == layers.len() {
            x = z;
            x1 = z1;
            x2 = z2;
            break;
        }
        // f(z), f'(z), f''(z); `None` stands for the constants 1 and 0 of a
        // linear activation.
        let (fz, fp, fpp) = match activation {
            Activation::Tanh => {
                let t = tape.tanh(z);
                if dirs.is_empty() {
                    (t, None, None)
                } else {
                    let t2 = tape.square(t);
                    let neg = tape.scale(t2, -1.0);
                    let s = tape.offset(neg, 1.0);
                    let ts = tape.mul(t, s)?;
                    let fpp = tape.scale(ts, -2.0);
                    (t, Some(s), Some(fpp))
                }
            }
            Activation::Sin => {
                let s = tape.sin(z);
                if dirs.is_empty() {
                    (s, None, None)
                } else {
                    let shifted = tape.offset(z, FRAC_PI_2);
                    let c = tape.sin(shifted);
                    let fpp = tape.scale(s, -1.0);
                    (s, Some(c), Some(fpp))
                }
            }
            Activation::Relu => (tape.relu(z), None, None),
            Activation::Linear => (z, None, None),
        };
        x = fz;
        for (k, dir) in dirs.iter().enumerate() {
            let Some(zk) = z1[k] else {
                x1[k] = None;
                x2[k] = None;
                continue;
            };
            let first = match fp {
                Some(s) => tape.mul(s, zk)?,
                None => zk,
            };
            let second = if dir.second {
                let curv = match fpp {
                    Some(c) => {
                        let sq = tape.square(zk);
                        Some(tape.mul(c, sq)?)
                    }
                    None => None,
                };
                let lin = match (fp, z2[k]) {
                    (Some(s), Some(v)) => Some(tape.mul(s, v)?),
                    (None, v) => v,
                    (Some(_), None) => None,
                };
                add_opt(tape, curv, lin)?
            } else {
                None
            };
            x1[k] = Some(first);
            x2[k] = second;
        }
    }
    Ok(Streams {
        value: x,
        d1: x1,
        d2: x2,
    })
}

fn zero_column(tape: &mut Tape, n: usize) -> Var {
    tape.constant(Tensor::zeros(&[n, 1]))
}

/// MLP outputs and input derivatives at scattered raw points `[n, d_in]`.
pub fn mlp_output_jets(
    tape: &mut Tape,
    spec: &NetworkSpec,
    params: &TapedParams,
    points: &Tensor,
    dirs: &[Direction],
) -> Result<Vec<OutputJets>, NetworkError> {
    if spec.kind != NetworkKind::Mlp {
        return Err(NetworkError::InvalidSpec("expected an MLP spec".into()));
    }
    let input = super::normalize_inputs(spec, points)?;
    let n = input.rows();
    let map = spec.input_map();
    let s = chain_streams(tape, &params.layers, spec.activation, input, &map.scale, dirs)?;
    let d_in = spec.input_dim();
    let mut outs = Vec::with_capacity(spec.output_dim());
    for o in 0..spec.output_dim() {
        let value = tape.cols(s.value, o, 1)?;
        let mut d1 = vec![None; d_in];
        let mut d2 = vec![None; d_in];
        for (k, dir) in dirs.iter().enumerate() {
            d1[dir.coord] = Some(match s.d1[k] {
                Some(v) => tape.cols(v, o, 1)?,
                None => zero_column(tape, n),
            });
            if dir.second {
                d2[dir.coord] = Some(match s.d2[k] {
                    Some(v) => tape.cols(v, o, 1)?,
                    None => zero_column(tape, n),
                });
            }
        }
        outs.push(OutputJets { value, d1, d2 });
    }
    Ok(outs)
}

/// Separable outputs over the Cartesian grid of `axis_points`, flattened
/// row-major into `[N, 1]` columns, with single-axis derivatives.
pub fn spinn_output_jets(
    tape: &mut Tape,
    spec: &NetworkSpec,
    params: &TapedParams,
    axis_points: &[Vec<f64>],
    dirs: &[Direction],
) -> Result<Vec<OutputJets>, NetworkError> {
    let shape = match (spec.kind, spec.separable) {
        (NetworkKind::Separable, Some(s)) => s,
        _ => return Err(NetworkError::InvalidSpec("expected a separable spec".into())),
    };
    if axis_points.len() != shape.axes {
        return Err(NetworkError::AxisCount {
            expected: shape.axes,
            actual: axis_points.len(),
        });
    }
    let map = spec.input_map();
    let per = spec.layers_per_subnet();
    let r = shape.rank;

    // Per-axis feature streams.
    let mut feats = Vec::with_capacity(shape.axes);
    for (a, pts) in axis_points.iter().enumerate() {
        let local: Vec<Direction> = dirs
            .iter()
            .filter(|d| d.coord == a)
            .map(|d| Direction {
                coord: 0,
                second: d.second,
            })
            .collect();
        let input = Tensor::column(pts.iter().map(|&p| map.apply(a, p)).collect())?;
        let layers = &params.layers[a * per..(a + 1) * per];
        feats.push(chain_streams(
            tape,
            layers,
            spec.activation,
            input,
            &[map.scale[a]],
            &local,
        )?);
    }
    let sizes: Vec<usize> = axis_points.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();

    let mut ones_col = None;
    let mut outs = Vec::with_capacity(shape.outputs);
    for o in 0..shape.outputs {
        let mut blocks = Vec::with_capacity(shape.axes);
        for f in &feats {
            blocks.push(tape.cols(f.value, o * r, r)?);
        }
        let value = contract(tape, &blocks, &mut ones_col, r, total)?;
        let mut d1 = vec![None; shape.axes];
        let mut d2 = vec![None; shape.axes];
        for dir in dirs {
            let a = dir.coord;
            if a >= shape.axes {
                return Err(NetworkError::Coordinate {
                    coord: a,
                    dim: shape.axes,
                });
            }
            let f = &feats[a];
            for (order, stream) in [(1, f.d1.first().copied().flatten()), (2, f.d2.first().copied().flatten())] {
                if order == 2 && !dir.second {
                    continue;
                }
                let field = match stream {
                    Some(v) => {
                        let mut bl = blocks.clone();
                        bl[a] = tape.cols(v, o * r, r)?;
                        contract(tape, &bl, &mut ones_col, r, total)?
                    }
                    None => zero_column(tape, total),
                };
                if order == 1 {
                    d1[a] = Some(field);
                } else {
                    d2[a] = Some(field);
                }
            }
        }
        outs.push(OutputJets { value, d1, d2 });
    }
    Ok(outs)
}

/// `sum_k prod_a B_a[i_a, k]` flattened to `[N, 1]`.
fn contract(
    tape: &mut Tape,
    blocks: &[Var],
    ones_col: &mut Option<Var>,
    r: usize,
    total: usize,
) -> Result<Var, NetworkError> {
    let field = if blocks.len() == 1 {
        let ones = *ones_col.get_or_insert_with(|| tape.constant(Tensor::full(&[r, 1], 1.0)));
        tape.matmul(blocks[0], ones)?
    } else {
        let mut p = blocks[0];
        for &b in &blocks[1..blocks.len() - 1] {
            p = tape.khatri_rao(p, b)?;
        }
        tape.matmul_t(p, false, blocks[blocks.len() - 1], true)?
    };
    Ok(tape.reshape(field, vec![total, 1])?)
}
