//! Tensor-level reverse-mode tape.
//!
//! Every primitive records its output value and operand slots. `grad` walks
//! the nodes backwards from a scalar loss and accumulates adjoints additively.
//! The backward sweep only reads the tape, so running it twice gives the same
//! gradients bit for bit.

use crate::tensor::{gemm_into, matmul, Tensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapeError {
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("variable {0} is not a recorded parameter")]
    NotAParameter(usize),
    #[error("variable {0} does not belong to this tape")]
    UnknownVar(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `[n, m] + [m]` broadcast over rows.
    AddRow(Var, Var),
    MatMul { a: Var, ta: bool, b: Var, tb: bool },
    Scale(Var, f64),
    Offset(Var),
    Tanh(Var),
    Sin(Var),
    Exp(Var),
    Relu(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    Cols { x: Var, start: usize },
    /// Row-wise Khatri-Rao product: `out[i*n2 + j, k] = a[i, k] * b[j, k]`.
    KhatriRao(Var, Var),
    Reshape(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TapeError {
    TapeError::Tensor(TensorError::Mismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    })
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    /// Records a differentiable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Param)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch("add", va, vb));
        }
        let out = va.zip_map(vb, |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch("sub", va, vb));
        }
        let out = va.zip_map(vb, |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch("mul", va, vb));
        }
        let out = va.zip_map(vb, |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// Adds a length-`m` bias vector to every row of an `[n, m]` matrix.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, TapeError> {
        let (vx, vb) = (self.value(x), self.value(bias));
        vx.expect_rank("add_row", 2)?;
        let m = vx.cols();
        if vb.len() != m {
            return Err(mismatch("add_row", vx, vb));
        }
        let b = vb.data();
        let mut out = vx.data().to_vec();
        for row in out.chunks_mut(m) {
            for (o, bb) in row.iter_mut().zip(b) {
                *o += bb;
            }
        }
        let out = Tensor::from_raw(vx.shape().to_vec(), out);
        Ok(self.push(out, Op::AddRow(x, bias)))
    }

    /// `op(a) · op(b)` where `ta`/`tb` request a transpose.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Result<Var, TapeError> {
        let out = matmul(self.value(a), ta, self.value(b), tb)?;
        Ok(self.push(out, Op::MatMul { a, ta, b, tb }))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        self.matmul_t(a, false, b, false)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        self.push(out, Op::Scale(a, c))
    }

    /// `a + c` for a constant `c`.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        self.push(out, Op::Offset(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::sin);
        self.push(out, Op::Sin(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).mean());
        self.push(out, Op::Mean(a))
    }

    /// Columns `start..start+len` of a rank-2 value.
    pub fn cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, TapeError> {
        let vx = self.value(x);
        vx.expect_rank("cols", 2)?;
        if start + len > vx.cols() {
            return Err(TapeError::Tensor(TensorError::Mismatch {
                op: "cols",
                left: vx.shape().to_vec(),
                right: vec![start, len],
            }));
        }
        let out = vx.cols_slice(start, len);
        Ok(self.push(out, Op::Cols { x, start }))
    }

    pub fn khatri_rao(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (va, vb) = (self.value(a), self.value(b));
        va.expect_rank("khatri_rao", 2)?;
        vb.expect_rank("khatri_rao", 2)?;
        if va.cols() != vb.cols() {
            return Err(mismatch("khatri_rao", va, vb));
        }
        let (n1, n2, r) = (va.rows(), vb.rows(), va.cols());
        let mut out = Vec::with_capacity(n1 * n2 * r);
        for i in 0..n1 {
            let ra = va.row(i);
            for j in 0..n2 {
                out.extend(ra.iter().zip(vb.row(j)).map(|(x, y)| x * y));
            }
        }
        let out = Tensor::from_raw(vec![n1 * n2, r], out);
        Ok(self.push(out, Op::KhatriRao(a, b)))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, TapeError> {
        let out = self.value(x).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Gradients of the scalar `loss` with respect to each of `params`.
    pub fn grad(&self, loss: Var, params: &[Var]) -> Result<Vec<Tensor>, TapeError> {
        if loss.0 >= self.nodes.len() {
            return Err(TapeError::UnknownVar(loss.0));
        }
        let lv = &self.nodes[loss.0].value;
        if !lv.is_scalar() {
            return Err(TapeError::NonScalarLoss(lv.shape().to_vec()));
        }
        for p in params {
            match self.nodes.get(p.0) {
                None => return Err(TapeError::UnknownVar(p.0)),
                Some(n) if !matches!(n.op, Op::Param) => return Err(TapeError::NotAParameter(p.0)),
                _ => {}
            }
        }
        let adj = self.backward(loss);
        Ok(params
            .iter()
            .map(|p| {
                adj[p.0]
                    .clone()
                    .unwrap_or_else(|| Tensor::zeros(self.nodes[p.0].value.shape()))
            })
            .collect())
    }

    fn backward(&self, loss: Var) -> Vec<Option<Tensor>> {
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Tensor::full(self.nodes[loss.0].value.shape(), 1.0));

        fn acc(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut adj[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match node.op {
                Op::Constant | Op::Param => {
                    adj[i] = Some(g);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, a, g.clone());
                    acc(&mut adj, b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, b, g.map(|x| -x));
                    acc(&mut adj, a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(b), |x, y| x * y);
                    let gb = g.zip_map(self.value(a), |x, y| x * y);
                    acc(&mut adj, a, ga);
                    acc(&mut adj, b, gb);
                }
                Op::AddRow(x, bias) => {
                    let m = g.cols();
                    let mut gb = vec![0.0; m];
                    for row in g.data().chunks(m) {
                        for (s, v) in gb.iter_mut().zip(row) {
                            *s += v;
                        }
                    }
                    let gb = Tensor::from_raw(self.value(bias).shape().to_vec(), gb);
                    acc(&mut adj, bias, gb);
                    acc(&mut adj, x, g);
                }
                Op::MatMul { a, ta, b, tb } => {
                    let (va, vb) = (self.value(a), self.value(b));
                    // C = op(A) op(B); dA = G op(B)^T (transposed back if ta).
                    let ga = if ta {
                        gemm_new(vb, tb, &g, true, va.shape())
                    } else {
                        gemm_new(&g, false, vb, !tb, va.shape())
                    };
                    let gb = if tb {
                        gemm_new(&g, true, va, ta, vb.shape())
                    } else {
                        gemm_new(va, !ta, &g, false, vb.shape())
                    };
                    acc(&mut adj, a, ga);
                    acc(&mut adj, b, gb);
                }
                Op::Scale(a, c) => acc(&mut adj, a, g.map(|x| c * x)),
                Op::Offset(a) => acc(&mut adj, a, g),
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |x, t| x * (1.0 - t * t));
                    acc(&mut adj, a, ga);
                }
                Op::Sin(a) => {
                    let ga = g.zip_map(self.value(a), |x, z| x * z.cos());
                    acc(&mut adj, a, ga);
                }
                Op::Exp(a) => {
                    let ga = g.zip_map(&node.value, |x, e| x * e);
                    acc(&mut adj, a, ga);
                }
                Op::Relu(a) => {
                    let ga = g.zip_map(self.value(a), |x, z| if z > 0.0 { x } else { 0.0 });
                    acc(&mut adj, a, ga);
                }
                Op::Square(a) => {
                    let ga = g.zip_map(self.value(a), |x, z| 2.0 * x * z);
                    acc(&mut adj, a, ga);
                }
                Op::Sum(a) => {
                    let s = g.data()[0];
                    acc(&mut adj, a, Tensor::full(self.value(a).shape(), s));
                }
                Op::Mean(a) => {
                    let va = self.value(a);
                    let s = g.data()[0] / va.len() as f64;
                    acc(&mut adj, a, Tensor::full(va.shape(), s));
                }
                Op::Cols { x, start } => {
                    let vx = self.value(x);
                    let (r, c) = (vx.rows(), vx.cols());
                    let len = g.cols();
                    let mut gx = vec![0.0; r * c];
                    for i in 0..r {
                        gx[i * c + start..i * c + start + len].copy_from_slice(g.row(i));
                    }
                    acc(&mut adj, x, Tensor::from_raw(vec![r, c], gx));
                }
                Op::KhatriRao(a, b) => {
                    let (va, vb) = (self.value(a), self.value(b));
                    let (n1, n2, r) = (va.rows(), vb.rows(), va.cols());
                    let mut ga = vec![0.0; n1 * r];
                    let mut gb = vec![0.0; n2 * r];
                    let gd = g.data();
                    for i in 0..n1 {
                        let ra = va.row(i);
                        for j in 0..n2 {
                            let rg = &gd[(i * n2 + j) * r..(i * n2 + j + 1) * r];
                            let rb = vb.row(j);
                            for k in 0..r {
                                ga[i * r + k] += rg[k] * rb[k];
                                gb[j * r + k] += rg[k] * ra[k];
                            }
                        }
                    }
                    acc(&mut adj, a, Tensor::from_raw(vec![n1, r], ga));
                    acc(&mut adj, b, Tensor::from_raw(vec![n2, r], gb));
                }
                Op::Reshape(x) => {
                    let shape = self.value(x).shape().to_vec();
                    acc(&mut adj, x, Tensor::from_raw(shape, g.into_data()));
                }
            }
        }
        adj
    }
}

/// Fresh `op(a)·op(b)` reshaped to `shape` (operands already validated).
fn gemm_new(a: &Tensor, ta: bool, b: &Tensor, tb: bool, shape: &[usize]) -> Tensor {
    let mut out = vec![0.0; shape.iter().product()];
    gemm_into(
        a.data(),
        a.rows(),
        a.cols(),
        ta,
        b.data(),
        b.rows(),
        b.cols(),
        tb,
        &mut out,
        0.0,
    );
    Tensor::from_raw(shape.to_vec(), out)
}
