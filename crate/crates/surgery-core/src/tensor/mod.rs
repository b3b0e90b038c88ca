//! Dense tensors with reverse-mode automatic differentiation.
//!
//! The design is define-by-run: a [`GradTape`] records every primitive as it
//! executes, and one reverse traversal of the record computes
//! vector-Jacobian products into the `grad` buffers of participating
//! tensors. Tapes are rebuilt per forward pass and live on a single thread;
//! tensors move freely between threads while no pass is in flight.
//!
//! The op set is exactly what a small pre-norm decoder and its losses need.
//! There is no general broadcasting; the only broadcast pattern is the
//! row-vector bias add.

mod scalar;

pub mod check;

pub use check::gradient_check;
pub use scalar::{lit, Scalar};

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

/// Probability floor for cross-entropy: -ln(1e-12).
const CE_CLIP: f64 = 27.631021115928547;

struct TensorData<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

/// Shared handle to a dense array participating in a gradient tape.
///
/// Cloning a `Tensor` clones the handle, not the buffer; gradients
/// accumulated during a backward pass are visible through every handle.
pub struct Tensor<T: Scalar> {
    inner: Rc<RefCell<TensorData<T>>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Self::raw(shape, data, false))
    }

    /// Leaf with an explicit `requires_grad` flag (parameters and inputs).
    pub fn leaf(shape: Vec<usize>, data: Vec<T>, requires_grad: bool) -> Result<Self> {
        let t = Self::from_vec(shape, data)?;
        t.inner.borrow_mut().requires_grad = requires_grad;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Self::raw(shape, vec![T::zero(); numel], false)
    }

    pub fn scalar(value: T) -> Self {
        Self::raw(vec![1], vec![value], false)
    }

    fn raw(shape: Vec<usize>, data: Vec<T>, requires_grad: bool) -> Self {
        Tensor {
            inner: Rc::new(RefCell::new(TensorData {
                shape,
                data,
                requires_grad,
                grad: None,
            })),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().data.len()
    }

    /// Rows when interpreted as a matrix; 1-D tensors are a single row.
    pub fn rows(&self) -> usize {
        let b = self.inner.borrow();
        if b.shape.len() >= 2 {
            b.shape[0]
        } else {
            1
        }
    }

    /// Size of the last axis.
    pub fn cols(&self) -> usize {
        let b = self.inner.borrow();
        *b.shape.last().unwrap_or(&0)
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    pub fn value(&self) -> Vec<T> {
        self.inner.borrow().data.clone()
    }

    /// Scalar payload; panics if the tensor is not single-element.
    pub fn item(&self) -> T {
        let b = self.inner.borrow();
        assert_eq!(b.data.len(), 1, "item() on non-scalar tensor");
        b.data[0]
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.borrow().grad.clone()
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    /// Overwrites the payload in place; shape must match.
    pub fn set_data(&self, data: &[T]) {
        let mut b = self.inner.borrow_mut();
        assert_eq!(b.data.len(), data.len(), "set_data length mismatch");
        b.data.copy_from_slice(data);
    }

    pub fn with_data<R>(&self, f: impl FnOnce(&[T]) -> R) -> R {
        f(&self.inner.borrow().data)
    }

    fn accum_grad(&self, contribution: &[T]) {
        let mut b = self.inner.borrow_mut();
        debug_assert_eq!(b.data.len(), contribution.len());
        match &mut b.grad {
            Some(g) => {
                for (gi, ci) in g.iter_mut().zip(contribution) {
                    *gi = *gi + *ci;
                }
            }
            None => b.grad = Some(contribution.to_vec()),
        }
    }

    fn grad_opt(&self) -> Option<Vec<T>> {
        self.inner.borrow().grad.clone()
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let b = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("shape", &b.shape)
            .field("requires_grad", &b.requires_grad)
            .field("has_grad", &b.grad.is_some())
            .finish()
    }
}

/// One recorded primitive with handles to its input and output tensors.
enum Op<T: Scalar> {
    MatMul {
        a: Tensor<T>,
        b: Tensor<T>,
        out: Tensor<T>,
    },
    /// out = A * B^T where B is stored row-major (n x k).
    MatMulTB {
        a: Tensor<T>,
        b: Tensor<T>,
        out: Tensor<T>,
    },
    Add {
        a: Tensor<T>,
        b: Tensor<T>,
        out: Tensor<T>,
    },
    AddBias {
        x: Tensor<T>,
        bias: Tensor<T>,
        out: Tensor<T>,
    },
    Scale {
        x: Tensor<T>,
        c: T,
        out: Tensor<T>,
    },
    EmbedGather {
        table: Tensor<T>,
        ids: Vec<usize>,
        out: Tensor<T>,
    },
    LayerNorm {
        x: Tensor<T>,
        gain: Tensor<T>,
        bias: Tensor<T>,
        mean: Vec<T>,
        rstd: Vec<T>,
        out: Tensor<T>,
    },
    Gelu {
        x: Tensor<T>,
        out: Tensor<T>,
    },
    Softmax {
        x: Tensor<T>,
        causal: bool,
        out: Tensor<T>,
    },
    SliceCols {
        x: Tensor<T>,
        start: usize,
        len: usize,
        out: Tensor<T>,
    },
    SliceRows {
        x: Tensor<T>,
        start: usize,
        len: usize,
        out: Tensor<T>,
    },
    ConcatCols {
        parts: Vec<Tensor<T>>,
        out: Tensor<T>,
    },
    /// Per-position cross-entropy of row-wise softmax against target ids.
    CeFromLogits {
        logits: Tensor<T>,
        targets: Vec<usize>,
        out: Tensor<T>,
    },
    /// Per-position KL(softmax(logits) || exp(ref_logprobs)); the reference
    /// is a constant, so gradients flow only through the logits.
    KlFromLogits {
        logits: Tensor<T>,
        ref_logprobs: Vec<T>,
        out: Tensor<T>,
    },
    /// Identity on values; backward multiplies by a constant 0/1 mask.
    GradMask {
        x: Tensor<T>,
        mask: Vec<T>,
        out: Tensor<T>,
    },
    /// Scalar dot with a constant weight vector (weighted pooling).
    DotConst {
        x: Tensor<T>,
        w: Vec<T>,
        out: Tensor<T>,
    },
    /// Scalar linear combination of scalar terms.
    SumScaled {
        terms: Vec<(Tensor<T>, T)>,
        out: Tensor<T>,
    },
}

/// Ordered record of primitives from one forward pass.
///
/// Ops are appended in execution order, which is already topological for a
/// define-by-run graph, so one reverse sweep visits every op exactly once.
pub struct GradTape<T: Scalar> {
    ops: Vec<Op<T>>,
}

impl<T: Scalar> Default for GradTape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> GradTape<T> {
    pub fn new() -> Self {
        GradTape { ops: Vec::new() }
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    fn fresh(&self, shape: Vec<usize>, data: Vec<T>, inputs: &[&Tensor<T>]) -> Tensor<T> {
        let rg = inputs.iter().any(|t| t.requires_grad());
        Tensor::raw(shape, data, rg)
    }

    /// Standard matrix product: (m x k) * (k x n) -> (m x n).
    pub fn matmul(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let (ash, bsh) = (a.shape(), b.shape());
        if ash.len() != 2 || bsh.len() != 2 || ash[1] != bsh[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: ash,
                rhs: bsh,
            });
        }
        let (m, k, n) = (ash[0], ash[1], bsh[1]);
        let mut out = vec![T::zero(); m * n];
        {
            let ab = a.inner.borrow();
            let bb = b.inner.borrow();
            T::gemm(
                m,
                k,
                n,
                T::one(),
                &ab.data,
                k as isize,
                1,
                &bb.data,
                n as isize,
                1,
                T::zero(),
                &mut out,
                n as isize,
                1,
            );
        }
        let out = self.fresh(vec![m, n], out, &[a, b]);
        self.ops.push(Op::MatMul {
            a: a.clone(),
            b: b.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// A * B^T for row-major B of shape (n x k): (m x k) x (n x k) -> (m x n).
    pub fn matmul_tb(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let (ash, bsh) = (a.shape(), b.shape());
        if ash.len() != 2 || bsh.len() != 2 || ash[1] != bsh[1] {
            return Err(Error::ShapeMismatch {
                op: "matmul_tb",
                lhs: ash,
                rhs: bsh,
            });
        }
        let (m, k, n) = (ash[0], ash[1], bsh[0]);
        let mut out = vec![T::zero(); m * n];
        {
            let ab = a.inner.borrow();
            let bb = b.inner.borrow();
            // B viewed transposed: element (row kk, col nn) = b[nn * k + kk].
            T::gemm(
                m,
                k,
                n,
                T::one(),
                &ab.data,
                k as isize,
                1,
                &bb.data,
                1,
                k as isize,
                T::zero(),
                &mut out,
                n as isize,
                1,
            );
        }
        let out = self.fresh(vec![m, n], out, &[a, b]);
        self.ops.push(Op::MatMulTB {
            a: a.clone(),
            b: b.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    pub fn add(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let (ash, bsh) = (a.shape(), b.shape());
        if ash != bsh {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: ash,
                rhs: bsh,
            });
        }
        let data = {
            let ab = a.inner.borrow();
            let bb = b.inner.borrow();
            ab.data
                .iter()
                .zip(&bb.data)
                .map(|(&x, &y)| x + y)
                .collect()
        };
        let out = self.fresh(ash, data, &[a, b]);
        self.ops.push(Op::Add {
            a: a.clone(),
            b: b.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Broadcast a length-n bias row over an (m x n) matrix.
    pub fn add_bias(&mut self, x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
        let xsh = x.shape();
        let n = *xsh.last().unwrap_or(&0);
        if bias.numel() != n {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: xsh,
                rhs: bias.shape(),
            });
        }
        let data = {
            let xb = x.inner.borrow();
            let bb = bias.inner.borrow();
            xb.data
                .iter()
                .enumerate()
                .map(|(i, &v)| v + bb.data[i % n])
                .collect()
        };
        let out = self.fresh(xsh, data, &[x, bias]);
        self.ops.push(Op::AddBias {
            x: x.clone(),
            bias: bias.clone(),
            out: out.clone(),
        });
        Ok(out)
    }

    pub fn scale(&mut self, x: &Tensor<T>, c: T) -> Tensor<T> {
        let data = x.inner.borrow().data.iter().map(|&v| v * c).collect();
        let out = self.fresh(x.shape(), data, &[x]);
        self.ops.push(Op::Scale {
            x: x.clone(),
            c,
            out: out.clone(),
        });
        out
    }

    /// Row gather: out[i, :] = table[ids[i], :].
    pub fn embed_gather(&mut self, table: &Tensor<T>, ids: &[u32]) -> Result<Tensor<T>> {
        let tsh = table.shape();
        if tsh.len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "embed_gather",
                lhs: tsh,
                rhs: vec![ids.len()],
            });
        }
        let (rows, d) = (tsh[0], tsh[1]);
        let mut data = Vec::with_capacity(ids.len() * d);
        {
            let tb = table.inner.borrow();
            for &id in ids {
                let id = id as usize;
                if id >= rows {
                    return Err(Error::Vocab {
                        id: id as u32,
                        vocab_size: rows,
                    });
                }
                data.extend_from_slice(&tb.data[id * d..(id + 1) * d]);
            }
        }
        let out = self.fresh(vec![ids.len(), d], data, &[table]);
        self.ops.push(Op::EmbedGather {
            table: table.clone(),
            ids: ids.iter().map(|&i| i as usize).collect(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Row-wise normalization to zero mean and unit variance, then affine.
    pub fn layer_norm(
        &mut self,
        x: &Tensor<T>,
        gain: &Tensor<T>,
        bias: &Tensor<T>,
        eps: T,
    ) -> Result<Tensor<T>> {
        let xsh = x.shape();
        let n = *xsh.last().unwrap_or(&0);
        if n < 2 {
            return Err(Error::Contract(format!(
                "layer_norm requires axis length >= 2, got {n}"
            )));
        }
        if gain.numel() != n || bias.numel() != n {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: xsh,
                rhs: gain.shape(),
            });
        }
        let rows = x.numel() / n;
        let mut mean = vec![T::zero(); rows];
        let mut rstd = vec![T::zero(); rows];
        let mut data = vec![T::zero(); x.numel()];
        {
            let xb = x.inner.borrow();
            let gb = gain.inner.borrow();
            let bb = bias.inner.borrow();
            let inv_n = T::one() / lit::<T>(n as f64);
            for r in 0..rows {
                let row = &xb.data[r * n..(r + 1) * n];
                let mu = row.iter().copied().fold(T::zero(), |s, v| s + v) * inv_n;
                let var = row
                    .iter()
                    .map(|&v| (v - mu) * (v - mu))
                    .fold(T::zero(), |s, v| s + v)
                    * inv_n;
                let rs = T::one() / (var + eps).sqrt();
                mean[r] = mu;
                rstd[r] = rs;
                for c in 0..n {
                    data[r * n + c] = (row[c] - mu) * rs * gb.data[c] + bb.data[c];
                }
            }
        }
        let out = self.fresh(xsh, data, &[x, gain, bias]);
        self.ops.push(Op::LayerNorm {
            x: x.clone(),
            gain: gain.clone(),
            bias: bias.clone(),
            mean,
            rstd,
            out: out.clone(),
        });
        Ok(out)
    }

    pub fn gelu(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let data = x
            .inner
            .borrow()
            .data
            .iter()
            .map(|&v| gelu_fwd(v))
            .collect();
        let out = self.fresh(x.shape(), data, &[x]);
        self.ops.push(Op::Gelu {
            x: x.clone(),
            out: out.clone(),
        });
        out
    }

    /// Row-wise softmax along the last axis, with max subtraction.
    pub fn softmax(&mut self, x: &Tensor<T>) -> Tensor<T> {
        self.softmax_impl(x, false)
    }

    /// Softmax over a square score matrix where row r sees columns 0..=r.
    pub fn causal_softmax(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let sh = x.shape();
        if sh.len() != 2 || sh[0] != sh[1] {
            return Err(Error::ShapeMismatch {
                op: "causal_softmax",
                lhs: sh,
                rhs: vec![],
            });
        }
        Ok(self.softmax_impl(x, true))
    }

    fn softmax_impl(&mut self, x: &Tensor<T>, causal: bool) -> Tensor<T> {
        let n = x.cols();
        let rows = x.numel() / n;
        let mut data = vec![T::zero(); x.numel()];
        {
            let xb = x.inner.borrow();
            for r in 0..rows {
                let valid = if causal { r + 1 } else { n };
                let row = &xb.data[r * n..r * n + valid];
                let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
                let mut sum = T::zero();
                for c in 0..valid {
                    let e = (row[c] - mx).exp();
                    data[r * n + c] = e;
                    sum = sum + e;
                }
                let inv = T::one() / sum;
                for c in 0..valid {
                    data[r * n + c] = data[r * n + c] * inv;
                }
            }
        }
        let out = self.fresh(x.shape(), data, &[x]);
        self.ops.push(Op::Softmax {
            x: x.clone(),
            causal,
            out: out.clone(),
        });
        out
    }

    /// Contiguous column range of a matrix.
    pub fn slice_cols(&mut self, x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
        let sh = x.shape();
        if sh.len() != 2 || start + len > sh[1] {
            return Err(Error::ShapeMismatch {
                op: "slice_cols",
                lhs: sh,
                rhs: vec![start, len],
            });
        }
        let (rows, n) = (sh[0], sh[1]);
        let mut data = Vec::with_capacity(rows * len);
        {
            let xb = x.inner.borrow();
            for r in 0..rows {
                data.extend_from_slice(&xb.data[r * n + start..r * n + start + len]);
            }
        }
        let out = self.fresh(vec![rows, len], data, &[x]);
        self.ops.push(Op::SliceCols {
            x: x.clone(),
            start,
            len,
            out: out.clone(),
        });
        Ok(out)
    }

    /// Contiguous row range of a matrix.
    pub fn slice_rows(&mut self, x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
        let sh = x.shape();
        if sh.len() != 2 || start + len > sh[0] {
            return Err(Error::ShapeMismatch {
                op: "slice_rows",
                lhs: sh,
                rhs: vec![start, len],
            });
        }
        let n = sh[1];
        let data = x.inner.borrow().data[start * n..(start + len) * n].to_vec();
        let out = self.fresh(vec![len, n], data, &[x]);
        self.ops.push(Op::SliceRows {
            x: x.clone(),
            start,
            len,
            out: out.clone(),
        });
        Ok(out)
    }

    pub fn concat_cols(&mut self, parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        if parts.is_empty() {
            return Err(Error::Contract("concat_cols of zero parts".into()));
        }
        let rows = parts[0].rows();
        let mut total = 0usize;
        for p in parts {
            let sh = p.shape();
            if sh.len() != 2 || sh[0] != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: parts[0].shape(),
                    rhs: sh,
                });
            }
            total += sh[1];
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                let pb = p.inner.borrow();
                let w = pb.shape[1];
                data.extend_from_slice(&pb.data[r * w..(r + 1) * w]);
            }
        }
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        let out = self.fresh(vec![rows, total], data, &refs);
        self.ops.push(Op::ConcatCols {
            parts: parts.to_vec(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Per-row cross-entropy between softmax(logits) and one-hot targets.
    /// Output has one entry per row of `logits`.
    pub fn ce_from_logits(&mut self, logits: &Tensor<T>, targets: &[u32]) -> Result<Tensor<T>> {
        let sh = logits.shape();
        if sh.len() != 2 || sh[0] != targets.len() {
            return Err(Error::ShapeMismatch {
                op: "ce_from_logits",
                lhs: sh,
                rhs: vec![targets.len()],
            });
        }
        let (rows, v) = (sh[0], sh[1]);
        let mut data = vec![T::zero(); rows];
        let mut tgt = Vec::with_capacity(rows);
        {
            let lb = logits.inner.borrow();
            for r in 0..rows {
                let t = targets[r] as usize;
                if t >= v {
                    return Err(Error::Vocab {
                        id: targets[r],
                        vocab_size: v,
                    });
                }
                let row = &lb.data[r * v..(r + 1) * v];
                let lse = log_sum_exp(row);
                let ce = lse - row[t];
                data[r] = ce.min(lit::<T>(CE_CLIP));
                tgt.push(t);
            }
        }
        let out = self.fresh(vec![rows], data, &[logits]);
        self.ops.push(Op::CeFromLogits {
            logits: logits.clone(),
            targets: tgt,
            out: out.clone(),
        });
        Ok(out)
    }

    /// Per-row KL(p || q) with p = softmax(logits) and q fixed, given as
    /// log-probabilities laid out in the same (rows x vocab) order.
    pub fn kl_from_logits(&mut self, logits: &Tensor<T>, ref_logprobs: &[T]) -> Result<Tensor<T>> {
        let sh = logits.shape();
        if sh.len() != 2 || sh[0] * sh[1] != ref_logprobs.len() {
            return Err(Error::ShapeMismatch {
                op: "kl_from_logits",
                lhs: sh,
                rhs: vec![ref_logprobs.len()],
            });
        }
        let (rows, v) = (sh[0], sh[1]);
        let mut data = vec![T::zero(); rows];
        {
            let lb = logits.inner.borrow();
            for r in 0..rows {
                let row = &lb.data[r * v..(r + 1) * v];
                let lse = log_sum_exp(row);
                let mut kl = T::zero();
                for c in 0..v {
                    let s = row[c] - lse;
                    let p = s.exp();
                    kl = kl + p * (s - ref_logprobs[r * v + c]);
                }
                data[r] = kl;
            }
        }
        let out = self.fresh(vec![rows], data, &[logits]);
        self.ops.push(Op::KlFromLogits {
            logits: logits.clone(),
            ref_logprobs: ref_logprobs.to_vec(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Value-preserving gradient gate: backward multiplies by `mask`.
    pub fn grad_mask(&mut self, x: &Tensor<T>, mask: Vec<T>) -> Result<Tensor<T>> {
        if mask.len() != x.numel() {
            return Err(Error::ShapeMismatch {
                op: "grad_mask",
                lhs: x.shape(),
                rhs: vec![mask.len()],
            });
        }
        let out = self.fresh(x.shape(), x.value(), &[x]);
        self.ops.push(Op::GradMask {
            x: x.clone(),
            mask,
            out: out.clone(),
        });
        Ok(out)
    }

    /// Scalar dot product with a constant weight vector.
    pub fn dot_const(&mut self, x: &Tensor<T>, w: &[T]) -> Result<Tensor<T>> {
        if w.len() != x.numel() {
            return Err(Error::ShapeMismatch {
                op: "dot_const",
                lhs: x.shape(),
                rhs: vec![w.len()],
            });
        }
        let v = {
            let xb = x.inner.borrow();
            xb.data
                .iter()
                .zip(w)
                .map(|(&a, &b)| a * b)
                .fold(T::zero(), |s, t| s + t)
        };
        let out = self.fresh(vec![1], vec![v], &[x]);
        self.ops.push(Op::DotConst {
            x: x.clone(),
            w: w.to_vec(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Scalar linear combination sum_j c_j * x_j of scalar tensors.
    pub fn sum_scaled(&mut self, terms: &[(Tensor<T>, T)]) -> Result<Tensor<T>> {
        let mut v = T::zero();
        for (t, c) in terms {
            if t.numel() != 1 {
                return Err(Error::Contract("sum_scaled expects scalar terms".into()));
            }
            v = v + t.item() * *c;
        }
        let refs: Vec<&Tensor<T>> = terms.iter().map(|(t, _)| t).collect();
        let out = self.fresh(vec![1], vec![v], &refs);
        self.ops.push(Op::SumScaled {
            terms: terms.to_vec(),
            out: out.clone(),
        });
        Ok(out)
    }

    /// Reverse sweep seeding d(loss)/d(loss) = 1.
    pub fn backward(&mut self, loss: &Tensor<T>) -> Result<()> {
        self.backward_seeded(loss, T::one())
    }

    /// Reverse sweep with an explicit upstream seed, letting callers fold
    /// batch-averaging coefficients into the seed instead of the graph.
    pub fn backward_seeded(&mut self, loss: &Tensor<T>, seed: T) -> Result<()> {
        if loss.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        loss.accum_grad(&[seed]);
        for op in self.ops.iter().rev() {
            backward_op(op);
        }
        Ok(())
    }
}

fn backward_op<T: Scalar>(op: &Op<T>) {
    match op {
        Op::MatMul { a, b, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let (m, k) = (a.rows(), a.cols());
            let n = b.cols();
            // dA += dC * B^T
            let d_a = {
                let bb = b.inner.borrow();
                let mut d_a = vec![T::zero(); m * k];
                T::gemm(
                    m,
                    n,
                    k,
                    T::one(),
                    &d_out,
                    n as isize,
                    1,
                    &bb.data,
                    1,
                    n as isize,
                    T::zero(),
                    &mut d_a,
                    k as isize,
                    1,
                );
                d_a
            };
            a.accum_grad(&d_a);
            // dB += A^T * dC
            let d_b = {
                let ab = a.inner.borrow();
                let mut d_b = vec![T::zero(); k * n];
                T::gemm(
                    k,
                    m,
                    n,
                    T::one(),
                    &ab.data,
                    1,
                    k as isize,
                    &d_out,
                    n as isize,
                    1,
                    T::zero(),
                    &mut d_b,
                    n as isize,
                    1,
                );
                d_b
            };
            b.accum_grad(&d_b);
        }
        Op::MatMulTB { a, b, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let (m, k) = (a.rows(), a.cols());
            let n = b.rows();
            // dA += dC * B  (m x n)(n x k)
            let d_a = {
                let bb = b.inner.borrow();
                let mut d_a = vec![T::zero(); m * k];
                T::gemm(
                    m,
                    n,
                    k,
                    T::one(),
                    &d_out,
                    n as isize,
                    1,
                    &bb.data,
                    k as isize,
                    1,
                    T::zero(),
                    &mut d_a,
                    k as isize,
                    1,
                );
                d_a
            };
            a.accum_grad(&d_a);
            // dB += dC^T * A  (n x m)(m x k)
            let d_b = {
                let ab = a.inner.borrow();
                let mut d_b = vec![T::zero(); n * k];
                T::gemm(
                    n,
                    m,
                    k,
                    T::one(),
                    &d_out,
                    1,
                    n as isize,
                    &ab.data,
                    k as isize,
                    1,
                    T::zero(),
                    &mut d_b,
                    k as isize,
                    1,
                );
                d_b
            };
            b.accum_grad(&d_b);
        }
        Op::Add { a, b, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            a.accum_grad(&d_out);
            b.accum_grad(&d_out);
        }
        Op::AddBias { x, bias, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            x.accum_grad(&d_out);
            let n = bias.numel();
            let mut d_bias = vec![T::zero(); n];
            for (i, &g) in d_out.iter().enumerate() {
                d_bias[i % n] = d_bias[i % n] + g;
            }
            bias.accum_grad(&d_bias);
        }
        Op::Scale { x, c, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let d_x: Vec<T> = d_out.iter().map(|&g| g * *c).collect();
            x.accum_grad(&d_x);
        }
        Op::EmbedGather { table, ids, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let d = table.cols();
            let mut d_table = vec![T::zero(); table.numel()];
            for (i, &id) in ids.iter().enumerate() {
                for c in 0..d {
                    d_table[id * d + c] = d_table[id * d + c] + d_out[i * d + c];
                }
            }
            table.accum_grad(&d_table);
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            mean,
            rstd,
            out,
        } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let n = x.cols();
            let rows = x.numel() / n;
            let inv_n = T::one() / lit::<T>(n as f64);
            let mut d_x = vec![T::zero(); x.numel()];
            let mut d_gain = vec![T::zero(); n];
            let mut d_bias = vec![T::zero(); n];
            {
                let xb = x.inner.borrow();
                let gb = gain.inner.borrow();
                for r in 0..rows {
                    let row = &xb.data[r * n..(r + 1) * n];
                    let go = &d_out[r * n..(r + 1) * n];
                    let (mu, rs) = (mean[r], rstd[r]);
                    let mut sum_dy = T::zero();
                    let mut sum_dy_xhat = T::zero();
                    for c in 0..n {
                        let xhat = (row[c] - mu) * rs;
                        let dy = go[c] * gb.data[c];
                        sum_dy = sum_dy + dy;
                        sum_dy_xhat = sum_dy_xhat + dy * xhat;
                        d_gain[c] = d_gain[c] + go[c] * xhat;
                        d_bias[c] = d_bias[c] + go[c];
                    }
                    for c in 0..n {
                        let xhat = (row[c] - mu) * rs;
                        let dy = go[c] * gb.data[c];
                        d_x[r * n + c] =
                            rs * (dy - inv_n * sum_dy - xhat * inv_n * sum_dy_xhat);
                    }
                }
            }
            x.accum_grad(&d_x);
            gain.accum_grad(&d_gain);
            bias.accum_grad(&d_bias);
        }
        Op::Gelu { x, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let d_x: Vec<T> = {
                let xb = x.inner.borrow();
                xb.data
                    .iter()
                    .zip(&d_out)
                    .map(|(&v, &g)| g * gelu_grad(v))
                    .collect()
            };
            x.accum_grad(&d_x);
        }
        Op::Softmax { x, causal, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let n = x.cols();
            let rows = x.numel() / n;
            let mut d_x = vec![T::zero(); x.numel()];
            {
                let ob = out.inner.borrow();
                for r in 0..rows {
                    let valid = if *causal { r + 1 } else { n };
                    let p = &ob.data[r * n..r * n + valid];
                    let g = &d_out[r * n..r * n + valid];
                    let dot = p
                        .iter()
                        .zip(g)
                        .map(|(&pi, &gi)| pi * gi)
                        .fold(T::zero(), |s, v| s + v);
                    for c in 0..valid {
                        d_x[r * n + c] = p[c] * (g[c] - dot);
                    }
                }
            }
            x.accum_grad(&d_x);
        }
        Op::SliceCols { x, start, len, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let n = x.cols();
            let rows = x.rows();
            let mut d_x = vec![T::zero(); x.numel()];
            for r in 0..rows {
                for c in 0..*len {
                    d_x[r * n + start + c] = d_out[r * len + c];
                }
            }
            x.accum_grad(&d_x);
        }
        Op::SliceRows { x, start, len, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let n = x.cols();
            let mut d_x = vec![T::zero(); x.numel()];
            d_x[start * n..(start + len) * n].copy_from_slice(&d_out);
            x.accum_grad(&d_x);
        }
        Op::ConcatCols { parts, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let rows = out.rows();
            let total = out.cols();
            let mut offset = 0usize;
            for p in parts {
                let w = p.cols();
                let mut d_p = vec![T::zero(); rows * w];
                for r in 0..rows {
                    d_p[r * w..(r + 1) * w]
                        .copy_from_slice(&d_out[r * total + offset..r * total + offset + w]);
                }
                p.accum_grad(&d_p);
                offset += w;
            }
        }
        Op::CeFromLogits {
            logits,
            targets,
            out,
        } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let v = logits.cols();
            let mut d_l = vec![T::zero(); logits.numel()];
            {
                let lb = logits.inner.borrow();
                for (r, &t) in targets.iter().enumerate() {
                    let g = d_out[r];
                    if g == T::zero() {
                        continue;
                    }
                    let row = &lb.data[r * v..(r + 1) * v];
                    let lse = log_sum_exp(row);
                    for c in 0..v {
                        let p = (row[c] - lse).exp();
                        let e = if c == t { T::one() } else { T::zero() };
                        d_l[r * v + c] = g * (p - e);
                    }
                }
            }
            logits.accum_grad(&d_l);
        }
        Op::KlFromLogits {
            logits,
            ref_logprobs,
            out,
        } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let v = logits.cols();
            let rows = logits.rows();
            let mut d_l = vec![T::zero(); logits.numel()];
            {
                let lb = logits.inner.borrow();
                let ob = out.inner.borrow();
                for r in 0..rows {
                    let g = d_out[r];
                    if g == T::zero() {
                        continue;
                    }
                    let row = &lb.data[r * v..(r + 1) * v];
                    let lse = log_sum_exp(row);
                    let kl = ob.data[r];
                    for c in 0..v {
                        let s = row[c] - lse;
                        let p = s.exp();
                        d_l[r * v + c] = g * p * ((s - ref_logprobs[r * v + c]) - kl);
                    }
                }
            }
            logits.accum_grad(&d_l);
        }
        Op::GradMask { x, mask, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let d_x: Vec<T> = d_out.iter().zip(mask).map(|(&g, &m)| g * m).collect();
            x.accum_grad(&d_x);
        }
        Op::DotConst { x, w, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let g = d_out[0];
            let d_x: Vec<T> = w.iter().map(|&wi| g * wi).collect();
            x.accum_grad(&d_x);
        }
        Op::SumScaled { terms, out } => {
            if !out.requires_grad() {
                return;
            }
            let Some(d_out) = out.grad_opt() else {
                return;
            };
            let g = d_out[0];
            for (t, c) in terms {
                t.accum_grad(&[g * *c]);
            }
        }
    }
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = row
        .iter()
        .map(|&v| (v - mx).exp())
        .fold(T::zero(), |s, v| s + v);
    mx + sum.ln()
}

/// Tanh-approximation GELU, matching the usual transformer MLP activation.
fn gelu_fwd<T: Scalar>(x: T) -> T {
    let c = lit::<T>(0.7978845608028654); // sqrt(2/pi)
    let a = lit::<T>(0.044715);
    let u = c * (x + a * x * x * x);
    lit::<T>(0.5) * x * (T::one() + u.tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = lit::<T>(0.7978845608028654);
    let a = lit::<T>(0.044715);
    let u = c * (x + a * x * x * x);
    let th = u.tanh();
    let sech2 = T::one() - th * th;
    let du = c * (T::one() + lit::<T>(3.0) * a * x * x);
    lit::<T>(0.5) * (T::one() + th) + lit::<T>(0.5) * x * sech2 * du
}
