//! Reverse-mode automatic differentiation over the fixed operator set used
//! by the networks and physics losses.
//!
//! The engine is a flat tape: every operation appends a node holding its
//! value and an [`Op`] record; [`Graph::backward`] walks the tape in reverse
//! and accumulates gradients. A graph is built fresh for every training
//! step; parameters live outside the graph (see [`adam::ParamStore`]) and
//! enter as leaves.

mod adam;
mod ops;

pub use adam::{AdamParams, ParamId, ParamStore, Parameter, UpdateDirection};

use crate::fd;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// A plain n-dimensional value (no graph attached).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![T::zero(); n] }
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
pub(crate) enum Op<T: Scalar> {
    Leaf,
    Conv2d { x: Var, k: Var, stride: usize, padding: usize },
    BatchNorm { x: Var, gamma: Var, beta: Var, mean: Vec<T>, inv_std: Vec<T> },
    MaxPool2 { x: Var, argmax: Vec<u32> },
    UpsampleBilinear { x: Var },
    Relu { x: Var },
    Tanh { x: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, c: T },
    AddScalar { x: Var },
    MulField { x: Var, f: Vec<T> },
    AddField { x: Var },
    ConcatChannels { a: Var, b: Var },
    AddChannelBias { x: Var, b: Var },
    SliceChannel { x: Var, c: usize },
    Mse { x: Var },
    SumVars { xs: Vec<Var> },
    PartialX { x: Var, d: T },
    PartialY { x: Var, d: T },
    SliceRow { x: Var, j: usize, i0: usize },
    SliceCol { x: Var, i: usize, j0: usize },
    Linear { x: Var, w: Var, b: Option<Var> },
    SliceColumn { x: Var, k: usize },
    Reshape { x: Var },
}

pub(crate) struct Node<T: Scalar> {
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub op: Op<T>,
    pub needs_grad: bool,
}

/// Computation tape. One graph instance per training step.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Vec<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), grads: Vec::new() }
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let needs_grad = match &op {
            Op::Leaf => false,
            op => self.parents(op).iter().any(|&p| self.nodes[p.0].needs_grad),
        };
        self.nodes.push(Node { shape, value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn parents(&self, op: &Op<T>) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::Conv2d { x, k, .. } => vec![*x, *k],
            Op::BatchNorm { x, gamma, beta, .. } => vec![*x, *gamma, *beta],
            Op::MaxPool2 { x, .. }
            | Op::UpsampleBilinear { x }
            | Op::Relu { x }
            | Op::Tanh { x }
            | Op::Scale { x, .. }
            | Op::AddScalar { x }
            | Op::MulField { x, .. }
            | Op::AddField { x }
            | Op::SliceChannel { x, .. }
            | Op::Mse { x }
            | Op::PartialX { x, .. }
            | Op::PartialY { x, .. }
            | Op::SliceRow { x, .. }
            | Op::SliceCol { x, .. }
            | Op::SliceColumn { x, .. }
            | Op::Reshape { x } => vec![*x],
            Op::Add { a, b }
            | Op::Sub { a, b }
            | Op::Mul { a, b }
            | Op::ConcatChannels { a, b }
            | Op::AddChannelBias { x: a, b } => {
                vec![*a, *b]
            }
            Op::SumVars { xs } => xs.clone(),
            Op::Linear { x, w, b } => {
                let mut v = vec![*x, *w];
                if let Some(b) = b {
                    v.push(*b);
                }
                v
            }
        }
    }

    /// A gradient-carrying leaf (parameter input).
    pub fn param_leaf(&mut self, shape: Vec<usize>, data: Vec<T>) -> Var {
        let v = self.push(shape, data, Op::Leaf);
        self.nodes[v.0].needs_grad = true;
        v
    }

    /// A constant leaf (no gradient is accumulated for it).
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<T>) -> Var {
        self.push(shape, data, Op::Leaf)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    /// Scalar value of a rank-0/rank-1 single-element node.
    pub fn scalar(&self, v: Var) -> T {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value[0]
    }

    /// Gradient accumulated by the last [`Graph::backward`] call.
    pub fn grad(&self, v: Var) -> Result<&[T]> {
        if self.grads.is_empty() {
            return Err(Error::invalid("gradient requested before backward"));
        }
        Ok(&self.grads[v.0])
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(self.nodes[loss.0].value.len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Vec<T>> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(idx, n)| {
                if n.needs_grad || idx == loss.0 {
                    vec![T::zero(); n.value.len()]
                } else {
                    Vec::new()
                }
            })
            .collect();
        grads[loss.0][0] = T::one();
        for idx in (0..=loss.0).rev() {
            if grads[idx].is_empty() {
                continue;
            }
            ops::backward_node(self, &mut grads, idx);
        }
        self.grads = grads;
    }

    pub(crate) fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }
}

// ---- forward-op constructors ------------------------------------------------

impl<T: Scalar> Graph<T> {
    /// Bias-free 2D cross-correlation with zero padding.
    ///
    /// `x`: `[C_in, H, W]`, `k`: `[C_out, C_in, kh, kw]`.
    pub fn conv2d(&mut self, x: Var, k: Var, stride: usize, padding: usize) -> Result<Var> {
        ops::conv2d(self, x, k, stride, padding)
    }

    /// Per-channel normalization over the spatial extent (batch size is 1).
    pub fn batchnorm2d(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Var {
        ops::batchnorm2d(self, x, gamma, beta, eps)
    }

    /// 2x2 max pooling with stride 2 and floor semantics.
    pub fn maxpool2(&mut self, x: Var) -> Var {
        ops::maxpool2(self, x)
    }

    /// Corner-aligned bilinear resize to `(target_h, target_w)`.
    pub fn upsample_bilinear(&mut self, x: Var, target_h: usize, target_w: usize) -> Var {
        ops::upsample_bilinear(self, x, target_h, target_w)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value: Vec<T> =
            self.nodes[x.0].value.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(shape, value, Op::Relu { x })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value: Vec<T> = self.nodes[x.0].value.iter().map(|&v| v.tanh()).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(shape, value, Op::Tanh { x })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let value: Vec<T> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(shape, value, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let value: Vec<T> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| x - y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(shape, value, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let value: Vec<T> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        self.push(shape, value, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let value: Vec<T> = self.nodes[x.0].value.iter().map(|&v| v * c).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(shape, value, Op::Scale { x, c })
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        let value: Vec<T> = self.nodes[x.0].value.iter().map(|&v| v + c).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(shape, value, Op::AddScalar { x })
    }

    /// Elementwise product with a constant field (no gradient to the field).
    pub fn mul_field(&mut self, x: Var, f: &[T]) -> Var {
        assert_eq!(self.nodes[x.0].value.len(), f.len(), "mul_field length mismatch");
        let value: Vec<T> =
            self.nodes[x.0].value.iter().zip(f).map(|(&x, &y)| x * y).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(shape, value, Op::MulField { x, f: f.to_vec() })
    }

    /// Elementwise sum with a constant field.
    pub fn add_field(&mut self, x: Var, f: &[T]) -> Var {
        assert_eq!(self.nodes[x.0].value.len(), f.len(), "add_field length mismatch");
        let value: Vec<T> =
            self.nodes[x.0].value.iter().zip(f).map(|(&x, &y)| x + y).collect();
        let shape = self.nodes[x.0].shape.clone();
        self.push(shape, value, Op::AddField { x })
    }

    /// Concatenates `[Ca, H, W]` and `[Cb, H, W]` along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert_eq!(sa.len(), 3, "concat expects [C,H,W]");
        assert_eq!(&sa[1..], &sb[1..], "concat spatial dims mismatch");
        let shape = vec![sa[0] + sb[0], sa[1], sa[2]];
        let mut value = Vec::with_capacity(shape.iter().product());
        value.extend_from_slice(&self.nodes[a.0].value);
        value.extend_from_slice(&self.nodes[b.0].value);
        self.push(shape, value, Op::ConcatChannels { a, b })
    }

    /// Adds a per-channel bias `b: [C]` to `x: [C, H, W]`.
    pub fn add_channel_bias(&mut self, x: Var, b: Var) -> Var {
        let s = self.shape(x);
        assert_eq!(s.len(), 3, "add_channel_bias expects [C,H,W]");
        assert_eq!(self.shape(b), &[s[0]], "bias shape mismatch");
        let (c, hw) = (s[0], s[1] * s[2]);
        let shape = self.nodes[x.0].shape.clone();
        let bv = self.nodes[b.0].value.clone();
        let mut value = self.nodes[x.0].value.clone();
        for ch in 0..c {
            for v in &mut value[ch * hw..(ch + 1) * hw] {
                *v += bv[ch];
            }
        }
        self.push(shape, value, Op::AddChannelBias { x, b })
    }

    /// Extracts channel `c` of `[C, H, W]` as `[H, W]`.
    pub fn slice_channel(&mut self, x: Var, c: usize) -> Var {
        let s = self.shape(x);
        assert_eq!(s.len(), 3);
        assert!(c < s[0]);
        let (h, w) = (s[1], s[2]);
        let value = self.nodes[x.0].value[c * h * w..(c + 1) * h * w].to_vec();
        self.push(vec![h, w], value, Op::SliceChannel { x, c })
    }

    /// `mean(x^2)` as a scalar node.
    pub fn mse(&mut self, x: Var) -> Var {
        let n = T::from_usize_(self.nodes[x.0].value.len());
        let s: T = self.nodes[x.0].value.iter().map(|&v| v * v).sum();
        self.push(vec![1], vec![s / n], Op::Mse { x })
    }

    /// Sum of scalar nodes.
    pub fn sum_vars(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let s: T = xs.iter().map(|&v| self.scalar(v)).sum();
        self.push(vec![1], vec![s], Op::SumVars { xs: xs.to_vec() })
    }

    /// Finite-difference x-partial of an `[H, W]` map (central + one-sided).
    pub fn partial_x(&mut self, x: Var, dx: T) -> Var {
        let s = self.shape(x);
        assert_eq!(s.len(), 2);
        let (h, w) = (s[0], s[1]);
        let mut out = vec![T::zero(); h * w];
        fd::partial_x_raw(&self.nodes[x.0].value, w, h, dx, &mut out);
        self.push(vec![h, w], out, Op::PartialX { x, d: dx })
    }

    /// Finite-difference y-partial of an `[H, W]` map.
    pub fn partial_y(&mut self, x: Var, dy: T) -> Var {
        let s = self.shape(x);
        assert_eq!(s.len(), 2);
        let (h, w) = (s[0], s[1]);
        let mut out = vec![T::zero(); h * w];
        fd::partial_y_raw(&self.nodes[x.0].value, w, h, dy, &mut out);
        self.push(vec![h, w], out, Op::PartialY { x, d: dy })
    }

    /// Row `j` of an `[H, W]` map, columns `i0..i1`.
    pub fn slice_row(&mut self, x: Var, j: usize, i0: usize, i1: usize) -> Var {
        let s = self.shape(x);
        assert_eq!(s.len(), 2);
        let (h, w) = (s[0], s[1]);
        assert!(j < h && i0 < i1 && i1 <= w);
        let value = self.nodes[x.0].value[j * w + i0..j * w + i1].to_vec();
        self.push(vec![i1 - i0], value, Op::SliceRow { x, j, i0 })
    }

    /// Column `i` of an `[H, W]` map, rows `j0..j1`.
    pub fn slice_col(&mut self, x: Var, i: usize, j0: usize, j1: usize) -> Var {
        let s = self.shape(x);
        assert_eq!(s.len(), 2);
        let (h, w) = (s[0], s[1]);
        assert!(i < w && j0 < j1 && j1 <= h);
        let value: Vec<T> = (j0..j1).map(|j| self.nodes[x.0].value[j * w + i]).collect();
        self.push(vec![j1 - j0], value, Op::SliceCol { x, i, j0 })
    }

    /// `y = x W^T (+ b)` with `x: [N, I]`, `w: [O, I]`, `b: [O]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (sx, sw) = (self.shape(x), self.shape(w));
        assert_eq!(sx.len(), 2);
        assert_eq!(sw.len(), 2);
        assert_eq!(sx[1], sw[1], "linear in-features mismatch");
        let (n, i, o) = (sx[0], sx[1], sw[0]);
        if let Some(b) = b {
            assert_eq!(self.shape(b), &[o], "bias shape mismatch");
        }
        let xv = &self.nodes[x.0].value;
        let wv = &self.nodes[w.0].value;
        let mut out = vec![T::zero(); n * o];
        for r in 0..n {
            let xr = &xv[r * i..(r + 1) * i];
            let orow = &mut out[r * o..(r + 1) * o];
            for c in 0..o {
                let wr = &wv[c * i..(c + 1) * i];
                let mut acc = T::zero();
                for t in 0..i {
                    acc = acc + xr[t] * wr[t];
                }
                orow[c] = acc;
            }
        }
        if let Some(bv) = b {
            let bvals = self.nodes[bv.0].value.clone();
            for r in 0..n {
                for c in 0..o {
                    out[r * o + c] += bvals[c];
                }
            }
        }
        self.push(vec![n, o], out, Op::Linear { x, w, b })
    }

    /// Column `k` of `[N, K]` as `[N]`.
    pub fn slice_column(&mut self, x: Var, k: usize) -> Var {
        let s = self.shape(x);
        assert_eq!(s.len(), 2);
        let (n, cols) = (s[0], s[1]);
        assert!(k < cols);
        let value: Vec<T> = (0..n).map(|r| self.nodes[x.0].value[r * cols + k]).collect();
        self.push(vec![n], value, Op::SliceColumn { x, k })
    }

    /// Reinterprets the element order under a new shape.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Var {
        assert_eq!(
            shape.iter().product::<usize>(),
            self.nodes[x.0].value.len(),
            "reshape element count mismatch"
        );
        let value = self.nodes[x.0].value.clone();
        self.push(shape, value, Op::Reshape { x })
    }
}
