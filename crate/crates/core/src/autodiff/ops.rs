//! Forward kernels and backward rules for the tape operators.

use super::{Graph, Op, Var};
use crate::fd;
use crate::scalar::Scalar;
use crate::{Error, Result};

fn conv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return Err(Error::invalid("kernel larger than padded input"));
    }
    let span = padded - kernel;
    if span % stride != 0 {
        return Err(Error::invalid("non-integer convolution output size"));
    }
    Ok(span / stride + 1)
}

/// Output-column range `ow0..ow1` with `0 <= ow*stride + kj - padding < w_in`.
fn col_range(w_in: usize, w_out: usize, kj: usize, stride: usize, padding: usize) -> (usize, usize) {
    let ow0 = if kj >= padding { 0 } else { (padding - kj).div_ceil(stride) };
    let max_iw = w_in + padding;
    let ow1 = if kj >= max_iw { 0 } else { ((max_iw - kj - 1) / stride + 1).min(w_out) };
    (ow0.min(ow1), ow1)
}

pub(super) fn conv2d<T: Scalar>(
    g: &mut Graph<T>,
    x: Var,
    k: Var,
    stride: usize,
    padding: usize,
) -> Result<Var> {
    let sx = g.shape(x).to_vec();
    let sk = g.shape(k).to_vec();
    if sx.len() != 3 || sk.len() != 4 {
        return Err(Error::invalid("conv2d expects input [C,H,W] and kernel [Co,Ci,kh,kw]"));
    }
    let (ci, h, w) = (sx[0], sx[1], sx[2]);
    let (co, kci, kh, kw) = (sk[0], sk[1], sk[2], sk[3]);
    if kci != ci {
        return Err(Error::invalid(format!("conv2d channel mismatch: input {ci}, kernel {kci}")));
    }
    if stride == 0 {
        return Err(Error::invalid("conv2d stride must be >= 1"));
    }
    let ho = conv_out_dim(h, kh, stride, padding)?;
    let wo = conv_out_dim(w, kw, stride, padding)?;

    let xv = &g.node(x).value;
    let kv = &g.node(k).value;
    let mut out = vec![T::zero(); co * ho * wo];
    for c_out in 0..co {
        let o_chan = &mut out[c_out * ho * wo..(c_out + 1) * ho * wo];
        for c_in in 0..ci {
            let x_chan = &xv[c_in * h * w..(c_in + 1) * h * w];
            for ki in 0..kh {
                let (oh0, oh1) = col_range(h, ho, ki, stride, padding);
                for kj in 0..kw {
                    let wgt = kv[((c_out * ci + c_in) * kh + ki) * kw + kj];
                    let (ow0, ow1) = col_range(w, wo, kj, stride, padding);
                    for oh in oh0..oh1 {
                        let ih = oh * stride + ki - padding;
                        let xrow = &x_chan[ih * w..(ih + 1) * w];
                        let orow = &mut o_chan[oh * wo + ow0..oh * wo + ow1];
                        if stride == 1 {
                            let base = ow0 + kj - padding;
                            let xs = &xrow[base..base + (ow1 - ow0)];
                            for (o, &xi) in orow.iter_mut().zip(xs) {
                                *o = *o + wgt * xi;
                            }
                        } else {
                            for (t, o) in orow.iter_mut().enumerate() {
                                let iw = (ow0 + t) * stride + kj - padding;
                                *o = *o + wgt * xrow[iw];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(g.push(vec![co, ho, wo], out, Op::Conv2d { x, k, stride, padding }))
}

pub(super) fn batchnorm2d<T: Scalar>(g: &mut Graph<T>, x: Var, gamma: Var, beta: Var, eps: T) -> Var {
    let sx = g.shape(x).to_vec();
    assert_eq!(sx.len(), 3, "batchnorm expects [C,H,W]");
    // A single spatial sample is allowed: variance is zero, the normalized
    // value is zero, and the output reduces to beta.
    let (c, h, w) = (sx[0], sx[1], sx[2]);
    assert_eq!(g.shape(gamma), &[c]);
    assert_eq!(g.shape(beta), &[c]);
    let n = T::from_usize_(h * w);
    let xv = &g.node(x).value;
    let gv = g.node(gamma).value.clone();
    let bv = g.node(beta).value.clone();
    let mut mean = vec![T::zero(); c];
    let mut inv_std = vec![T::zero(); c];
    let mut out = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let xc = &xv[ch * h * w..(ch + 1) * h * w];
        let m: T = xc.iter().copied().sum::<T>() / n;
        let var: T = xc.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n;
        let is = T::one() / (var + eps).sqrt();
        mean[ch] = m;
        inv_std[ch] = is;
        let oc = &mut out[ch * h * w..(ch + 1) * h * w];
        for (o, &v) in oc.iter_mut().zip(xc) {
            *o = gv[ch] * (v - m) * is + bv[ch];
        }
    }
    g.push(vec![c, h, w], out, Op::BatchNorm { x, gamma, beta, mean, inv_std })
}

pub(super) fn maxpool2<T: Scalar>(g: &mut Graph<T>, x: Var) -> Var {
    let sx = g.shape(x).to_vec();
    assert_eq!(sx.len(), 3, "maxpool expects [C,H,W]");
    let (c, h, w) = (sx[0], sx[1], sx[2]);
    assert!(h >= 2 && w >= 2, "maxpool needs at least 2x2 input");
    let (ho, wo) = (h / 2, w / 2);
    let xv = &g.node(x).value;
    let mut out = vec![T::zero(); c * ho * wo];
    let mut argmax = vec![0u32; c * ho * wo];
    for ch in 0..c {
        let xc = &xv[ch * h * w..];
        for oh in 0..ho {
            for ow in 0..wo {
                let (ih, iw) = (2 * oh, 2 * ow);
                // First-index tie-breaking: scan in row-major order, strict >.
                let idxs = [ih * w + iw, ih * w + iw + 1, (ih + 1) * w + iw, (ih + 1) * w + iw + 1];
                let mut best = idxs[0];
                let mut bv = xc[best];
                for &cand in &idxs[1..] {
                    if xc[cand] > bv {
                        bv = xc[cand];
                        best = cand;
                    }
                }
                out[(ch * ho + oh) * wo + ow] = bv;
                argmax[(ch * ho + oh) * wo + ow] = (ch * h * w + best) as u32;
            }
        }
    }
    g.push(vec![c, ho, wo], out, Op::MaxPool2 { x, argmax })
}

/// Corner-aligned source position and interpolation weights for 1D resize.
fn lerp_coords(n_in: usize, n_out: usize, o: usize) -> (usize, usize, f64) {
    if n_out == 1 || n_in == 1 {
        return (0, 0, 0.0);
    }
    let pos = o as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
    let i0 = (pos.floor() as usize).min(n_in - 1);
    let i1 = (i0 + 1).min(n_in - 1);
    (i0, i1, pos - i0 as f64)
}

pub(super) fn upsample_bilinear<T: Scalar>(g: &mut Graph<T>, x: Var, th: usize, tw: usize) -> Var {
    let sx = g.shape(x).to_vec();
    assert_eq!(sx.len(), 3, "upsample expects [C,H,W]");
    assert!(th >= 1 && tw >= 1);
    let (c, h, w) = (sx[0], sx[1], sx[2]);
    let xv = &g.node(x).value;
    let mut out = vec![T::zero(); c * th * tw];
    for ch in 0..c {
        let xc = &xv[ch * h * w..(ch + 1) * h * w];
        let oc = &mut out[ch * th * tw..(ch + 1) * th * tw];
        for oh in 0..th {
            let (j0, j1, fy) = lerp_coords(h, th, oh);
            let (fy0, fy1) = (T::from_f64(1.0 - fy), T::from_f64(fy));
            for ow in 0..tw {
                let (i0, i1, fx) = lerp_coords(w, tw, ow);
                let (fx0, fx1) = (T::from_f64(1.0 - fx), T::from_f64(fx));
                oc[oh * tw + ow] = fy0 * (fx0 * xc[j0 * w + i0] + fx1 * xc[j0 * w + i1])
                    + fy1 * (fx0 * xc[j1 * w + i0] + fx1 * xc[j1 * w + i1]);
            }
        }
    }
    g.push(vec![c, th, tw], out, Op::UpsampleBilinear { x })
}

/// Accumulates the backward contribution of node `idx` into its parents.
pub(super) fn backward_node<T: Scalar>(g: &Graph<T>, grads: &mut [Vec<T>], idx: usize) {
    let gy = std::mem::take(&mut grads[idx]);
    let node = g.node(Var(idx));
    match &node.op {
        Op::Leaf => {}
        Op::Conv2d { x, k, stride, padding } => {
            conv2d_backward(g, grads, &gy, *x, *k, node, *stride, *padding);
        }
        Op::BatchNorm { x, gamma, beta, mean, inv_std } => {
            let sx = &g.node(*x).shape;
            let (c, hw) = (sx[0], sx[1] * sx[2]);
            let xv = &g.node(*x).value;
            let gv = &g.node(*gamma).value;
            let n = T::from_usize_(hw);
            for ch in 0..c {
                let xc = &xv[ch * hw..(ch + 1) * hw];
                let gc = &gy[ch * hw..(ch + 1) * hw];
                let (m, is) = (mean[ch], inv_std[ch]);
                let sum_gy: T = gc.iter().copied().sum();
                let sum_gy_xhat: T =
                    gc.iter().zip(xc).map(|(&gk, &xk)| gk * (xk - m) * is).sum();
                if !grads[gamma.0].is_empty() {
                    grads[gamma.0][ch] += sum_gy_xhat;
                }
                if !grads[beta.0].is_empty() {
                    grads[beta.0][ch] += sum_gy;
                }
                if !grads[x.0].is_empty() {
                    let mean_gy = sum_gy / n;
                    let mean_gy_xhat = sum_gy_xhat / n;
                    let gch = gv[ch];
                    let dst = &mut grads[x.0][ch * hw..(ch + 1) * hw];
                    for k in 0..hw {
                        let xhat = (xc[k] - m) * is;
                        dst[k] += gch * is * (gc[k] - mean_gy - xhat * mean_gy_xhat);
                    }
                }
            }
        }
        Op::MaxPool2 { x, argmax } => {
            if !grads[x.0].is_empty() {
                for (o, &src) in argmax.iter().enumerate() {
                    grads[x.0][src as usize] += gy[o];
                }
            }
        }
        Op::UpsampleBilinear { x } => {
            if !grads[x.0].is_empty() {
                let sx = &g.node(*x).shape;
                let (c, h, w) = (sx[0], sx[1], sx[2]);
                let (th, tw) = (node.shape[1], node.shape[2]);
                for ch in 0..c {
                    let dst = &mut grads[x.0][ch * h * w..(ch + 1) * h * w];
                    let gc = &gy[ch * th * tw..(ch + 1) * th * tw];
                    for oh in 0..th {
                        let (j0, j1, fy) = lerp_coords(h, th, oh);
                        let (fy0, fy1) = (T::from_f64(1.0 - fy), T::from_f64(fy));
                        for ow in 0..tw {
                            let (i0, i1, fx) = lerp_coords(w, tw, ow);
                            let (fx0, fx1) = (T::from_f64(1.0 - fx), T::from_f64(fx));
                            let gv = gc[oh * tw + ow];
                            dst[j0 * w + i0] += fy0 * fx0 * gv;
                            dst[j0 * w + i1] += fy0 * fx1 * gv;
                            dst[j1 * w + i0] += fy1 * fx0 * gv;
                            dst[j1 * w + i1] += fy1 * fx1 * gv;
                        }
                    }
                }
            }
        }
        Op::Relu { x } => {
            if !grads[x.0].is_empty() {
                let xv = &g.node(*x).value;
                for (k, &gk) in gy.iter().enumerate() {
                    if xv[k] > T::zero() {
                        grads[x.0][k] += gk;
                    }
                }
            }
        }
        Op::Tanh { x } => {
            if !grads[x.0].is_empty() {
                for (k, &gk) in gy.iter().enumerate() {
                    let y = node.value[k];
                    grads[x.0][k] += gk * (T::one() - y * y);
                }
            }
        }
        Op::Add { a, b } => {
            for &p in &[*a, *b] {
                if !grads[p.0].is_empty() {
                    for (d, &gk) in grads[p.0].iter_mut().zip(&gy) {
                        *d += gk;
                    }
                }
            }
        }
        Op::Sub { a, b } => {
            if !grads[a.0].is_empty() {
                for (d, &gk) in grads[a.0].iter_mut().zip(&gy) {
                    *d += gk;
                }
            }
            if !grads[b.0].is_empty() {
                for (d, &gk) in grads[b.0].iter_mut().zip(&gy) {
                    *d -= gk;
                }
            }
        }
        Op::Mul { a, b } => {
            if !grads[a.0].is_empty() {
                let bv = &g.node(*b).value;
                for k in 0..gy.len() {
                    grads[a.0][k] += gy[k] * bv[k];
                }
            }
            if !grads[b.0].is_empty() {
                let av = &g.node(*a).value;
                for k in 0..gy.len() {
                    grads[b.0][k] += gy[k] * av[k];
                }
            }
        }
        Op::Scale { x, c } => {
            if !grads[x.0].is_empty() {
                for (d, &gk) in grads[x.0].iter_mut().zip(&gy) {
                    *d += gk * *c;
                }
            }
        }
        Op::AddScalar { x } | Op::AddField { x } | Op::Reshape { x } => {
            if !grads[x.0].is_empty() {
                for (d, &gk) in grads[x.0].iter_mut().zip(&gy) {
                    *d += gk;
                }
            }
        }
        Op::MulField { x, f } => {
            if !grads[x.0].is_empty() {
                for k in 0..gy.len() {
                    grads[x.0][k] += gy[k] * f[k];
                }
            }
        }
        Op::ConcatChannels { a, b } => {
            let na = g.node(*a).value.len();
            if !grads[a.0].is_empty() {
                for (d, &gk) in grads[a.0].iter_mut().zip(&gy[..na]) {
                    *d += gk;
                }
            }
            if !grads[b.0].is_empty() {
                for (d, &gk) in grads[b.0].iter_mut().zip(&gy[na..]) {
                    *d += gk;
                }
            }
        }
        Op::AddChannelBias { x, b } => {
            if !grads[x.0].is_empty() {
                for (d, &gk) in grads[x.0].iter_mut().zip(&gy) {
                    *d += gk;
                }
            }
            if !grads[b.0].is_empty() {
                let c = g.node(*b).value.len();
                let hw = gy.len() / c;
                for ch in 0..c {
                    let mut acc = T::zero();
                    for &gk in &gy[ch * hw..(ch + 1) * hw] {
                        acc += gk;
                    }
                    grads[b.0][ch] += acc;
                }
            }
        }
        Op::SliceChannel { x, c } => {
            if !grads[x.0].is_empty() {
                let hw = node.value.len();
                let dst = &mut grads[x.0][c * hw..(c + 1) * hw];
                for (d, &gk) in dst.iter_mut().zip(&gy) {
                    *d += gk;
                }
            }
        }
        Op::Mse { x } => {
            if !grads[x.0].is_empty() {
                let xv = &g.node(*x).value;
                let scale = T::from_f64(2.0) / T::from_usize_(xv.len()) * gy[0];
                for k in 0..xv.len() {
                    grads[x.0][k] += scale * xv[k];
                }
            }
        }
        Op::SumVars { xs } => {
            for &p in xs {
                if !grads[p.0].is_empty() {
                    grads[p.0][0] += gy[0];
                }
            }
        }
        Op::PartialX { x, d } => {
            if !grads[x.0].is_empty() {
                let (h, w) = (node.shape[0], node.shape[1]);
                fd::partial_x_adjoint(&gy, w, h, *d, &mut grads[x.0]);
            }
        }
        Op::PartialY { x, d } => {
            if !grads[x.0].is_empty() {
                let (h, w) = (node.shape[0], node.shape[1]);
                fd::partial_y_adjoint(&gy, w, h, *d, &mut grads[x.0]);
            }
        }
        Op::SliceRow { x, j, i0 } => {
            if !grads[x.0].is_empty() {
                let w = g.node(*x).shape[1];
                for (t, &gk) in gy.iter().enumerate() {
                    grads[x.0][j * w + i0 + t] += gk;
                }
            }
        }
        Op::SliceCol { x, i, j0 } => {
            if !grads[x.0].is_empty() {
                let w = g.node(*x).shape[1];
                for (t, &gk) in gy.iter().enumerate() {
                    grads[x.0][(j0 + t) * w + i] += gk;
                }
            }
        }
        Op::Linear { x, w, b } => {
            let (n, i) = (g.node(*x).shape[0], g.node(*x).shape[1]);
            let o = g.node(*w).shape[0];
            let xv = &g.node(*x).value;
            let wv = &g.node(*w).value;
            if !grads[x.0].is_empty() {
                // dx = gy W
                for r in 0..n {
                    let gr = &gy[r * o..(r + 1) * o];
                    let dst = &mut grads[x.0][r * i..(r + 1) * i];
                    for c in 0..o {
                        let wr = &wv[c * i..(c + 1) * i];
                        let gk = gr[c];
                        for t in 0..i {
                            dst[t] += gk * wr[t];
                        }
                    }
                }
            }
            if !grads[w.0].is_empty() {
                // dW = gy^T x
                for r in 0..n {
                    let gr = &gy[r * o..(r + 1) * o];
                    let xr = &xv[r * i..(r + 1) * i];
                    for c in 0..o {
                        let gk = gr[c];
                        let dst = &mut grads[w.0][c * i..(c + 1) * i];
                        for t in 0..i {
                            dst[t] += gk * xr[t];
                        }
                    }
                }
            }
            if let Some(bv) = b {
                if !grads[bv.0].is_empty() {
                    for r in 0..n {
                        for c in 0..o {
                            grads[bv.0][c] += gy[r * o + c];
                        }
                    }
                }
            }
        }
        Op::SliceColumn { x, k } => {
            if !grads[x.0].is_empty() {
                let cols = g.node(*x).shape[1];
                for (r, &gk) in gy.iter().enumerate() {
                    grads[x.0][r * cols + k] += gk;
                }
            }
        }
    }
    grads[idx] = gy;
}

fn conv2d_backward<T: Scalar>(
    g: &Graph<T>,
    grads: &mut [Vec<T>],
    gy: &[T],
    x: Var,
    k: Var,
    node: &super::Node<T>,
    stride: usize,
    padding: usize,
) {
    let sx = &g.node(x).shape;
    let sk = &g.node(k).shape;
    let (ci, h, w) = (sx[0], sx[1], sx[2]);
    let (co, kh, kw) = (sk[0], sk[2], sk[3]);
    let (ho, wo) = (node.shape[1], node.shape[2]);
    let xv = &g.node(x).value;
    let kv = &g.node(k).value;

    if !grads[k.0].is_empty() {
        let dk = &mut grads[k.0];
        for c_out in 0..co {
            let g_chan = &gy[c_out * ho * wo..(c_out + 1) * ho * wo];
            for c_in in 0..ci {
                let x_chan = &xv[c_in * h * w..(c_in + 1) * h * w];
                for ki in 0..kh {
                    let (oh0, oh1) = col_range(h, ho, ki, stride, padding);
                    for kj in 0..kw {
                        let (ow0, ow1) = col_range(w, wo, kj, stride, padding);
                        let mut acc = T::zero();
                        for oh in oh0..oh1 {
                            let ih = oh * stride + ki - padding;
                            let grow = &g_chan[oh * wo + ow0..oh * wo + ow1];
                            if stride == 1 {
                                let base = ow0 + kj - padding;
                                let xs = &x_chan[ih * w + base..ih * w + base + (ow1 - ow0)];
                                let mut s = T::zero();
                                for (a, b) in grow.iter().zip(xs) {
                                    s = s + *a * *b;
                                }
                                acc = acc + s;
                            } else {
                                for (t, &gv) in grow.iter().enumerate() {
                                    let iw = (ow0 + t) * stride + kj - padding;
                                    acc = acc + gv * x_chan[ih * w + iw];
                                }
                            }
                        }
                        dk[((c_out * ci + c_in) * kh + ki) * kw + kj] += acc;
                    }
                }
            }
        }
    }

    if !grads[x.0].is_empty() {
        let dx = &mut grads[x.0];
        for c_out in 0..co {
            let g_chan = &gy[c_out * ho * wo..(c_out + 1) * ho * wo];
            for c_in in 0..ci {
                let dx_chan = &mut dx[c_in * h * w..(c_in + 1) * h * w];
                for ki in 0..kh {
                    let (oh0, oh1) = col_range(h, ho, ki, stride, padding);
                    for kj in 0..kw {
                        let wgt = kv[((c_out * ci + c_in) * kh + ki) * kw + kj];
                        let (ow0, ow1) = col_range(w, wo, kj, stride, padding);
                        for oh in oh0..oh1 {
                            let ih = oh * stride + ki - padding;
                            let grow = &g_chan[oh * wo + ow0..oh * wo + ow1];
                            if stride == 1 {
                                let base = ow0 + kj - padding;
                                let dst = &mut dx_chan[ih * w + base..ih * w + base + (ow1 - ow0)];
                                for (d, &gv) in dst.iter_mut().zip(grow) {
                                    *d += wgt * gv;
                                }
                            } else {
                                for (t, &gv) in grow.iter().enumerate() {
                                    let iw = (ow0 + t) * stride + kj - padding;
                                    dx_chan[ih * w + iw] += wgt * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
