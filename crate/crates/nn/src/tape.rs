//! Eager tape: ops execute immediately and record enough to run a single
//! reverse sweep. Every op asserts finite outputs in debug builds.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv1d { x: usize, w: usize, b: usize, stride: usize, padding: usize },
    Linear { x: usize, w: usize, b: usize },
    GroupNorm { x: usize, gamma: usize, beta: usize, groups: usize, eps: f64 },
    Silu { x: usize },
    Film { x: usize, scale: usize, shift: usize },
    Add { a: usize, b: usize },
    ConcatChannels { a: usize, b: usize },
    UpsampleNearest2 { x: usize },
    MseLoss { pred: usize, target: usize },
    Mean { x: usize },
}

struct Node<S: Scalar> {
    shape: Vec<usize>,
    data: Vec<S>,
    grad: Vec<S>,
    op: Op,
    requires_grad: bool,
    /// Op-specific cache (group norm keeps per-group mean and inv-std).
    aux: Vec<S>,
}

pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn assert_finite<S: Scalar>(op: &'static str, data: &[S]) {
    debug_assert!(
        data.iter().all(|v| v.is_finite()),
        "{op}: non-finite value in forward output"
    );
    let _ = (op, data);
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<S>, op: Op, requires_grad: bool, aux: Vec<S>) -> Var {
        let grad = vec![S::zero(); data.len()];
        self.nodes.push(Node { shape, data, grad, op, requires_grad, aux });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, tensor: Tensor<S>, requires_grad: bool) -> Var {
        self.push(tensor.shape, tensor.data, Op::Leaf, requires_grad, Vec::new())
    }

    pub fn constant(&mut self, tensor: Tensor<S>) -> Var {
        self.leaf(tensor, false)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn data(&self, v: Var) -> &[S] {
        &self.nodes[v.0].data
    }

    pub fn grad(&self, v: Var) -> &[S] {
        &self.nodes[v.0].grad
    }

    pub fn value(&self, v: Var) -> Tensor<S> {
        Tensor::new(self.nodes[v.0].shape.clone(), self.nodes[v.0].data.clone())
    }

    fn requires(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Cross-correlation: x [B, Cin, L], w [Cout, Cin, K], b [Cout] ->
    /// [B, Cout, (L + 2 padding - K) / stride + 1].
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize, padding: usize) -> Var {
        let (xs, ws, bs) = (&self.nodes[x.0].shape, &self.nodes[w.0].shape, &self.nodes[b.0].shape);
        assert_eq!(xs.len(), 3, "conv1d input must be [B, C, L]");
        assert_eq!(ws.len(), 3, "conv1d weight must be [Cout, Cin, K]");
        let (batch, c_in, len) = (xs[0], xs[1], xs[2]);
        let (c_out, w_cin, kernel) = (ws[0], ws[1], ws[2]);
        assert_eq!(c_in, w_cin, "conv1d channel mismatch");
        assert_eq!(bs, &[c_out], "conv1d bias must be [Cout]");
        assert!(len + 2 * padding >= kernel, "conv1d kernel larger than padded input");
        let out_len = (len + 2 * padding - kernel) / stride + 1;

        let mut out = vec![S::zero(); batch * c_out * out_len];
        {
            let xd = &self.nodes[x.0].data;
            let wd = &self.nodes[w.0].data;
            let bd = &self.nodes[b.0].data;
            for bi in 0..batch {
                for co in 0..c_out {
                    let out_base = (bi * c_out + co) * out_len;
                    let bias = bd[co];
                    for v in &mut out[out_base..out_base + out_len] {
                        *v = bias;
                    }
                    for ci in 0..c_in {
                        let x_base = (bi * c_in + ci) * len;
                        let w_base = (co * c_in + ci) * kernel;
                        for k in 0..kernel {
                            let wv = wd[w_base + k];
                            if wv == S::zero() {
                                continue;
                            }
                            for l in 0..out_len {
                                let xi = (l * stride + k) as isize - padding as isize;
                                if xi >= 0 && (xi as usize) < len {
                                    out[out_base + l] =
                                        out[out_base + l] + xd[x_base + xi as usize] * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert_finite("conv1d", &out);
        let req = self.requires(&[x.0, w.0, b.0]);
        self.push(
            vec![batch, c_out, out_len],
            out,
            Op::Conv1d { x: x.0, w: w.0, b: b.0, stride, padding },
            req,
            Vec::new(),
        )
    }

    /// x [B, In], w [Out, In], b [Out] -> [B, Out].
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (xs, ws, bs) = (&self.nodes[x.0].shape, &self.nodes[w.0].shape, &self.nodes[b.0].shape);
        assert_eq!(xs.len(), 2, "linear input must be [B, In]");
        let (batch, n_in) = (xs[0], xs[1]);
        let (n_out, w_in) = (ws[0], ws[1]);
        assert_eq!(n_in, w_in, "linear dimension mismatch");
        assert_eq!(bs, &[n_out], "linear bias mismatch");
        let mut out = vec![S::zero(); batch * n_out];
        {
            let xd = &self.nodes[x.0].data;
            let wd = &self.nodes[w.0].data;
            let bd = &self.nodes[b.0].data;
            for bi in 0..batch {
                for o in 0..n_out {
                    let mut acc = bd[o];
                    let xb = bi * n_in;
                    let wb = o * n_in;
                    for i in 0..n_in {
                        acc = acc + xd[xb + i] * wd[wb + i];
                    }
                    out[bi * n_out + o] = acc;
                }
            }
        }
        assert_finite("linear", &out);
        let req = self.requires(&[x.0, w.0, b.0]);
        self.push(vec![batch, n_out], out, Op::Linear { x: x.0, w: w.0, b: b.0 }, req, Vec::new())
    }

    /// x [B, C, L] normalized per (batch, group) over C/groups * L entries,
    /// then per-channel affine gamma/beta.
    pub fn group_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize, eps: f64) -> Var {
        let xs = self.nodes[x.0].shape.clone();
        assert_eq!(xs.len(), 3, "group_norm input must be [B, C, L]");
        let (batch, channels, len) = (xs[0], xs[1], xs[2]);
        assert!(channels % groups == 0, "channels must divide into groups");
        assert_eq!(self.nodes[gamma.0].shape, vec![channels]);
        assert_eq!(self.nodes[beta.0].shape, vec![channels]);
        let ch_per = channels / groups;
        let group_elems = ch_per * len;
        let mut out = vec![S::zero(); batch * channels * len];
        let mut aux = vec![S::zero(); batch * groups * 2];
        {
            let xd = &self.nodes[x.0].data;
            let gd = &self.nodes[gamma.0].data;
            let bd = &self.nodes[beta.0].data;
            for bi in 0..batch {
                for g in 0..groups {
                    let start = (bi * channels + g * ch_per) * len;
                    let slice = &xd[start..start + group_elems];
                    let mean = slice.iter().copied().sum::<S>() / S::from_f64(group_elems as f64);
                    let var = slice
                        .iter()
                        .map(|&v| (v - mean) * (v - mean))
                        .sum::<S>()
                        / S::from_f64(group_elems as f64);
                    let inv_std = S::one() / (var + S::from_f64(eps)).sqrt();
                    aux[(bi * groups + g) * 2] = mean;
                    aux[(bi * groups + g) * 2 + 1] = inv_std;
                    for c_off in 0..ch_per {
                        let c = g * ch_per + c_off;
                        let base = (bi * channels + c) * len;
                        for l in 0..len {
                            let xhat = (xd[base + l] - mean) * inv_std;
                            out[base + l] = gd[c] * xhat + bd[c];
                        }
                    }
                }
            }
        }
        assert_finite("group_norm", &out);
        let req = self.requires(&[x.0, gamma.0, beta.0]);
        self.push(xs, out, Op::GroupNorm { x: x.0, gamma: gamma.0, beta: beta.0, groups, eps }, req, aux)
    }

    pub fn silu(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].shape.clone();
        let out: Vec<S> = self.nodes[x.0]
            .data
            .iter()
            .map(|&v| {
                let sig = S::one() / (S::one() + (-v).exp());
                v * sig
            })
            .collect();
        assert_finite("silu", &out);
        let req = self.requires(&[x.0]);
        self.push(shape, out, Op::Silu { x: x.0 }, req, Vec::new())
    }

    /// x [B, C, L] modulated per channel: out = scale (.) x + shift, with
    /// scale and shift [B, C] broadcast over the time axis.
    pub fn film(&mut self, x: Var, scale: Var, shift: Var) -> Var {
        let xs = self.nodes[x.0].shape.clone();
        assert_eq!(xs.len(), 3, "film input must be [B, C, L]");
        let (batch, channels, len) = (xs[0], xs[1], xs[2]);
        assert_eq!(self.nodes[scale.0].shape, vec![batch, channels], "film scale shape");
        assert_eq!(self.nodes[shift.0].shape, vec![batch, channels], "film shift shape");
        let mut out = vec![S::zero(); batch * channels * len];
        {
            let xd = &self.nodes[x.0].data;
            let sd = &self.nodes[scale.0].data;
            let td = &self.nodes[shift.0].data;
            for bi in 0..batch {
                for c in 0..channels {
                    let s = sd[bi * channels + c];
                    let t = td[bi * channels + c];
                    let base = (bi * channels + c) * len;
                    for l in 0..len {
                        out[base + l] = s * xd[base + l] + t;
                    }
                }
            }
        }
        assert_finite("film", &out);
        let req = self.requires(&[x.0, scale.0, shift.0]);
        self.push(xs, out, Op::Film { x: x.0, scale: scale.0, shift: shift.0 }, req, Vec::new())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.nodes[a.0].shape, self.nodes[b.0].shape, "add shape mismatch");
        let shape = self.nodes[a.0].shape.clone();
        let out: Vec<S> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| x + y)
            .collect();
        assert_finite("add", &out);
        let req = self.requires(&[a.0, b.0]);
        self.push(shape, out, Op::Add { a: a.0, b: b.0 }, req, Vec::new())
    }

    /// [B, C1, L] ++ [B, C2, L] -> [B, C1 + C2, L].
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.nodes[a.0].shape.clone(), self.nodes[b.0].shape.clone());
        assert_eq!(sa.len(), 3);
        assert_eq!(sa[0], sb[0], "concat batch mismatch");
        assert_eq!(sa[2], sb[2], "concat length mismatch");
        let (batch, c1, c2, len) = (sa[0], sa[1], sb[1], sa[2]);
        let mut out = vec![S::zero(); batch * (c1 + c2) * len];
        {
            let ad = &self.nodes[a.0].data;
            let bd = &self.nodes[b.0].data;
            for bi in 0..batch {
                let dst = bi * (c1 + c2) * len;
                out[dst..dst + c1 * len].copy_from_slice(&ad[bi * c1 * len..(bi + 1) * c1 * len]);
                out[dst + c1 * len..dst + (c1 + c2) * len]
                    .copy_from_slice(&bd[bi * c2 * len..(bi + 1) * c2 * len]);
            }
        }
        let req = self.requires(&[a.0, b.0]);
        self.push(vec![batch, c1 + c2, len], out, Op::ConcatChannels { a: a.0, b: b.0 }, req, Vec::new())
    }

    /// [B, C, L] -> [B, C, 2L] by repetition.
    pub fn upsample_nearest2(&mut self, x: Var) -> Var {
        let xs = self.nodes[x.0].shape.clone();
        assert_eq!(xs.len(), 3);
        let (batch, channels, len) = (xs[0], xs[1], xs[2]);
        let mut out = vec![S::zero(); batch * channels * len * 2];
        {
            let xd = &self.nodes[x.0].data;
            for row in 0..batch * channels {
                for l in 0..len {
                    let v = xd[row * len + l];
                    out[row * len * 2 + 2 * l] = v;
                    out[row * len * 2 + 2 * l + 1] = v;
                }
            }
        }
        let req = self.requires(&[x.0]);
        self.push(vec![batch, channels, len * 2], out, Op::UpsampleNearest2 { x: x.0 }, req, Vec::new())
    }

    /// Scalar mean of squared differences.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Var {
        assert_eq!(self.nodes[pred.0].shape, self.nodes[target.0].shape, "mse shape mismatch");
        let n = self.nodes[pred.0].data.len();
        let sum: S = self.nodes[pred.0]
            .data
            .iter()
            .zip(&self.nodes[target.0].data)
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum();
        let out = vec![sum / S::from_f64(n as f64)];
        assert_finite("mse_loss", &out);
        let req = self.requires(&[pred.0, target.0]);
        self.push(vec![1], out, Op::MseLoss { pred: pred.0, target: target.0 }, req, Vec::new())
    }

    /// Scalar mean over all elements.
    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.nodes[x.0].data.len();
        let sum: S = self.nodes[x.0].data.iter().copied().sum();
        let out = vec![sum / S::from_f64(n as f64)];
        let req = self.requires(&[x.0]);
        self.push(vec![1], out, Op::Mean { x: x.0 }, req, Vec::new())
    }

    /// Reverse sweep from a scalar loss; each recorded op is visited exactly
    /// once in reverse topological (= creation) order.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(self.nodes[loss.0].data.len(), 1, "backward needs a scalar loss");
        for node in &mut self.nodes {
            for g in &mut node.grad {
                *g = S::zero();
            }
        }
        self.nodes[loss.0].grad[0] = S::one();
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::Conv1d { x, w, b, stride, padding } => self.backward_conv1d(idx, x, w, b, stride, padding),
                Op::Linear { x, w, b } => self.backward_linear(idx, x, w, b),
                Op::GroupNorm { x, gamma, beta, groups, eps } => {
                    self.backward_group_norm(idx, x, gamma, beta, groups, eps)
                }
                Op::Silu { x } => {
                    for i in 0..self.nodes[idx].data.len() {
                        let xv = self.nodes[x].data[i];
                        let sig = S::one() / (S::one() + (-xv).exp());
                        let d = sig * (S::one() + xv * (S::one() - sig));
                        let g = self.nodes[idx].grad[i];
                        self.nodes[x].grad[i] = self.nodes[x].grad[i] + g * d;
                    }
                }
                Op::Film { x, scale, shift } => self.backward_film(idx, x, scale, shift),
                Op::Add { a, b } => {
                    for i in 0..self.nodes[idx].grad.len() {
                        let g = self.nodes[idx].grad[i];
                        self.nodes[a].grad[i] = self.nodes[a].grad[i] + g;
                        self.nodes[b].grad[i] = self.nodes[b].grad[i] + g;
                    }
                }
                Op::ConcatChannels { a, b } => {
                    let (c1, c2, len) = (self.nodes[a].shape[1], self.nodes[b].shape[1], self.nodes[a].shape[2]);
                    let batch = self.nodes[a].shape[0];
                    for bi in 0..batch {
                        let src = bi * (c1 + c2) * len;
                        for i in 0..c1 * len {
                            let g = self.nodes[idx].grad[src + i];
                            self.nodes[a].grad[bi * c1 * len + i] =
                                self.nodes[a].grad[bi * c1 * len + i] + g;
                        }
                        for i in 0..c2 * len {
                            let g = self.nodes[idx].grad[src + c1 * len + i];
                            self.nodes[b].grad[bi * c2 * len + i] =
                                self.nodes[b].grad[bi * c2 * len + i] + g;
                        }
                    }
                }
                Op::UpsampleNearest2 { x } => {
                    let len = self.nodes[x].shape[2];
                    let rows = self.nodes[x].shape[0] * self.nodes[x].shape[1];
                    for row in 0..rows {
                        for l in 0..len {
                            let g = self.nodes[idx].grad[row * len * 2 + 2 * l]
                                + self.nodes[idx].grad[row * len * 2 + 2 * l + 1];
                            self.nodes[x].grad[row * len + l] = self.nodes[x].grad[row * len + l] + g;
                        }
                    }
                }
                Op::MseLoss { pred, target } => {
                    let n = S::from_f64(self.nodes[pred].data.len() as f64);
                    let g = self.nodes[idx].grad[0];
                    let two = S::from_f64(2.0);
                    for i in 0..self.nodes[pred].data.len() {
                        let diff = self.nodes[pred].data[i] - self.nodes[target].data[i];
                        let d = two * diff / n * g;
                        self.nodes[pred].grad[i] = self.nodes[pred].grad[i] + d;
                        self.nodes[target].grad[i] = self.nodes[target].grad[i] - d;
                    }
                }
                Op::Mean { x } => {
                    let n = S::from_f64(self.nodes[x].data.len() as f64);
                    let g = self.nodes[idx].grad[0] / n;
                    for i in 0..self.nodes[x].data.len() {
                        self.nodes[x].grad[i] = self.nodes[x].grad[i] + g;
                    }
                }
            }
        }
    }

    fn backward_conv1d(&mut self, out: usize, x: usize, w: usize, b: usize, stride: usize, padding: usize) {
        let (batch, c_in, len) = {
            let s = &self.nodes[x].shape;
            (s[0], s[1], s[2])
        };
        let (c_out, _, kernel) = {
            let s = &self.nodes[w].shape;
            (s[0], s[1], s[2])
        };
        let out_len = self.nodes[out].shape[2];

        // dB
        if self.nodes[b].requires_grad {
            for co in 0..c_out {
                let mut acc = S::zero();
                for bi in 0..batch {
                    let base = (bi * c_out + co) * out_len;
                    for l in 0..out_len {
                        acc = acc + self.nodes[out].grad[base + l];
                    }
                }
                self.nodes[b].grad[co] = self.nodes[b].grad[co] + acc;
            }
        }
        // dW: gather over batch and output positions.
        if self.nodes[w].requires_grad {
            for co in 0..c_out {
                for ci in 0..c_in {
                    for k in 0..kernel {
                        let mut acc = S::zero();
                        for bi in 0..batch {
                            let go = (bi * c_out + co) * out_len;
                            let xb = (bi * c_in + ci) * len;
                            for l in 0..out_len {
                                let xi = (l * stride + k) as isize - padding as isize;
                                if xi >= 0 && (xi as usize) < len {
                                    acc = acc + self.nodes[out].grad[go + l] * self.nodes[x].data[xb + xi as usize];
                                }
                            }
                        }
                        let wi = (co * c_in + ci) * kernel + k;
                        self.nodes[w].grad[wi] = self.nodes[w].grad[wi] + acc;
                    }
                }
            }
        }
        // dX: weight-flipped correlation, gathered per input element.
        if self.nodes[x].requires_grad {
            for bi in 0..batch {
                for ci in 0..c_in {
                    let xb = (bi * c_in + ci) * len;
                    for i in 0..len {
                        let mut acc = S::zero();
                        for co in 0..c_out {
                            let go = (bi * c_out + co) * out_len;
                            let wb = (co * c_in + ci) * kernel;
                            for k in 0..kernel {
                                let num = i as isize + padding as isize - k as isize;
                                if num >= 0 && num % stride as isize == 0 {
                                    let l = (num / stride as isize) as usize;
                                    if l < out_len {
                                        acc = acc + self.nodes[out].grad[go + l] * self.nodes[w].data[wb + k];
                                    }
                                }
                            }
                        }
                        self.nodes[x].grad[xb + i] = self.nodes[x].grad[xb + i] + acc;
                    }
                }
            }
        }
    }

    fn backward_linear(&mut self, out: usize, x: usize, w: usize, b: usize) {
        let (batch, n_in) = {
            let s = &self.nodes[x].shape;
            (s[0], s[1])
        };
        let n_out = self.nodes[w].shape[0];
        for o in 0..n_out {
            let mut acc = S::zero();
            for bi in 0..batch {
                acc = acc + self.nodes[out].grad[bi * n_out + o];
            }
            self.nodes[b].grad[o] = self.nodes[b].grad[o] + acc;
        }
        for o in 0..n_out {
            for i in 0..n_in {
                let mut acc = S::zero();
                for bi in 0..batch {
                    acc = acc + self.nodes[out].grad[bi * n_out + o] * self.nodes[x].data[bi * n_in + i];
                }
                self.nodes[w].grad[o * n_in + i] = self.nodes[w].grad[o * n_in + i] + acc;
            }
        }
        for bi in 0..batch {
            for i in 0..n_in {
                let mut acc = S::zero();
                for o in 0..n_out {
                    acc = acc + self.nodes[out].grad[bi * n_out + o] * self.nodes[w].data[o * n_in + i];
                }
                self.nodes[x].grad[bi * n_in + i] = self.nodes[x].grad[bi * n_in + i] + acc;
            }
        }
    }

    fn backward_group_norm(&mut self, out: usize, x: usize, gamma: usize, beta: usize, groups: usize, _eps: f64) {
        let (batch, channels, len) = {
            let s = &self.nodes[x].shape;
            (s[0], s[1], s[2])
        };
        let ch_per = channels / groups;
        let group_elems = ch_per * len;
        let n = S::from_f64(group_elems as f64);
        for bi in 0..batch {
            for g in 0..groups {
                let mean = self.nodes[out].aux[(bi * groups + g) * 2];
                let inv_std = self.nodes[out].aux[(bi * groups + g) * 2 + 1];
                // First reductions over the group.
                let mut sum_dxhat = S::zero();
                let mut sum_dxhat_xhat = S::zero();
                for c_off in 0..ch_per {
                    let c = g * ch_per + c_off;
                    let base = (bi * channels + c) * len;
                    let gam = self.nodes[gamma].data[c];
                    for l in 0..len {
                        let go = self.nodes[out].grad[base + l];
                        let xhat = (self.nodes[x].data[base + l] - mean) * inv_std;
                        let dxhat = go * gam;
                        sum_dxhat = sum_dxhat + dxhat;
                        sum_dxhat_xhat = sum_dxhat_xhat + dxhat * xhat;
                        // Parameter grads.
                        self.nodes[gamma].grad[c] = self.nodes[gamma].grad[c] + go * xhat;
                        self.nodes[beta].grad[c] = self.nodes[beta].grad[c] + go;
                    }
                }
                // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
                for c_off in 0..ch_per {
                    let c = g * ch_per + c_off;
                    let base = (bi * channels + c) * len;
                    let gam = self.nodes[gamma].data[c];
                    for l in 0..len {
                        let go = self.nodes[out].grad[base + l];
                        let xhat = (self.nodes[x].data[base + l] - mean) * inv_std;
                        let dxhat = go * gam;
                        let dx = inv_std * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
                        self.nodes[x].grad[base + l] = self.nodes[x].grad[base + l] + dx;
                    }
                }
            }
        }
    }

    fn backward_film(&mut self, out: usize, x: usize, scale: usize, shift: usize) {
        let (batch, channels, len) = {
            let s = &self.nodes[x].shape;
            (s[0], s[1], s[2])
        };
        for bi in 0..batch {
            for c in 0..channels {
                let s = self.nodes[scale].data[bi * channels + c];
                let base = (bi * channels + c) * len;
                let mut dscale = S::zero();
                let mut dshift = S::zero();
                for l in 0..len {
                    let g = self.nodes[out].grad[base + l];
                    dscale = dscale + g * self.nodes[x].data[base + l];
                    dshift = dshift + g;
                    self.nodes[x].grad[base + l] = self.nodes[x].grad[base + l] + g * s;
                }
                self.nodes[scale].grad[bi * channels + c] =
                    self.nodes[scale].grad[bi * channels + c] + dscale;
                self.nodes[shift].grad[bi * channels + c] =
                    self.nodes[shift].grad[bi * channels + c] + dshift;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv1d_identity_kernel() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::from_f64(vec![1, 1, 4], &[1.0, 2.0, 3.0, 4.0]), false);
        let w = tape.leaf(Tensor::from_f64(vec![1, 1, 1], &[1.0]), false);
        let b = tape.leaf(Tensor::zeros(vec![1]), false);
        let y = tape.conv1d(x, w, b, 1, 0);
        assert_eq!(tape.data(y), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv1d_discrete_difference() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::from_f64(vec![1, 1, 4], &[1.0, 3.0, 6.0, 10.0]), false);
        let w = tape.leaf(Tensor::from_f64(vec![1, 1, 2], &[-1.0, 1.0]), false);
        let b = tape.leaf(Tensor::zeros(vec![1]), false);
        let y = tape.conv1d(x, w, b, 1, 0);
        assert_eq!(tape.shape(y), &[1, 1, 3]);
        assert_eq!(tape.data(y), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv1d_strided_length() {
        let mut tape: Tape<f32> = Tape::new();
        let x = tape.leaf(Tensor::zeros(vec![2, 3, 64]), false);
        let w = tape.leaf(Tensor::zeros(vec![8, 3, 3]), false);
        let b = tape.leaf(Tensor::zeros(vec![8]), false);
        let y = tape.conv1d(x, w, b, 2, 1);
        assert_eq!(tape.shape(y), &[2, 8, 32]);
    }

    #[test]
    fn silu_at_zero() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::from_f64(vec![3], &[0.0, 1.0, -1.0]), false);
        let y = tape.silu(x);
        assert_eq!(tape.data(y)[0], 0.0);
        assert!((tape.data(y)[1] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn film_identity() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::from_f64(vec![1, 2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), false);
        let ones = tape.leaf(Tensor::full(vec![1, 2], 1.0), false);
        let zeros = tape.leaf(Tensor::zeros(vec![1, 2]), false);
        let y = tape.film(x, ones, zeros);
        assert_eq!(tape.data(y), tape.data(x));
    }

    #[test]
    fn group_norm_normalizes_pre_affine() {
        let mut tape: Tape<f64> = Tape::new();
        let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(4);
        let x = tape.leaf(Tensor::randn(vec![2, 8, 16], 3.0, &mut rng), false);
        let gamma = tape.leaf(Tensor::full(vec![8], 1.0), false);
        let beta = tape.leaf(Tensor::zeros(vec![8]), false);
        let y = tape.group_norm(x, gamma, beta, 4, 1e-5);
        // Per (batch, group) mean ~ 0 and var ~ 1.
        let data = tape.data(y);
        for bi in 0..2 {
            for g in 0..4 {
                let mut vals = Vec::new();
                for c_off in 0..2 {
                    let c = g * 2 + c_off;
                    let base = (bi * 8 + c) * 16;
                    vals.extend_from_slice(&data[base..base + 16]);
                }
                let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
                let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
                assert!(mean.abs() < 1e-5, "mean {mean}");
                assert!((var - 1.0).abs() < 1e-4, "var {var}");
            }
        }
    }

    #[test]
    fn mse_identity_is_zero() {
        let mut tape: Tape<f64> = Tape::new();
        let a = tape.leaf(Tensor::from_f64(vec![4], &[0.3, -0.7, 1.2, 0.0]), false);
        let b = tape.leaf(Tensor::from_f64(vec![4], &[0.3, -0.7, 1.2, 0.0]), false);
        let loss = tape.mse_loss(a, b);
        assert_eq!(tape.data(loss)[0], 0.0);
    }

    #[test]
    fn forward_is_deterministic() {
        let build = || {
            let mut tape: Tape<f32> = Tape::new();
            let mut rng = <rand_chacha::ChaCha12Rng as rand::SeedableRng>::seed_from_u64(7);
            let x = tape.leaf(Tensor::randn(vec![2, 4, 8], 1.0, &mut rng), false);
            let w = tape.leaf(Tensor::randn(vec![4, 4, 3], 0.5, &mut rng), false);
            let b = tape.leaf(Tensor::randn(vec![4], 0.1, &mut rng), false);
            let y = tape.conv1d(x, w, b, 1, 1);
            let y = tape.silu(y);
            tape.value(y).data
        };
        let a = build();
        let b = build();
        assert_eq!(a, b);
    }
}
