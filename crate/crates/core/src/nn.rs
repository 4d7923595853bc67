//! Minimal feed-forward networks with hand-written backward passes.
//!
//! Parameters live in one flat `Vec<f64>` so the optimizer and the
//! finite-difference checks can treat a model as a single vector. Batches
//! are `(B, features)` row-major; convolution ops view rows as (C, H, W).
//! All ops are pure functions of (params, input) and single-threaded, so
//! repeated evaluation is bit-stable.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

/// Kernel geometry shared by conv and transposed conv: 4x4, stride 2,
/// padding 1, which exactly halves (or doubles) spatial dimensions.
const K: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpSpec {
    /// Fully connected: y = x W^T + b with W of shape (out, in).
    Dense { in_dim: usize, out_dim: usize },
    Relu,
    /// 4x4 stride-2 conv, (C, H, W) -> (O, H/2, W/2); H, W even.
    Conv {
        in_ch: usize,
        out_ch: usize,
        in_h: usize,
        in_w: usize,
    },
    /// 4x4 stride-2 transposed conv, (C, H, W) -> (O, 2H, 2W).
    Deconv {
        in_ch: usize,
        out_ch: usize,
        in_h: usize,
        in_w: usize,
    },
}

impl OpSpec {
    fn in_dim(&self) -> usize {
        match *self {
            OpSpec::Dense { in_dim, .. } => in_dim,
            OpSpec::Relu => 0, // any
            OpSpec::Conv {
                in_ch, in_h, in_w, ..
            }
            | OpSpec::Deconv {
                in_ch, in_h, in_w, ..
            } => in_ch * in_h * in_w,
        }
    }

    fn out_dim(&self, in_dim: usize) -> usize {
        match *self {
            OpSpec::Dense { out_dim, .. } => out_dim,
            OpSpec::Relu => in_dim,
            OpSpec::Conv {
                out_ch, in_h, in_w, ..
            } => out_ch * (in_h / STRIDE) * (in_w / STRIDE),
            OpSpec::Deconv {
                out_ch, in_h, in_w, ..
            } => out_ch * (in_h * STRIDE) * (in_w * STRIDE),
        }
    }

    fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            OpSpec::Dense { in_dim, out_dim } => vec![
                ("weight", vec![out_dim, in_dim]),
                ("bias", vec![out_dim]),
            ],
            OpSpec::Relu => vec![],
            OpSpec::Conv { in_ch, out_ch, .. } => vec![
                ("weight", vec![out_ch, in_ch, K, K]),
                ("bias", vec![out_ch]),
            ],
            OpSpec::Deconv { in_ch, out_ch, .. } => vec![
                ("weight", vec![in_ch, out_ch, K, K]),
                ("bias", vec![out_ch]),
            ],
        }
    }

    /// Receptive-field size used for init scaling.
    fn fan_in(&self) -> usize {
        match *self {
            OpSpec::Dense { in_dim, .. } => in_dim,
            OpSpec::Relu => 0,
            OpSpec::Conv { in_ch, .. } => in_ch * K * K,
            OpSpec::Deconv { in_ch, .. } => in_ch * K * K,
        }
    }
}

/// One named view into the flat parameter vector.
#[derive(Debug, Clone)]
pub struct ParamSlot {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamSlot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A sequential stack of ops over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Network {
    ops: Vec<OpSpec>,
    slots: Vec<ParamSlot>,
    op_offsets: Vec<usize>,
    n_params: usize,
    in_dim: usize,
    out_dim: usize,
}

/// Saved per-op inputs from a forward pass.
pub struct NetCache {
    inputs: Vec<Array2<f64>>,
}

impl Network {
    pub fn new(ops: Vec<OpSpec>, in_dim: usize) -> Self {
        let mut slots = Vec::new();
        let mut op_offsets = Vec::with_capacity(ops.len());
        let mut offset = 0usize;
        let mut dim = in_dim;
        for (i, op) in ops.iter().enumerate() {
            if !matches!(op, OpSpec::Relu) {
                assert_eq!(
                    op.in_dim(),
                    dim,
                    "op {i} expects {} inputs, got {dim}",
                    op.in_dim()
                );
            }
            op_offsets.push(offset);
            for (kind, shape) in op.param_shapes() {
                let len: usize = shape.iter().product();
                slots.push(ParamSlot {
                    name: format!("op{i}.{kind}"),
                    offset,
                    shape,
                });
                offset += len;
            }
            dim = op.out_dim(dim);
        }
        Self {
            ops,
            slots,
            op_offsets,
            n_params: offset,
            in_dim,
            out_dim: dim,
        }
    }

    pub fn num_params(&self) -> usize {
        self.n_params
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    /// He-normal weights scaled by fan-in, zero biases.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = vec![0.0; self.n_params];
        for slot in &self.slots {
            if slot.name.ends_with(".weight") {
                let op_index: usize = slot.name[2..slot.name.find('.').unwrap()]
                    .parse()
                    .expect("op index");
                let std = (2.0 / self.ops[op_index].fan_in() as f64).sqrt();
                for p in &mut params[slot.offset..slot.offset + slot.len()] {
                    let z: f64 = rng.sample(StandardNormal);
                    *p = z * std;
                }
            }
        }
        params
    }

    pub fn forward(&self, params: &[f64], x: &Array2<f64>) -> (Array2<f64>, NetCache) {
        assert_eq!(params.len(), self.n_params);
        assert_eq!(x.ncols(), self.in_dim, "input feature mismatch");
        let mut inputs = Vec::with_capacity(self.ops.len());
        let mut cur = x.clone();
        for (op, &off) in self.ops.iter().zip(&self.op_offsets) {
            let next = match *op {
                OpSpec::Dense { in_dim, out_dim } => {
                    let w = ArrayView2::from_shape(
                        (out_dim, in_dim),
                        &params[off..off + out_dim * in_dim],
                    )
                    .unwrap();
                    let b = &params[off + out_dim * in_dim..off + out_dim * in_dim + out_dim];
                    let mut y = cur.dot(&w.t());
                    for mut row in y.rows_mut() {
                        for (v, &bi) in row.iter_mut().zip(b) {
                            *v += bi;
                        }
                    }
                    y
                }
                OpSpec::Relu => cur.mapv(|v| if v > 0.0 { v } else { 0.0 }),
                OpSpec::Conv {
                    in_ch,
                    out_ch,
                    in_h,
                    in_w,
                } => conv_forward(&cur, params, off, in_ch, out_ch, in_h, in_w),
                OpSpec::Deconv {
                    in_ch,
                    out_ch,
                    in_h,
                    in_w,
                } => deconv_forward(&cur, params, off, in_ch, out_ch, in_h, in_w),
            };
            inputs.push(cur);
            cur = next;
        }
        (cur, NetCache { inputs })
    }

    /// Backpropagate `grad_out`, adding parameter gradients into
    /// `grad_params` (so several passes can share one buffer). Returns the
    /// gradient with respect to the network input.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &NetCache,
        grad_out: &Array2<f64>,
        grad_params: &mut [f64],
    ) -> Array2<f64> {
        assert_eq!(grad_params.len(), self.n_params);
        let mut grad = grad_out.clone();
        for ((op, &off), input) in self
            .ops
            .iter()
            .zip(&self.op_offsets)
            .zip(&cache.inputs)
            .rev()
        {
            grad = match *op {
                OpSpec::Dense { in_dim, out_dim } => {
                    let w = ArrayView2::from_shape(
                        (out_dim, in_dim),
                        &params[off..off + out_dim * in_dim],
                    )
                    .unwrap();
                    // dW = dy^T x, db = column sums, dx = dy W
                    let dw = grad.t().dot(input);
                    let wslice = &mut grad_params[off..off + out_dim * in_dim];
                    for (g, &d) in wslice.iter_mut().zip(dw.iter()) {
                        *g += d;
                    }
                    let bslice =
                        &mut grad_params[off + out_dim * in_dim..off + out_dim * in_dim + out_dim];
                    for (j, g) in bslice.iter_mut().enumerate() {
                        *g += grad.column(j).sum();
                    }
                    grad.dot(&w)
                }
                OpSpec::Relu => {
                    let mut dx = grad;
                    dx.zip_mut_with(input, |g, &v| {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    dx
                }
                OpSpec::Conv {
                    in_ch,
                    out_ch,
                    in_h,
                    in_w,
                } => conv_backward(
                    &grad,
                    input,
                    params,
                    grad_params,
                    off,
                    in_ch,
                    out_ch,
                    in_h,
                    in_w,
                ),
                OpSpec::Deconv {
                    in_ch,
                    out_ch,
                    in_h,
                    in_w,
                } => deconv_backward(
                    &grad,
                    input,
                    params,
                    grad_params,
                    off,
                    in_ch,
                    out_ch,
                    in_h,
                    in_w,
                ),
            };
        }
        grad
    }
}

/// im2col: (C, H, W) row -> (C*K*K, OH*OW) patch matrix.
fn im2col(row: &[f64], in_ch: usize, in_h: usize, in_w: usize) -> Array2<f64> {
    let (oh, ow) = (in_h / STRIDE, in_w / STRIDE);
    let mut col = Array2::zeros((in_ch * K * K, oh * ow));
    for c in 0..in_ch {
        for kh in 0..K {
            for kw in 0..K {
                let r = (c * K + kh) * K + kw;
                for oy in 0..oh {
                    let iy = (oy * STRIDE + kh) as isize - PAD as isize;
                    if iy < 0 || iy >= in_h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * STRIDE + kw) as isize - PAD as isize;
                        if ix < 0 || ix >= in_w as isize {
                            continue;
                        }
                        col[[r, oy * ow + ox]] =
                            row[(c * in_h + iy as usize) * in_w + ix as usize];
                    }
                }
            }
        }
    }
    col
}

/// col2im: scatter-add of the patch matrix back onto (C, H, W).
fn col2im(col: &Array2<f64>, in_ch: usize, in_h: usize, in_w: usize, out: &mut [f64]) {
    let (oh, ow) = (in_h / STRIDE, in_w / STRIDE);
    for c in 0..in_ch {
        for kh in 0..K {
            for kw in 0..K {
                let r = (c * K + kh) * K + kw;
                for oy in 0..oh {
                    let iy = (oy * STRIDE + kh) as isize - PAD as isize;
                    if iy < 0 || iy >= in_h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * STRIDE + kw) as isize - PAD as isize;
                        if ix < 0 || ix >= in_w as isize {
                            continue;
                        }
                        out[(c * in_h + iy as usize) * in_w + ix as usize] +=
                            col[[r, oy * ow + ox]];
                    }
                }
            }
        }
    }
}

fn conv_forward(
    x: &Array2<f64>,
    params: &[f64],
    off: usize,
    in_ch: usize,
    out_ch: usize,
    in_h: usize,
    in_w: usize,
) -> Array2<f64> {
    let (oh, ow) = (in_h / STRIDE, in_w / STRIDE);
    let wlen = out_ch * in_ch * K * K;
    let w = ArrayView2::from_shape((out_ch, in_ch * K * K), &params[off..off + wlen]).unwrap();
    let b = &params[off + wlen..off + wlen + out_ch];
    let batch = x.nrows();
    let mut y = Array2::zeros((batch, out_ch * oh * ow));
    for (i, row) in x.rows().into_iter().enumerate() {
        let col = im2col(row.as_slice().unwrap(), in_ch, in_h, in_w);
        let out = w.dot(&col); // (out_ch, oh*ow)
        let mut yrow = y.row_mut(i);
        for o in 0..out_ch {
            for p in 0..oh * ow {
                yrow[o * oh * ow + p] = out[[o, p]] + b[o];
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    grad_y: &Array2<f64>,
    x: &Array2<f64>,
    params: &[f64],
    grad_params: &mut [f64],
    off: usize,
    in_ch: usize,
    out_ch: usize,
    in_h: usize,
    in_w: usize,
) -> Array2<f64> {
    let (oh, ow) = (in_h / STRIDE, in_w / STRIDE);
    let wlen = out_ch * in_ch * K * K;
    let w = ArrayView2::from_shape((out_ch, in_ch * K * K), &params[off..off + wlen]).unwrap();
    let batch = x.nrows();
    let mut grad_x = Array2::zeros((batch, in_ch * in_h * in_w));
    for i in 0..batch {
        let col = im2col(x.row(i).as_slice().unwrap(), in_ch, in_h, in_w);
        let gy = grad_y.row(i);
        let gy_mat = ArrayView2::from_shape((out_ch, oh * ow), gy.as_slice().unwrap()).unwrap();
        // dW += gy col^T
        let dw = gy_mat.dot(&col.t());
        for (g, &d) in grad_params[off..off + wlen].iter_mut().zip(dw.iter()) {
            *g += d;
        }
        // db += row sums of gy
        for o in 0..out_ch {
            grad_params[off + wlen + o] += gy_mat.row(o).sum();
        }
        // dx = scatter(W^T gy)
        let dcol = w.t().dot(&gy_mat);
        col2im(
            &dcol,
            in_ch,
            in_h,
            in_w,
            grad_x.row_mut(i).into_slice().unwrap(),
        );
    }
    grad_x
}

fn deconv_forward(
    x: &Array2<f64>,
    params: &[f64],
    off: usize,
    in_ch: usize,
    out_ch: usize,
    in_h: usize,
    in_w: usize,
) -> Array2<f64> {
    let (oh, ow) = (in_h * STRIDE, in_w * STRIDE);
    let wlen = in_ch * out_ch * K * K;
    let w = ArrayView2::from_shape((in_ch, out_ch * K * K), &params[off..off + wlen]).unwrap();
    let b = &params[off + wlen..off + wlen + out_ch];
    let batch = x.nrows();
    let mut y = Array2::zeros((batch, out_ch * oh * ow));
    for i in 0..batch {
        let xrow = x.row(i);
        let xin =
            ArrayView2::from_shape((in_ch, in_h * in_w), xrow.as_slice().unwrap()).unwrap();
        // transposed conv is the adjoint of the stride-2 conv on the output
        let col = w.t().dot(&xin); // (out_ch*K*K, in_h*in_w)
        let yrow = y.row_mut(i).into_slice().unwrap();
        col2im(&col, out_ch, oh, ow, yrow);
        for o in 0..out_ch {
            for p in 0..oh * ow {
                yrow[o * oh * ow + p] += b[o];
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn deconv_backward(
    grad_y: &Array2<f64>,
    x: &Array2<f64>,
    params: &[f64],
    grad_params: &mut [f64],
    off: usize,
    in_ch: usize,
    out_ch: usize,
    in_h: usize,
    in_w: usize,
) -> Array2<f64> {
    let (oh, ow) = (in_h * STRIDE, in_w * STRIDE);
    let wlen = in_ch * out_ch * K * K;
    let w = ArrayView2::from_shape((in_ch, out_ch * K * K), &params[off..off + wlen]).unwrap();
    let batch = x.nrows();
    let mut grad_x = Array2::zeros((batch, in_ch * in_h * in_w));
    for i in 0..batch {
        let gy = grad_y.row(i);
        // gather the output gradient into patch form (adjoint of col2im);
        // the patch grid lives on the *output*, indexed by input cells
        let gcol = im2col(gy.as_slice().unwrap(), out_ch, oh, ow);
        let xrow = x.row(i);
        let xin =
            ArrayView2::from_shape((in_ch, in_h * in_w), xrow.as_slice().unwrap()).unwrap();
        // dW += x gcol^T
        let dw = xin.dot(&gcol.t());
        for (g, &d) in grad_params[off..off + wlen].iter_mut().zip(dw.iter()) {
            *g += d;
        }
        // db: sum of gy per out channel
        for o in 0..out_ch {
            let mut s = 0.0;
            for p in 0..oh * ow {
                s += gy[o * oh * ow + p];
            }
            grad_params[off + wlen + o] += s;
        }
        // dx = W gcol
        let dx = w.dot(&gcol);
        for (g, &d) in grad_x.row_mut(i).iter_mut().zip(dx.iter()) {
            *g = d;
        }
    }
    grad_x
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
        }
    }
}
