//! Minimal neural-network layers with hand-written reverse-mode gradients.
//!
//! Everything is generic over [`Scalar`] so training runs in f32 while
//! gradient checks run in f64. Layers expose `forward` returning whatever
//! cache their `backward` needs; composite networks chain these by hand.
//! Gradients accumulate into a mirror instance of the same layer type.

use ndarray::{Array1, Array2, Array3, Array4, LinalgScalar};
use num_traits::Float;
use rand::Rng;

use crate::rng;

pub trait Scalar:
    LinalgScalar + Float + std::fmt::Debug + std::fmt::Display + Send + Sync
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Flat parameter access shared by layers and composite networks. The
/// visitation order is fixed by each implementation, which makes `to_flat`
/// the serialization format.
pub trait Params<F: Scalar>: Sized {
    fn visit(&self, f: &mut dyn FnMut(&F));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut F));
    /// Structural clone with all parameters zeroed (gradient/velocity store).
    fn zeros_like(&self) -> Self;

    fn count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    fn to_flat(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.count());
        self.visit(&mut |v| out.push(*v));
        out
    }

    fn set_flat(&mut self, flat: &[F]) -> crate::Result<()> {
        if flat.len() != self.count() {
            return Err(crate::Error::ShapeMismatch(format!(
                "parameter vector length {} != expected {}",
                flat.len(),
                self.count()
            )));
        }
        let mut it = flat.iter();
        self.visit_mut(&mut |v| *v = *it.next().unwrap());
        Ok(())
    }

    fn fill(&mut self, value: F) {
        self.visit_mut(&mut |v| *v = value);
    }
}

/// Elementwise `dst = dst * a + src * b`, used by the optimizer.
pub fn axpby<F: Scalar, P: Params<F>>(dst: &mut P, a: F, src: &P, b: F) {
    let flat = src.to_flat();
    let mut i = 0;
    dst.visit_mut(&mut |v| {
        *v = *v * a + flat[i] * b;
        i += 1;
    });
}

/// Plain SGD with optional momentum (velocity stored as a mirror network).
pub struct Sgd<F: Scalar, P: Params<F>> {
    pub lr: F,
    pub momentum: F,
    velocity: Option<P>,
}

impl<F: Scalar, P: Params<F>> Sgd<F, P> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Sgd {
            lr: F::from_f64(lr),
            momentum: F::from_f64(momentum),
            velocity: None,
        }
    }

    pub fn step(&mut self, params: &mut P, grads: &P) {
        if self.momentum.to_f64() == 0.0 {
            axpby(params, F::one(), grads, -self.lr);
            return;
        }
        let velocity = self.velocity.get_or_insert_with(|| params.zeros_like());
        axpby(velocity, self.momentum, grads, F::one());
        axpby(params, F::one(), velocity, -self.lr);
    }
}

/// Uniform init in ±sqrt(1/fan_in); sampling happens in f64 so f32 and f64
/// nets see the same stream.
fn init_array<F: Scalar, D: ndarray::Dimension>(
    shape: impl ndarray::ShapeBuilder<Dim = D>,
    fan_in: usize,
    stream: &mut rng::Stream,
) -> ndarray::Array<F, D> {
    let scale = (1.0 / fan_in.max(1) as f64).sqrt();
    ndarray::Array::from_shape_simple_fn(shape, || {
        F::from_f64((stream.random::<f64>() * 2.0 - 1.0) * scale)
    })
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Fully connected layer, `y = x · Wᵀ + b`, batch-first.
#[derive(Debug, Clone)]
pub struct Dense<F> {
    pub w: Array2<F>, // (out, in)
    pub b: Array1<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(in_dim: usize, out_dim: usize, stream: &mut rng::Stream) -> Self {
        Dense {
            w: init_array((out_dim, in_dim), in_dim, stream),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            w: Array2::zeros((out_dim, in_dim)),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Returns dx; accumulates dW, db into `grads`.
    pub fn backward(&self, x: &Array2<F>, dy: &Array2<F>, grads: &mut Dense<F>) -> Array2<F> {
        grads.w = &grads.w + &dy.t().dot(x);
        grads.b = &grads.b + &dy.sum_axis(ndarray::Axis(0));
        dy.dot(&self.w)
    }
}

impl<F: Scalar> Params<F> for Dense<F> {
    fn visit(&self, f: &mut dyn FnMut(&F)) {
        self.w.iter().for_each(&mut *f);
        self.b.iter().for_each(&mut *f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut F)) {
        self.w.iter_mut().for_each(&mut *f);
        self.b.iter_mut().for_each(&mut *f);
    }
    fn zeros_like(&self) -> Self {
        Dense {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

pub const LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu<F: Scalar, D: ndarray::Dimension>(
    x: &ndarray::Array<F, D>,
) -> ndarray::Array<F, D> {
    let a = F::from_f64(LEAKY_SLOPE);
    x.mapv(|v| if v > F::zero() { v } else { v * a })
}

/// dx from dy using the activation output (sign(y) == sign(x)).
pub fn leaky_relu_backward<F: Scalar, D: ndarray::Dimension>(
    y: &ndarray::Array<F, D>,
    dy: &ndarray::Array<F, D>,
) -> ndarray::Array<F, D> {
    let a = F::from_f64(LEAKY_SLOPE);
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(y).for_each(|d, &v| {
        if v <= F::zero() {
            *d = *d * a;
        }
    });
    dx
}

pub fn tanh<F: Scalar, D: ndarray::Dimension>(x: &ndarray::Array<F, D>) -> ndarray::Array<F, D> {
    x.mapv(|v| v.tanh())
}

pub fn tanh_backward<F: Scalar, D: ndarray::Dimension>(
    y: &ndarray::Array<F, D>,
    dy: &ndarray::Array<F, D>,
) -> ndarray::Array<F, D> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(y).for_each(|d, &v| {
        *d = *d * (F::one() - v * v);
    });
    dx
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

/// Layer normalization over the last axis with learned gain and bias.
#[derive(Debug, Clone)]
pub struct LayerNorm<F> {
    pub gain: Array1<F>,
    pub bias: Array1<F>,
    pub eps: F,
}

pub struct LayerNormCache<F> {
    xhat: Array2<F>,
    inv_std: Array1<F>, // per row
}

impl<F: Scalar> LayerNorm<F> {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gain: Array1::ones(dim),
            bias: Array1::zeros(dim),
            eps: F::from_f64(1e-5),
        }
    }

    pub fn forward(&self, x: &Array2<F>) -> (Array2<F>, LayerNormCache<F>) {
        let d = x.ncols();
        let inv_d = F::from_f64(1.0 / d as f64);
        let mut xhat = x.clone();
        let mut inv_std = Array1::zeros(x.nrows());
        for (mut row, s) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.iter().fold(F::zero(), |a, &b| a + b) * inv_d;
            let var = row
                .iter()
                .fold(F::zero(), |a, &b| a + (b - mean) * (b - mean))
                * inv_d;
            let is = F::one() / (var + self.eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            *s = is;
        }
        let y = &xhat * &self.gain + &self.bias;
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(
        &self,
        cache: &LayerNormCache<F>,
        dy: &Array2<F>,
        grads: &mut LayerNorm<F>,
    ) -> Array2<F> {
        let d = dy.ncols();
        let inv_d = F::from_f64(1.0 / d as f64);
        grads.gain = &grads.gain + &(dy * &cache.xhat).sum_axis(ndarray::Axis(0));
        grads.bias = &grads.bias + &dy.sum_axis(ndarray::Axis(0));
        let mut dx = Array2::zeros(dy.raw_dim());
        for (r, mut dx_row) in dx.rows_mut().into_iter().enumerate() {
            let dy_row = dy.row(r);
            let xhat_row = cache.xhat.row(r);
            let dxhat: Vec<F> = dy_row
                .iter()
                .zip(self.gain.iter())
                .map(|(&g, &w)| g * w)
                .collect();
            let mean_dxhat = dxhat.iter().fold(F::zero(), |a, &b| a + b) * inv_d;
            let mean_dxhat_xhat = dxhat
                .iter()
                .zip(xhat_row.iter())
                .fold(F::zero(), |a, (&g, &h)| a + g * h)
                * inv_d;
            for (k, out) in dx_row.iter_mut().enumerate() {
                *out =
                    cache.inv_std[r] * (dxhat[k] - mean_dxhat - xhat_row[k] * mean_dxhat_xhat);
            }
        }
        dx
    }
}

impl<F: Scalar> Params<F> for LayerNorm<F> {
    fn visit(&self, f: &mut dyn FnMut(&F)) {
        self.gain.iter().for_each(&mut *f);
        self.bias.iter().for_each(&mut *f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut F)) {
        self.gain.iter_mut().for_each(&mut *f);
        self.bias.iter_mut().for_each(&mut *f);
    }
    fn zeros_like(&self) -> Self {
        LayerNorm {
            gain: Array1::zeros(self.gain.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
            eps: self.eps,
        }
    }
}

// ---------------------------------------------------------------------------
// Conv1d (convolution along the particle axis)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Conv1d<F> {
    pub w: Array3<F>, // (out_c, in_c, k)
    pub b: Array1<F>,
    pub stride: usize,
    pub pad: usize,
}

impl<F: Scalar> Conv1d<F> {
    pub fn new(
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        stream: &mut rng::Stream,
    ) -> Self {
        Conv1d {
            w: init_array((out_c, in_c, k), in_c * k, stream),
            b: Array1::zeros(out_c),
            stride,
            pad: k / 2,
        }
    }

    pub fn out_len(&self, in_len: usize) -> usize {
        (in_len + 2 * self.pad - self.w.shape()[2]) / self.stride + 1
    }

    /// x: (in_c, L) single sample; returns (out_c, out_len).
    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let (out_c, in_c, k) = (self.w.shape()[0], self.w.shape()[1], self.w.shape()[2]);
        let in_len = x.ncols();
        let out_len = self.out_len(in_len);
        let mut y = Array2::zeros((out_c, out_len));
        for oc in 0..out_c {
            for ol in 0..out_len {
                let mut acc = self.b[oc];
                let base = ol * self.stride;
                for ic in 0..in_c {
                    for kk in 0..k {
                        let il = base + kk;
                        if il >= self.pad && il - self.pad < in_len {
                            acc = acc + self.w[[oc, ic, kk]] * x[[ic, il - self.pad]];
                        }
                    }
                }
                y[[oc, ol]] = acc;
            }
        }
        y
    }

    pub fn backward(&self, x: &Array2<F>, dy: &Array2<F>, grads: &mut Conv1d<F>) -> Array2<F> {
        let (out_c, in_c, k) = (self.w.shape()[0], self.w.shape()[1], self.w.shape()[2]);
        let in_len = x.ncols();
        let out_len = dy.ncols();
        let mut dx = Array2::zeros((in_c, in_len));
        for oc in 0..out_c {
            for ol in 0..out_len {
                let g = dy[[oc, ol]];
                grads.b[oc] = grads.b[oc] + g;
                let base = ol * self.stride;
                for ic in 0..in_c {
                    for kk in 0..k {
                        let il = base + kk;
                        if il >= self.pad && il - self.pad < in_len {
                            grads.w[[oc, ic, kk]] =
                                grads.w[[oc, ic, kk]] + g * x[[ic, il - self.pad]];
                            dx[[ic, il - self.pad]] =
                                dx[[ic, il - self.pad]] + g * self.w[[oc, ic, kk]];
                        }
                    }
                }
            }
        }
        dx
    }
}

impl<F: Scalar> Params<F> for Conv1d<F> {
    fn visit(&self, f: &mut dyn FnMut(&F)) {
        self.w.iter().for_each(&mut *f);
        self.b.iter().for_each(&mut *f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut F)) {
        self.w.iter_mut().for_each(&mut *f);
        self.b.iter_mut().for_each(&mut *f);
    }
    fn zeros_like(&self) -> Self {
        Conv1d {
            w: Array3::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            stride: self.stride,
            pad: self.pad,
        }
    }
}

// ---------------------------------------------------------------------------
// Conv2d (image encoder)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Conv2d<F> {
    pub w: Array4<F>, // (out_c, in_c, kh, kw)
    pub b: Array1<F>,
    pub stride: usize,
    pub pad: usize,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        stream: &mut rng::Stream,
    ) -> Self {
        Conv2d {
            w: init_array((out_c, in_c, k, k), in_c * k * k, stream),
            b: Array1::zeros(out_c),
            stride,
            pad: k / 2,
        }
    }

    /// x: (in_c, H, W) single sample.
    pub fn forward(&self, x: &Array3<F>) -> Array3<F> {
        let (out_c, in_c, kh, kw) = (
            self.w.shape()[0],
            self.w.shape()[1],
            self.w.shape()[2],
            self.w.shape()[3],
        );
        let (h, w) = (x.shape()[1], x.shape()[2]);
        let oh = (h + 2 * self.pad - kh) / self.stride + 1;
        let ow = (w + 2 * self.pad - kw) / self.stride + 1;
        let mut y = Array3::zeros((out_c, oh, ow));
        for oc in 0..out_c {
            for r in 0..oh {
                for cq in 0..ow {
                    let mut acc = self.b[oc];
                    for ic in 0..in_c {
                        for i in 0..kh {
                            for j in 0..kw {
                                let rr = r * self.stride + i;
                                let cc = cq * self.stride + j;
                                if rr >= self.pad
                                    && cc >= self.pad
                                    && rr - self.pad < h
                                    && cc - self.pad < w
                                {
                                    acc = acc
                                        + self.w[[oc, ic, i, j]]
                                            * x[[ic, rr - self.pad, cc - self.pad]];
                                }
                            }
                        }
                    }
                    y[[oc, r, cq]] = acc;
                }
            }
        }
        y
    }

    pub fn backward(&self, x: &Array3<F>, dy: &Array3<F>, grads: &mut Conv2d<F>) -> Array3<F> {
        let (out_c, in_c, kh, kw) = (
            self.w.shape()[0],
            self.w.shape()[1],
            self.w.shape()[2],
            self.w.shape()[3],
        );
        let (h, w) = (x.shape()[1], x.shape()[2]);
        let (oh, ow) = (dy.shape()[1], dy.shape()[2]);
        let mut dx = Array3::zeros(x.raw_dim());
        for oc in 0..out_c {
            for r in 0..oh {
                for cq in 0..ow {
                    let g = dy[[oc, r, cq]];
                    grads.b[oc] = grads.b[oc] + g;
                    for ic in 0..in_c {
                        for i in 0..kh {
                            for j in 0..kw {
                                let rr = r * self.stride + i;
                                let cc = cq * self.stride + j;
                                if rr >= self.pad
                                    && cc >= self.pad
                                    && rr - self.pad < h
                                    && cc - self.pad < w
                                {
                                    grads.w[[oc, ic, i, j]] = grads.w[[oc, ic, i, j]]
                                        + g * x[[ic, rr - self.pad, cc - self.pad]];
                                    dx[[ic, rr - self.pad, cc - self.pad]] = dx
                                        [[ic, rr - self.pad, cc - self.pad]]
                                        + g * self.w[[oc, ic, i, j]];
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

impl<F: Scalar> Params<F> for Conv2d<F> {
    fn visit(&self, f: &mut dyn FnMut(&F)) {
        self.w.iter().for_each(&mut *f);
        self.b.iter().for_each(&mut *f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut F)) {
        self.w.iter_mut().for_each(&mut *f);
        self.b.iter_mut().for_each(&mut *f);
    }
    fn zeros_like(&self) -> Self {
        Conv2d {
            w: Array4::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            stride: self.stride,
            pad: self.pad,
        }
    }
}

// ---------------------------------------------------------------------------
// LSTM cell
// ---------------------------------------------------------------------------

/// Single LSTM cell; gate layout along the 4H axis is [input, forget, cell,
/// output].
#[derive(Debug, Clone)]
pub struct LstmCell<F> {
    pub w_ih: Array2<F>, // (4H, In)
    pub w_hh: Array2<F>, // (4H, H)
    pub b: Array1<F>,    // (4H)
}

pub struct LstmCache<F> {
    x: Array2<F>,
    h_prev: Array2<F>,
    c_prev: Array2<F>,
    i: Array2<F>,
    f: Array2<F>,
    g: Array2<F>,
    o: Array2<F>,
    c: Array2<F>,
}

impl<F: Scalar> LstmCell<F> {
    pub fn new(in_dim: usize, hidden: usize, stream: &mut rng::Stream) -> Self {
        LstmCell {
            w_ih: init_array((4 * hidden, in_dim), in_dim, stream),
            w_hh: init_array((4 * hidden, hidden), hidden, stream),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    /// x: (B, In); h, c: (B, H). Returns (h', c', cache).
    pub fn forward(
        &self,
        x: &Array2<F>,
        h: &Array2<F>,
        c: &Array2<F>,
    ) -> (Array2<F>, Array2<F>, LstmCache<F>) {
        let hd = self.hidden();
        let pre = x.dot(&self.w_ih.t()) + h.dot(&self.w_hh.t()) + &self.b;
        let sig = |v: F| F::one() / (F::one() + (-v).exp());
        let b = x.nrows();
        let mut gi = Array2::zeros((b, hd));
        let mut gf = Array2::zeros((b, hd));
        let mut gg = Array2::zeros((b, hd));
        let mut go = Array2::zeros((b, hd));
        for r in 0..b {
            for k in 0..hd {
                gi[[r, k]] = sig(pre[[r, k]]);
                gf[[r, k]] = sig(pre[[r, hd + k]]);
                gg[[r, k]] = pre[[r, 2 * hd + k]].tanh();
                go[[r, k]] = sig(pre[[r, 3 * hd + k]]);
            }
        }
        let c_new = &gf * c + &gi * &gg;
        let h_new = &go * &c_new.mapv(|v| v.tanh());
        let cache = LstmCache {
            x: x.clone(),
            h_prev: h.clone(),
            c_prev: c.clone(),
            i: gi,
            f: gf,
            g: gg,
            o: go,
            c: c_new.clone(),
        };
        (h_new, c_new, cache)
    }

    /// Backward through one step. Returns (dx, dh_prev, dc_prev).
    pub fn backward(
        &self,
        cache: &LstmCache<F>,
        dh: &Array2<F>,
        dc_in: &Array2<F>,
        grads: &mut LstmCell<F>,
    ) -> (Array2<F>, Array2<F>, Array2<F>) {
        let hd = self.hidden();
        let b = dh.nrows();
        let tanh_c = cache.c.mapv(|v| v.tanh());
        // dc accumulates the direct path and the one through h = o * tanh(c)
        let mut dc = dc_in.clone();
        ndarray::Zip::from(&mut dc)
            .and(dh)
            .and(&cache.o)
            .and(&tanh_c)
            .for_each(|d, &dh_v, &o, &tc| {
                *d = *d + dh_v * o * (F::one() - tc * tc);
            });
        let mut dpre = Array2::zeros((b, 4 * hd));
        for r in 0..b {
            for k in 0..hd {
                let (i, f, g, o) = (
                    cache.i[[r, k]],
                    cache.f[[r, k]],
                    cache.g[[r, k]],
                    cache.o[[r, k]],
                );
                let dct = dc[[r, k]];
                dpre[[r, k]] = dct * g * i * (F::one() - i);
                dpre[[r, hd + k]] = dct * cache.c_prev[[r, k]] * f * (F::one() - f);
                dpre[[r, 2 * hd + k]] = dct * i * (F::one() - g * g);
                dpre[[r, 3 * hd + k]] = dh[[r, k]] * tanh_c[[r, k]] * o * (F::one() - o);
            }
        }
        grads.w_ih = &grads.w_ih + &dpre.t().dot(&cache.x);
        grads.w_hh = &grads.w_hh + &dpre.t().dot(&cache.h_prev);
        grads.b = &grads.b + &dpre.sum_axis(ndarray::Axis(0));
        let dx = dpre.dot(&self.w_ih);
        let dh_prev = dpre.dot(&self.w_hh);
        let dc_prev = &dc * &cache.f;
        (dx, dh_prev, dc_prev)
    }
}

impl<F: Scalar> Params<F> for LstmCell<F> {
    fn visit(&self, f: &mut dyn FnMut(&F)) {
        self.w_ih.iter().for_each(&mut *f);
        self.w_hh.iter().for_each(&mut *f);
        self.b.iter().for_each(&mut *f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut F)) {
        self.w_ih.iter_mut().for_each(&mut *f);
        self.w_hh.iter_mut().for_each(&mut *f);
        self.b.iter_mut().for_each(&mut *f);
    }
    fn zeros_like(&self) -> Self {
        LstmCell {
            w_ih: Array2::zeros(self.w_ih.raw_dim()),
            w_hh: Array2::zeros(self.w_hh.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

// ---------------------------------------------------------------------------
// MLP convenience stack (Dense + leaky ReLU hidden layers, linear head)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Mlp<F> {
    pub layers: Vec<Dense<F>>,
}

pub struct MlpCache<F> {
    /// Input and each hidden activation (inputs to every layer).
    activations: Vec<Array2<F>>,
}

impl<F: Scalar> Mlp<F> {
    pub fn new(dims: &[usize], stream: &mut rng::Stream) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| Dense::new(w[0], w[1], stream))
            .collect();
        Mlp { layers }
    }

    pub fn forward(&self, x: &Array2<F>) -> (Array2<F>, MlpCache<F>) {
        let mut activations = vec![x.clone()];
        let mut cur = x.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            let pre = layer.forward(&cur);
            cur = if idx + 1 < self.layers.len() {
                let act = leaky_relu(&pre);
                activations.push(act.clone());
                act
            } else {
                pre
            };
        }
        (cur, MlpCache { activations })
    }

    pub fn backward(&self, cache: &MlpCache<F>, dy: &Array2<F>, grads: &mut Mlp<F>) -> Array2<F> {
        let mut grad = dy.clone();
        for idx in (0..self.layers.len()).rev() {
            let x = &cache.activations[idx];
            grad = self.layers[idx].backward(x, &grad, &mut grads.layers[idx]);
            if idx > 0 {
                grad = leaky_relu_backward(&cache.activations[idx], &grad);
            }
        }
        grad
    }
}

impl<F: Scalar> Params<F> for Mlp<F> {
    fn visit(&self, f: &mut dyn FnMut(&F)) {
        for l in &self.layers {
            l.visit(f);
        }
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut F)) {
        for l in &mut self.layers {
            l.visit_mut(f);
        }
    }
    fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(Params::zeros_like).collect(),
        }
    }
}

/// Central finite-difference check: max relative error between analytic
/// gradients and numeric ones over `probes` randomly chosen coordinates.
pub fn finite_difference_max_rel_err<P, L>(
    params: &mut P,
    analytic: &P,
    probes: usize,
    step: f64,
    seed: u64,
    mut loss: L,
) -> f64
where
    P: Params<f64>,
    L: FnMut(&P) -> f64,
{
    let flat = params.to_flat();
    let grad_flat = analytic.to_flat();
    let mut stream = rng::derive(seed, &[0xf1d]);
    let n = flat.len();
    let mut worst = 0.0_f64;
    for _ in 0..probes.min(n) {
        let idx = stream.random_range(0..n);
        let mut plus = flat.clone();
        plus[idx] += step;
        params.set_flat(&plus).unwrap();
        let lp = loss(params);
        let mut minus = flat.clone();
        minus[idx] -= step;
        params.set_flat(&minus).unwrap();
        let lm = loss(params);
        let numeric = (lp - lm) / (2.0 * step);
        let denom = numeric.abs().max(grad_flat[idx].abs()).max(1e-8);
        worst = worst.max((numeric - grad_flat[idx]).abs() / denom);
    }
    params.set_flat(&flat).unwrap();
    worst
}

#[cfg(test)]
mod tests;
