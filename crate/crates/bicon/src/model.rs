//! Minimal convolutional model with an 8-channel connectivity head (or a
//! single-channel saliency head for the baseline variant), with
//! hand-written backward passes.
//!
//! Three 3×3 conv layers (widths 1→16→16→16, tanh after each) feed a 1×1
//! head squashed by the logistic function. Convolutions mirror-pad, the
//! same boundary rule the connectivity codec uses, so the network is fully
//! convolutional and runs at any resolution.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{ConnGrid, Map, CHANNELS};
use crate::scalar::Real;

/// Width of the three hidden layers.
pub const HIDDEN_CHANNELS: usize = 16;

/// Which head the model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadVariant {
    /// 8-channel connectivity output.
    Connectivity,
    /// Single-channel saliency output (baseline).
    Saliency,
}

impl HeadVariant {
    pub fn out_channels(self) -> usize {
        match self {
            HeadVariant::Connectivity => CHANNELS,
            HeadVariant::Saliency => 1,
        }
    }
}

/// Channel-major (c, y, x) feature stack.
#[derive(Debug, Clone)]
pub(crate) struct Planes<T> {
    pub ch: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Real> Planes<T> {
    pub fn zeros(ch: usize, h: usize, w: usize) -> Self {
        Self {
            ch,
            h,
            w,
            data: vec![T::zero(); ch * h * w],
        }
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[T] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.h * self.w;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn from_map(map: &Map<T>) -> Self {
        Self {
            ch: 1,
            h: map.height(),
            w: map.width(),
            data: map.data().to_vec(),
        }
    }

    pub fn to_map(&self) -> Map<T> {
        debug_assert_eq!(self.ch, 1);
        Map::from_vec(self.h, self.w, self.data.clone()).expect("non-empty")
    }

    pub fn from_conn_grid(grid: &ConnGrid<T>) -> Self {
        let (h, w) = (grid.height(), grid.width());
        let mut out = Self::zeros(CHANNELS, h, w);
        for c in 0..CHANNELS {
            let plane = out.plane_mut(c);
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] = grid.get(y, x, c);
                }
            }
        }
        out
    }

    pub fn to_conn_grid(&self) -> ConnGrid<T> {
        debug_assert_eq!(self.ch, CHANNELS);
        let mut grid = ConnGrid::zeros(self.h, self.w).expect("non-empty");
        for c in 0..CHANNELS {
            let plane = self.plane(c);
            for y in 0..self.h {
                for x in 0..self.w {
                    grid.set(y, x, c, plane[y * self.w + x]);
                }
            }
        }
        grid
    }
}

#[inline]
fn mirror1(i: usize, n: usize) -> usize {
    // Index shifted by the 1-pixel pad: pad row/col p maps to source p-1,
    // reflected at both ends.
    if i == 0 {
        0
    } else if i > n {
        n - 1
    } else {
        i - 1
    }
}

/// Copy one plane into a (h+2)×(w+2) buffer with mirrored borders.
fn mirror_pad<T: Real>(src: &[T], h: usize, w: usize, dst: &mut [T]) {
    let pw = w + 2;
    for py in 0..h + 2 {
        let sy = mirror1(py, h);
        let src_row = &src[sy * w..sy * w + w];
        let dst_row = &mut dst[py * pw..py * pw + pw];
        dst_row[0] = src_row[0];
        dst_row[1..1 + w].copy_from_slice(src_row);
        dst_row[w + 1] = src_row[w - 1];
    }
}

/// Fold a padded-size gradient buffer back onto source cells (the adjoint
/// of [`mirror_pad`]).
fn mirror_unpad_accumulate<T: Real>(pad_grad: &[T], h: usize, w: usize, dst: &mut [T]) {
    let pw = w + 2;
    for py in 0..h + 2 {
        let sy = mirror1(py, h);
        let src_row = &pad_grad[py * pw..py * pw + pw];
        let dst_row = &mut dst[sy * w..sy * w + w];
        dst_row[0] += src_row[0];
        for x in 0..w {
            dst_row[x] += src_row[x + 1];
        }
        dst_row[w - 1] += src_row[w + 1];
    }
}

/// One convolution layer; weights are `[out][in][k][k]`, row-major.
#[derive(Debug, Clone)]
pub struct Conv<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv<T> {
    fn init(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, k: usize, zero: bool) -> Self {
        let fan_in = in_ch * k * k;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n = out_ch * fan_in;
        let weight = if zero {
            vec![T::zero(); n]
        } else {
            (0..n)
                .map(|_| T::from_f64_c(rng.random_range(-bound..=bound)))
                .collect()
        };
        Self {
            in_ch,
            out_ch,
            k,
            weight,
            bias: vec![T::zero(); out_ch],
        }
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> T {
        self.weight[((o * self.in_ch + i) * self.k + ky) * self.k + kx]
    }

    fn forward(&self, input: &Planes<T>) -> Planes<T> {
        debug_assert_eq!(input.ch, self.in_ch);
        let (h, w) = (input.h, input.w);
        let mut out = Planes::zeros(self.out_ch, h, w);
        if self.k == 1 {
            for o in 0..self.out_ch {
                out.plane_mut(o).fill(self.bias[o]);
                for i in 0..self.in_ch {
                    let wv = self.weight[o * self.in_ch + i];
                    let src = input.plane(i);
                    let dst = out.plane_mut(o);
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += wv * s;
                    }
                }
            }
            return out;
        }
        debug_assert_eq!(self.k, 3);
        let pw = w + 2;
        let mut pads = vec![T::zero(); self.in_ch * (h + 2) * pw];
        for i in 0..self.in_ch {
            mirror_pad(
                input.plane(i),
                h,
                w,
                &mut pads[i * (h + 2) * pw..(i + 1) * (h + 2) * pw],
            );
        }
        for o in 0..self.out_ch {
            out.plane_mut(o).fill(self.bias[o]);
            for i in 0..self.in_ch {
                let pad = &pads[i * (h + 2) * pw..(i + 1) * (h + 2) * pw];
                let dst = out.plane_mut(o);
                for ky in 0..3 {
                    // The three kx taps fused into one pass per row.
                    let w0 = self.w(o, i, ky, 0);
                    let w1 = self.w(o, i, ky, 1);
                    let w2 = self.w(o, i, ky, 2);
                    for y in 0..h {
                        let src = &pad[(y + ky) * pw..(y + ky) * pw + w + 2];
                        let dst_row = &mut dst[y * w..y * w + w];
                        for x in 0..w {
                            dst_row[x] += w0 * src[x] + w1 * src[x + 1] + w2 * src[x + 2];
                        }
                    }
                }
            }
        }
        out
    }

    /// Gradients with respect to weights, bias, and input.
    fn backward(&self, input: &Planes<T>, gout: &Planes<T>) -> (Vec<T>, Vec<T>, Planes<T>) {
        let (h, w) = (input.h, input.w);
        let mut dweight = vec![T::zero(); self.weight.len()];
        let mut dbias = vec![T::zero(); self.out_ch];
        let mut dinput = Planes::zeros(self.in_ch, h, w);

        if self.k == 1 {
            for (o, db) in dbias.iter_mut().enumerate() {
                let g = gout.plane(o);
                *db = g.iter().fold(T::zero(), |a, &b| a + b);
                for i in 0..self.in_ch {
                    let src = input.plane(i);
                    let mut acc = T::zero();
                    for (&gv, &sv) in g.iter().zip(src) {
                        acc += gv * sv;
                    }
                    dweight[o * self.in_ch + i] = acc;
                    let wv = self.weight[o * self.in_ch + i];
                    let di = dinput.plane_mut(i);
                    for (d, &gv) in di.iter_mut().zip(g) {
                        *d += wv * gv;
                    }
                }
            }
            return (dweight, dbias, dinput);
        }

        debug_assert_eq!(self.k, 3);
        let pw = w + 2;
        let pad_len = (h + 2) * pw;
        let mut pads = vec![T::zero(); self.in_ch * pad_len];
        for i in 0..self.in_ch {
            mirror_pad(input.plane(i), h, w, &mut pads[i * pad_len..(i + 1) * pad_len]);
        }

        for (o, db) in dbias.iter_mut().enumerate() {
            let g = gout.plane(o);
            *db = g.iter().fold(T::zero(), |a, &b| a + b);
            for i in 0..self.in_ch {
                let pad = &pads[i * pad_len..(i + 1) * pad_len];
                for ky in 0..3 {
                    let mut acc0 = T::zero();
                    let mut acc1 = T::zero();
                    let mut acc2 = T::zero();
                    for y in 0..h {
                        let src = &pad[(y + ky) * pw..(y + ky) * pw + w + 2];
                        let g_row = &g[y * w..y * w + w];
                        for x in 0..w {
                            acc0 += g_row[x] * src[x];
                            acc1 += g_row[x] * src[x + 1];
                            acc2 += g_row[x] * src[x + 2];
                        }
                    }
                    let base = ((o * self.in_ch + i) * 3 + ky) * 3;
                    dweight[base] = acc0;
                    dweight[base + 1] = acc1;
                    dweight[base + 2] = acc2;
                }
            }
        }

        let mut dpad = vec![T::zero(); pad_len];
        for i in 0..self.in_ch {
            dpad.fill(T::zero());
            for o in 0..self.out_ch {
                let g = gout.plane(o);
                for ky in 0..3 {
                    for kx in 0..3 {
                        let wv = self.w(o, i, ky, kx);
                        for y in 0..h {
                            let g_row = &g[y * w..y * w + w];
                            let dp_row = &mut dpad[(y + ky) * pw + kx..(y + ky) * pw + kx + w];
                            for x in 0..w {
                                dp_row[x] += wv * g_row[x];
                            }
                        }
                    }
                }
            }
            mirror_unpad_accumulate(&dpad, h, w, dinput.plane_mut(i));
        }
        (dweight, dbias, dinput)
    }
}

fn tanh_forward<T: Real>(mut z: Planes<T>) -> Planes<T> {
    for v in z.data.iter_mut() {
        *v = v.tanh();
    }
    z
}

/// dL/dz from dL/da where a = tanh(z).
fn tanh_backward<T: Real>(a: &Planes<T>, da: &Planes<T>) -> Planes<T> {
    let mut dz = da.clone();
    for (d, &av) in dz.data.iter_mut().zip(&a.data) {
        *d *= T::one() - av * av;
    }
    dz
}

fn logistic_forward<T: Real>(mut z: Planes<T>) -> Planes<T> {
    for v in z.data.iter_mut() {
        *v = T::one() / (T::one() + (-*v).exp());
    }
    z
}

fn logistic_backward<T: Real>(s: &Planes<T>, ds: &Planes<T>) -> Planes<T> {
    let mut dz = ds.clone();
    for (d, &sv) in dz.data.iter_mut().zip(&s.data) {
        *d *= sv * (T::one() - sv);
    }
    dz
}

/// Model output: connectivity grid or plain saliency map.
#[derive(Debug, Clone)]
pub enum ModelOutput<T> {
    Conn(ConnGrid<T>),
    Saliency(Map<T>),
}

impl<T: Real> ModelOutput<T> {
    pub fn into_conn(self) -> Result<ConnGrid<T>> {
        match self {
            ModelOutput::Conn(grid) => Ok(grid),
            ModelOutput::Saliency(_) => Err(Error::VariantMismatch(
                "expected a connectivity-head model",
            )),
        }
    }
}

/// Activations kept for the backward pass.
pub struct ForwardTrace<T> {
    a0: Planes<T>,
    a1: Planes<T>,
    a2: Planes<T>,
    a3: Planes<T>,
    out: Planes<T>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn output(&self) -> ModelOutput<T> {
        if self.out.ch == CHANNELS {
            ModelOutput::Conn(self.out.to_conn_grid())
        } else {
            ModelOutput::Saliency(self.out.to_map())
        }
    }
}

/// Gradient (or momentum) storage aligned with [`ToyModel::tensors`].
#[derive(Debug, Clone)]
pub struct Tensors<T>(pub Vec<Vec<T>>);

impl<T: Real> Tensors<T> {
    pub fn scale(&mut self, s: T) {
        for t in &mut self.0 {
            for v in t.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn add(&mut self, other: &Tensors<T>) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// The toy backbone plus head.
#[derive(Debug, Clone)]
pub struct ToyModel<T> {
    pub variant: HeadVariant,
    conv1: Conv<T>,
    conv2: Conv<T>,
    conv3: Conv<T>,
    head: Conv<T>,
}

impl<T: Real> ToyModel<T> {
    /// Seeded initialization: hidden layers uniform in ±1/√fan_in, head
    /// zeroed so the first forward pass outputs 0.5 everywhere.
    pub fn init(seed: u64, variant: HeadVariant) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv1 = Conv::init(&mut rng, 1, HIDDEN_CHANNELS, 3, false);
        let conv2 = Conv::init(&mut rng, HIDDEN_CHANNELS, HIDDEN_CHANNELS, 3, false);
        let conv3 = Conv::init(&mut rng, HIDDEN_CHANNELS, HIDDEN_CHANNELS, 3, false);
        let head = Conv::init(&mut rng, HIDDEN_CHANNELS, variant.out_channels(), 1, true);
        Self {
            variant,
            conv1,
            conv2,
            conv3,
            head,
        }
    }

    pub fn forward_trace(&self, image: &Map<T>) -> ForwardTrace<T> {
        let a0 = Planes::from_map(image);
        let a1 = tanh_forward(self.conv1.forward(&a0));
        let a2 = tanh_forward(self.conv2.forward(&a1));
        let a3 = tanh_forward(self.conv3.forward(&a2));
        let out = logistic_forward(self.head.forward(&a3));
        ForwardTrace { a0, a1, a2, a3, out }
    }

    pub fn forward(&self, image: &Map<T>) -> ModelOutput<T> {
        self.forward_trace(image).output()
    }

    /// Parameter gradients for one sample given dL/d(output).
    pub fn backward(&self, trace: &ForwardTrace<T>, dout: &ModelOutput<T>) -> Tensors<T> {
        let dout_planes = match dout {
            ModelOutput::Conn(grid) => Planes::from_conn_grid(grid),
            ModelOutput::Saliency(map) => Planes::from_map(map),
        };
        let dhead_z = logistic_backward(&trace.out, &dout_planes);
        let (dwh, dbh, da3) = self.head.backward(&trace.a3, &dhead_z);
        let dz3 = tanh_backward(&trace.a3, &da3);
        let (dw3, db3, da2) = self.conv3.backward(&trace.a2, &dz3);
        let dz2 = tanh_backward(&trace.a2, &da2);
        let (dw2, db2, da1) = self.conv2.backward(&trace.a1, &dz2);
        let dz1 = tanh_backward(&trace.a1, &da1);
        let (dw1, db1, _) = self.conv1.backward(&trace.a0, &dz1);
        Tensors(vec![dw1, db1, dw2, db2, dw3, db3, dwh, dbh])
    }

    pub fn tensors(&self) -> Vec<&Vec<T>> {
        vec![
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.conv3.weight,
            &self.conv3.bias,
            &self.head.weight,
            &self.head.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.conv3.weight,
            &mut self.conv3.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }

    /// Rebuild a model from serialized tensors.
    pub fn from_tensors(variant: HeadVariant, tensors: &[Vec<T>]) -> Result<Self> {
        let mut model = Self::init(0, variant);
        {
            let slots = model.tensors_mut();
            if slots.len() != tensors.len() {
                return Err(Error::Config(format!(
                    "checkpoint holds {} tensors, model needs {}",
                    tensors.len(),
                    slots.len()
                )));
            }
            for (slot, stored) in slots.into_iter().zip(tensors) {
                if slot.len() != stored.len() {
                    return Err(Error::Config(format!(
                        "tensor length {} does not match model shape {}",
                        stored.len(),
                        slot.len()
                    )));
                }
                slot.copy_from_slice(stored);
            }
        }
        Ok(model)
    }

    pub fn zeros_like(&self) -> Tensors<T> {
        Tensors(self.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect())
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn get_param(&self, flat: usize) -> T {
        let mut i = flat;
        for t in self.tensors() {
            if i < t.len() {
                return t[i];
            }
            i -= t.len();
        }
        panic!("flat parameter index out of range");
    }

    pub fn nudge_param(&mut self, flat: usize, delta: T) {
        let mut i = flat;
        for t in self.tensors_mut() {
            if i < t.len() {
                t[i] += delta;
                return;
            }
            i -= t.len();
        }
        panic!("flat parameter index out of range");
    }
}
