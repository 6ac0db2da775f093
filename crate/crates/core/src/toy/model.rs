//! Non-autoregressive toy acoustic model.
//!
//! Per input position `l`:
//!
//! ```text
//! e_l  = E[x_l]
//! c_l  = tanh(b_c + sum_k C_k e_{l+k-1})      width-3 conv, zero padded
//! h1_l = tanh(W1 c_l + b1)
//! h2_l = tanh(W2 h1_l + b2)
//! o_l  = Wo h2_l + bo                         r frames of D values, then r stop logits
//! ```
//!
//! All arithmetic runs in f64 on an upcast copy of the f32 weights.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::{Example, FrameSeq, TokenSeq};
use crate::error::{Error, Result};
use crate::param_store::{ParamStore, Tensor};

pub const CONV_WIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub hidden: usize,
    pub frame_dim: usize,
    pub upsample: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            vocab: 16,
            hidden: 32,
            frame_dim: 8,
            upsample: 2,
        }
    }
}

impl ModelDims {
    pub fn out_dim(&self) -> usize {
        self.upsample * (self.frame_dim + 1)
    }

    fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.hidden == 0 || self.frame_dim == 0 || self.upsample == 0 {
            return Err(Error::Config(format!("invalid model dimensions {self:?}")));
        }
        Ok(())
    }

    /// Tensor names and shapes in lexicographic order (the flat layout order).
    pub fn tensor_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (k, h, o) = (self.vocab, self.hidden, self.out_dim());
        vec![
            ("conv.bias", vec![h]),
            ("conv.weight", vec![CONV_WIDTH, h, h]),
            ("embed.weight", vec![k, h]),
            ("head.bias", vec![o]),
            ("head.weight", vec![o, h]),
            ("hidden1.bias", vec![h]),
            ("hidden1.weight", vec![h, h]),
            ("hidden2.bias", vec![h]),
            ("hidden2.weight", vec![h, h]),
        ]
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Offsets {
    conv_b: usize,
    conv_w: usize,
    embed: usize,
    head_b: usize,
    head_w: usize,
    h1_b: usize,
    h1_w: usize,
    h2_b: usize,
    h2_w: usize,
    total: usize,
}

impl Offsets {
    fn new(dims: &ModelDims) -> Self {
        let mut acc = 0;
        let mut next = |shape: &[usize]| {
            let at = acc;
            acc += shape.iter().product::<usize>();
            at
        };
        let shapes = dims.tensor_shapes();
        let o = [
            next(&shapes[0].1),
            next(&shapes[1].1),
            next(&shapes[2].1),
            next(&shapes[3].1),
            next(&shapes[4].1),
            next(&shapes[5].1),
            next(&shapes[6].1),
            next(&shapes[7].1),
            next(&shapes[8].1),
        ];
        Self {
            conv_b: o[0],
            conv_w: o[1],
            embed: o[2],
            head_b: o[3],
            head_w: o[4],
            h1_b: o[5],
            h1_w: o[6],
            h2_b: o[7],
            h2_w: o[8],
            total: acc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    dims: ModelDims,
    store: ParamStore,
}

impl ToyModel {
    /// Random initialization: embeddings N(0, 1), weight matrices
    /// N(0, 1/fan_in), biases zero. Prunable = all weight matrices, with the
    /// embedding table optional.
    pub fn init(dims: ModelDims, seed: u64, prune_embedding: bool) -> Result<Self> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, shape) in dims.tensor_shapes() {
            let n: usize = shape.iter().product();
            let std = match name {
                "embed.weight" => 1.0,
                "conv.weight" => (1.0 / (CONV_WIDTH * dims.hidden) as f64).sqrt(),
                _ if name.ends_with(".weight") => (1.0 / dims.hidden as f64).sqrt(),
                _ => 0.0,
            };
            let data = if std == 0.0 {
                vec![0.0; n]
            } else {
                let normal = Normal::new(0.0, std).expect("positive std");
                (0..n).map(|_| normal.sample(&mut rng) as f32).collect()
            };
            let prunable = name.ends_with(".weight") && (prune_embedding || name != "embed.weight");
            store.insert(name, Tensor::new(shape, data)?, prunable);
        }
        Ok(Self { dims, store })
    }

    /// Wraps an existing store after checking every tensor's shape.
    pub fn from_store(dims: ModelDims, store: ParamStore) -> Result<Self> {
        dims.validate()?;
        let expected = dims.tensor_shapes();
        if store.len() != expected.len() {
            return Err(Error::Config(format!(
                "store has {} tensors, model needs {}",
                store.len(),
                expected.len()
            )));
        }
        for (name, shape) in expected {
            let t = store
                .get(name)
                .ok_or_else(|| Error::UnknownTensor(name.to_string()))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape {
                    name: name.to_string(),
                    reason: format!("expected {shape:?}, got {:?}", t.shape()),
                });
            }
        }
        Ok(Self { dims, store })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn into_store(self) -> ParamStore {
        self.store
    }

    pub fn with_store(&self, store: ParamStore) -> Result<Self> {
        Self::from_store(self.dims, store)
    }

    pub(crate) fn flat64(&self) -> Vec<f64> {
        self.store.to_flat().into_iter().map(f64::from).collect()
    }

    pub(crate) fn net<'a>(&self, weights: &'a [f64]) -> Net<'a> {
        Net::new(self.dims, weights)
    }

    pub fn forward(&self, x: &TokenSeq) -> Result<FrameSeq> {
        let w = self.flat64();
        self.net(&w).forward(x)
    }
}

/// Activations kept for the backward pass.
struct Cache {
    c: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    out: Vec<f64>,
}

pub(crate) struct Net<'a> {
    dims: ModelDims,
    off: Offsets,
    w: &'a [f64],
}

fn affine(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let n_in = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        *yo = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += W^T dy`, `dW += dy x^T`, `db += dy`.
fn affine_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: Option<&mut [f64]>,
    dx: &mut [f64],
) {
    let n_in = x.len();
    for (o, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[o * n_in..(o + 1) * n_in];
        let drow = &mut dw[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            drow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
    if let Some(db) = db {
        for (b, g) in db.iter_mut().zip(dy) {
            *b += g;
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-example loss weighting for the KD term.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Distill<'a> {
    pub weight: f64,
    pub teacher: &'a FrameSeq,
}

impl<'a> Net<'a> {
    pub(crate) fn new(dims: ModelDims, w: &'a [f64]) -> Self {
        let off = Offsets::new(&dims);
        assert_eq!(w.len(), off.total, "weight vector does not match model dims");
        Self { dims, off, w }
    }

    fn slice(&self, at: usize, len: usize) -> &'a [f64] {
        &self.w[at..at + len]
    }

    fn run(&self, x: &TokenSeq) -> Result<(Cache, usize)> {
        x.check_vocab(self.dims.vocab)?;
        let (h, o) = (self.dims.hidden, self.dims.out_dim());
        let l_len = x.len();
        let embed = self.slice(self.off.embed, self.dims.vocab * h);
        let conv_w = self.slice(self.off.conv_w, CONV_WIDTH * h * h);
        let conv_b = self.slice(self.off.conv_b, h);

        let mut c = vec![0.0; l_len * h];
        for l in 0..l_len {
            let cl = &mut c[l * h..(l + 1) * h];
            cl.copy_from_slice(conv_b);
            for k in 0..CONV_WIDTH {
                let Some(src) = (l + k).checked_sub(1).filter(|&s| s < l_len) else {
                    continue;
                };
                let e = &embed[x.0[src] * h..(x.0[src] + 1) * h];
                let wk = &conv_w[k * h * h..(k + 1) * h * h];
                for (oi, v) in cl.iter_mut().enumerate() {
                    *v += wk[oi * h..(oi + 1) * h]
                        .iter()
                        .zip(e)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                }
            }
            cl.iter_mut().for_each(|v| *v = v.tanh());
        }

        let w1 = self.slice(self.off.h1_w, h * h);
        let b1 = self.slice(self.off.h1_b, h);
        let w2 = self.slice(self.off.h2_w, h * h);
        let b2 = self.slice(self.off.h2_b, h);
        let wo = self.slice(self.off.head_w, o * h);
        let bo = self.slice(self.off.head_b, o);
        let mut h1 = vec![0.0; l_len * h];
        let mut h2 = vec![0.0; l_len * h];
        let mut out = vec![0.0; l_len * o];
        for l in 0..l_len {
            let h1l = &mut h1[l * h..(l + 1) * h];
            affine(w1, b1, &c[l * h..(l + 1) * h], h1l);
            h1l.iter_mut().for_each(|v| *v = v.tanh());
            let h2l = &mut h2[l * h..(l + 1) * h];
            affine(w2, b2, &h1[l * h..(l + 1) * h], h2l);
            h2l.iter_mut().for_each(|v| *v = v.tanh());
            affine(wo, bo, &h2[l * h..(l + 1) * h], &mut out[l * o..(l + 1) * o]);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCompute("forward pass"));
        }
        Ok((Cache { c, h1, h2, out }, l_len))
    }

    fn frames_from(&self, out: &[f64], l_len: usize) -> FrameSeq {
        let (r, d, o) = (self.dims.upsample, self.dims.frame_dim, self.dims.out_dim());
        let mut frames = Vec::with_capacity(l_len * r * d);
        let mut stop = Vec::with_capacity(l_len * r);
        for l in 0..l_len {
            let ol = &out[l * o..(l + 1) * o];
            frames.extend_from_slice(&ol[..r * d]);
            stop.extend_from_slice(&ol[r * d..]);
        }
        FrameSeq {
            frame_dim: d,
            frames,
            stop,
        }
    }

    pub(crate) fn forward(&self, x: &TokenSeq) -> Result<FrameSeq> {
        let (cache, l_len) = self.run(x)?;
        Ok(self.frames_from(&cache.out, l_len))
    }

    /// Adds the gradient of one example's loss, scaled by `scale`, into `grad`
    /// and returns the unscaled loss.
    pub(crate) fn accumulate(
        &self,
        ex: &Example,
        distill: Option<Distill<'_>>,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let (cache, l_len) = self.run(&ex.tokens)?;
        let pred = self.frames_from(&cache.out, l_len);
        if !pred.same_shape(&ex.target) {
            return Err(Error::Shape {
                name: "target".into(),
                reason: format!(
                    "prediction has {} frames, target has {}",
                    pred.num_frames(),
                    ex.target.num_frames()
                ),
            });
        }
        let (h, o, r, d) = (
            self.dims.hidden,
            self.dims.out_dim(),
            self.dims.upsample,
            self.dims.frame_dim,
        );
        let t_len = pred.num_frames();
        let n_frame_vals = (t_len * d) as f64;

        let mut loss = loss(&pred, &ex.target)?;
        let mut d_frames: Vec<f64> = pred
            .frames
            .iter()
            .zip(&ex.target.frames)
            .map(|(p, t)| 2.0 * (p - t) / n_frame_vals)
            .collect();
        if let Some(kd) = distill {
            if kd.weight != 0.0 {
                if kd.teacher.frames.len() != pred.frames.len() {
                    return Err(Error::Shape {
                        name: "teacher".into(),
                        reason: "teacher frames differ in shape from prediction".into(),
                    });
                }
                loss += kd.weight * mse(&pred.frames, &kd.teacher.frames);
                for ((g, p), t) in d_frames.iter_mut().zip(&pred.frames).zip(&kd.teacher.frames) {
                    *g += kd.weight * 2.0 * (p - t) / n_frame_vals;
                }
            }
        }
        let d_stop: Vec<f64> = pred
            .stop
            .iter()
            .zip(&ex.target.stop)
            .map(|(z, y)| (sigmoid(*z) - y) / t_len as f64)
            .collect();

        let mut d_out = vec![0.0; l_len * o];
        for l in 0..l_len {
            let dl = &mut d_out[l * o..(l + 1) * o];
            dl[..r * d].copy_from_slice(&d_frames[l * r * d..(l + 1) * r * d]);
            dl[r * d..].copy_from_slice(&d_stop[l * r..(l + 1) * r]);
            dl.iter_mut().for_each(|v| *v *= scale);
        }

        let off = self.off;
        let (g_before_h1b, rest) = grad.split_at_mut(off.h1_b);
        let (g_h1b, rest) = rest.split_at_mut(h);
        let (g_h1w, rest) = rest.split_at_mut(h * h);
        let (g_h2b, g_h2w) = rest.split_at_mut(h);
        let (g_before_headb, rest) = g_before_h1b.split_at_mut(off.head_b);
        let (g_headb, g_headw) = rest.split_at_mut(o);
        let (g_convb, rest) = g_before_headb.split_at_mut(h);
        let (g_convw, g_embed) = rest.split_at_mut(CONV_WIDTH * h * h);

        let w1 = self.slice(off.h1_w, h * h);
        let w2 = self.slice(off.h2_w, h * h);
        let wo = self.slice(off.head_w, o * h);
        let conv_w = self.slice(off.conv_w, CONV_WIDTH * h * h);
        let embed = self.slice(off.embed, self.dims.vocab * h);

        let mut d_conv_act = vec![0.0; l_len * h];
        let mut dh2 = vec![0.0; h];
        let mut dh1 = vec![0.0; h];
        for l in 0..l_len {
            let h2l = &cache.h2[l * h..(l + 1) * h];
            let h1l = &cache.h1[l * h..(l + 1) * h];
            let cl = &cache.c[l * h..(l + 1) * h];

            dh2.iter_mut().for_each(|v| *v = 0.0);
            affine_backward(wo, h2l, &d_out[l * o..(l + 1) * o], g_headw, Some(&mut *g_headb), &mut dh2);
            for (g, a) in dh2.iter_mut().zip(h2l) {
                *g *= 1.0 - a * a;
            }
            dh1.iter_mut().for_each(|v| *v = 0.0);
            affine_backward(w2, h1l, &dh2, g_h2w, Some(&mut *g_h2b), &mut dh1);
            for (g, a) in dh1.iter_mut().zip(h1l) {
                *g *= 1.0 - a * a;
            }
            let dc = &mut d_conv_act[l * h..(l + 1) * h];
            affine_backward(w1, cl, &dh1, g_h1w, Some(&mut *g_h1b), dc);
            for (g, a) in dc.iter_mut().zip(cl) {
                *g *= 1.0 - a * a;
            }
        }

        let mut de = vec![0.0; h];
        for l in 0..l_len {
            let dcl = &d_conv_act[l * h..(l + 1) * h];
            for (b, g) in g_convb.iter_mut().zip(dcl) {
                *b += g;
            }
            for k in 0..CONV_WIDTH {
                let Some(src) = (l + k).checked_sub(1).filter(|&s| s < l_len) else {
                    continue;
                };
                let tok = ex.tokens.0[src];
                let e = &embed[tok * h..(tok + 1) * h];
                de.iter_mut().for_each(|v| *v = 0.0);
                affine_backward(
                    &conv_w[k * h * h..(k + 1) * h * h],
                    e,
                    dcl,
                    &mut g_convw[k * h * h..(k + 1) * h * h],
                    None,
                    &mut de,
                );
                for (ge, g) in g_embed[tok * h..(tok + 1) * h].iter_mut().zip(&de) {
                    *ge += g;
                }
            }
        }
        Ok(loss)
    }

    /// Mean loss over `batch` and its gradient (same layout as the weights).
    pub(crate) fn batch_gradient(
        &self,
        batch: &[&Example],
        teacher: Option<(f64, &[&FrameSeq])>,
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Empty("gradient batch"));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.off.total];
        let mut total = 0.0;
        for (i, ex) in batch.iter().enumerate() {
            let distill = teacher.map(|(weight, frames)| Distill {
                weight,
                teacher: frames[i],
            });
            total += self.accumulate(ex, distill, scale, &mut grad)?;
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteCompute("backward pass"));
        }
        Ok((total * scale, grad))
    }

    pub(crate) fn mean_loss(&self, examples: &[Example]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Empty("loss evaluation set"));
        }
        let mut total = 0.0;
        for ex in examples {
            total += loss(&self.forward(&ex.tokens)?, &ex.target)?;
        }
        Ok(total / examples.len() as f64)
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Mean squared frame error plus mean binary cross-entropy of the stop logits
/// against 0/1 stop targets.
pub fn loss(pred: &FrameSeq, target: &FrameSeq) -> Result<f64> {
    if !pred.same_shape(target) || pred.stop.is_empty() {
        return Err(Error::Shape {
            name: "frames".into(),
            reason: format!(
                "prediction {}x{} vs target {}x{}",
                pred.num_frames(),
                pred.frame_dim,
                target.num_frames(),
                target.frame_dim
            ),
        });
    }
    let bce = pred
        .stop
        .iter()
        .zip(&target.stop)
        .map(|(z, y)| softplus(*z) - y * z)
        .sum::<f64>()
        / pred.stop.len() as f64;
    Ok(mse(&pred.frames, &target.frames) + bce)
}

/// Gradient of the mean batch loss w.r.t. every parameter, keyed by tensor name.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub tensors: BTreeMap<String, Vec<f64>>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.tensors
            .values()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

pub fn gradients(model: &ToyModel, batch: &[Example]) -> Result<Gradients> {
    let w = model.flat64();
    let refs: Vec<&Example> = batch.iter().collect();
    let (loss, flat) = model.net(&w).batch_gradient(&refs, None)?;
    let tensors = model
        .store()
        .layout()
        .into_iter()
        .map(|(name, at, len)| (name, flat[at..at + len].to_vec()))
        .collect();
    Ok(Gradients { loss, tensors })
}

/// Mean loss of `model` over `examples`.
pub fn dataset_loss(model: &ToyModel, examples: &[Example]) -> Result<f64> {
    let w = model.flat64();
    model.net(&w).mean_loss(examples)
}

/// Mean loss over `examples` with `model`'s architecture evaluated at
/// full-precision `weights` (flat, in [`ParamStore::layout`] order).
pub fn loss_at(model: &ToyModel, weights: &[f64], examples: &[Example]) -> Result<f64> {
    if weights.len() != model.store().total_len() {
        return Err(Error::LengthMismatch(format!(
            "{} weights for a model with {}",
            weights.len(),
            model.store().total_len()
        )));
    }
    model.net(weights).mean_loss(examples)
}
