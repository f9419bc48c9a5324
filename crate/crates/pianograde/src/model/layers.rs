//! Seeded building blocks for the network. All parameters are created from an
//! explicit ChaCha stream so construction is reproducible bit-for-bit.

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Creates named parameters and remembers them for checkpointing / the
/// optimizer. Buffers (batch-norm running stats) are named but not trained.
pub(crate) struct ParamBuilder {
    rng: ChaCha8Rng,
    device: Device,
    entries: Vec<ParamEntry>,
}

pub(crate) struct ParamEntry {
    pub name: String,
    pub var: Var,
    pub trainable: bool,
}

impl ParamBuilder {
    pub fn new(seed: u64) -> Self {
        ParamBuilder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            device: Device::Cpu,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, var: Var, trainable: bool) -> Var {
        self.entries.push(ParamEntry {
            name: name.to_string(),
            var: var.clone(),
            trainable,
        });
        var
    }

    /// Uniform init in ±1/sqrt(fan_in).
    pub fn uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<Var> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n)
            .map(|_| self.rng.gen_range(-bound..bound) as f32)
            .collect();
        let t = Tensor::from_vec(data, shape, &self.device)?;
        Ok(self.push(name, Var::from_tensor(&t)?, true))
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f32) -> Result<Var> {
        let t = Tensor::full(value, shape, &self.device)?;
        Ok(self.push(name, Var::from_tensor(&t)?, true))
    }

    pub fn buffer(&mut self, name: &str, shape: &[usize], value: f32) -> Result<Var> {
        let t = Tensor::full(value, shape, &self.device)?;
        Ok(self.push(name, Var::from_tensor(&t)?, false))
    }

    pub fn into_entries(self) -> Vec<ParamEntry> {
        self.entries
    }
}

pub(crate) struct Conv2d {
    weight: Var,
    bias: Var,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        pb: &mut ParamBuilder,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        padding: usize,
    ) -> Result<Self> {
        let fan_in = in_ch * kernel * kernel;
        Ok(Conv2d {
            weight: pb.uniform(&format!("{name}.weight"), &[out_ch, in_ch, kernel, kernel], fan_in)?,
            bias: pb.uniform(&format!("{name}.bias"), &[out_ch], fan_in)?,
            padding,
        })
    }

    /// Stride-1 convolution, spelled as im2col plus one matmul. The builtin
    /// CPU conv2d kernel is an order of magnitude slower than gemm on the
    /// backward pass, which dominates training time on this architecture.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (c_out, c_in, kh, kw) = self.weight.dims4()?;
        let (b, _, h, w) = x.dims4()?;
        let p = self.padding;
        let padded = if p > 0 {
            x.pad_with_zeros(2, p, p)?.pad_with_zeros(3, p, p)?
        } else {
            x.clone()
        };
        let oh = h + 2 * p - kh + 1;
        let ow = w + 2 * p - kw + 1;

        let col = if kh == 1 && kw == 1 {
            padded.reshape((b, c_in, oh * ow))?
        } else {
            let mut taps = Vec::with_capacity(kh * kw);
            for di in 0..kh {
                for dj in 0..kw {
                    taps.push(padded.narrow(2, di, oh)?.narrow(3, dj, ow)?);
                }
            }
            Tensor::cat(&taps, 1)?.reshape((b, kh * kw * c_in, oh * ow))?
        };
        // Match the (tap, channel) row order of `col`.
        let wmat = self
            .weight
            .permute((2, 3, 1, 0))?
            .contiguous()?
            .reshape((kh * kw * c_in, c_out))?
            .t()?
            .unsqueeze(0)?;
        let y = wmat.broadcast_matmul(&col)?.reshape((b, c_out, oh, ow))?;
        Ok(y.broadcast_add(&self.bias.reshape((1, c_out, 1, 1))?)?)
    }
}

/// Batch normalization over (batch, height, width) per channel, with running
/// statistics for inference. Written out manually so training statistics stay
/// in the autodiff graph while the running buffers are updated detached.
pub(crate) struct BatchNorm {
    gamma: Var,
    beta: Var,
    running_mean: Var,
    running_var: Var,
    momentum: f64,
    eps: f64,
}

impl BatchNorm {
    pub fn new(pb: &mut ParamBuilder, name: &str, channels: usize) -> Result<Self> {
        Ok(BatchNorm {
            gamma: pb.constant(&format!("{name}.gamma"), &[channels], 1.0)?,
            beta: pb.constant(&format!("{name}.beta"), &[channels], 0.0)?,
            running_mean: pb.buffer(&format!("{name}.running_mean"), &[channels], 0.0)?,
            running_var: pb.buffer(&format!("{name}.running_var"), &[channels], 1.0)?,
            momentum: 0.1,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let c = self.gamma.dims1()?;
        let shape = (1, c, 1, 1);
        let (mean, var) = if train {
            let mean = x.mean_keepdim((0, 2, 3))?;
            let var = x.broadcast_sub(&mean)?.sqr()?.mean_keepdim((0, 2, 3))?;
            let update = |run: &Var, batch: &Tensor| -> Result<()> {
                let new = ((run.as_tensor() * (1.0 - self.momentum))?
                    + (batch.detach().reshape(c)? * self.momentum)?)?;
                run.set(&new)?;
                Ok(())
            };
            update(&self.running_mean, &mean)?;
            update(&self.running_var, &var)?;
            (mean, var)
        } else {
            (
                self.running_mean.as_tensor().reshape(shape)?,
                self.running_var.as_tensor().reshape(shape)?,
            )
        };
        let norm = x
            .broadcast_sub(&mean.reshape(shape)?)?
            .broadcast_div(&(var.reshape(shape)? + self.eps)?.sqrt()?)?;
        Ok(norm
            .broadcast_mul(&self.gamma.reshape(shape)?)?
            .broadcast_add(&self.beta.reshape(shape)?)?)
    }
}

pub(crate) struct Linear {
    weight: Var,
    bias: Var,
}

impl Linear {
    pub fn new(pb: &mut ParamBuilder, name: &str, in_dim: usize, out_dim: usize) -> Result<Self> {
        Ok(Linear {
            weight: pb.uniform(&format!("{name}.weight"), &[out_dim, in_dim], in_dim)?,
            bias: pb.uniform(&format!("{name}.bias"), &[out_dim], in_dim)?,
        })
    }

    /// Applies to the last dimension of a rank-2 or rank-3 input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let in_dim = *dims.last().unwrap();
        let rows: usize = dims[..dims.len() - 1].iter().product();
        let flat = x.reshape((rows, in_dim))?;
        let y = flat
            .matmul(&self.weight.t()?)?
            .broadcast_add(self.bias.as_tensor())?;
        let out_dim = self.bias.dims1()?;
        let mut out_shape = dims;
        *out_shape.last_mut().unwrap() = out_dim;
        Ok(y.reshape(out_shape)?)
    }
}

/// One direction of a gated recurrent layer.
pub(crate) struct GruDirection {
    w_ih: Var,
    w_hh: Var,
    b_ih: Var,
    b_hh: Var,
    hidden: usize,
}

impl GruDirection {
    pub fn new(pb: &mut ParamBuilder, name: &str, in_dim: usize, hidden: usize) -> Result<Self> {
        Ok(GruDirection {
            w_ih: pb.uniform(&format!("{name}.w_ih"), &[3 * hidden, in_dim], in_dim)?,
            w_hh: pb.uniform(&format!("{name}.w_hh"), &[3 * hidden, hidden], hidden)?,
            b_ih: pb.uniform(&format!("{name}.b_ih"), &[3 * hidden], in_dim)?,
            b_hh: pb.uniform(&format!("{name}.b_hh"), &[3 * hidden], hidden)?,
            hidden,
        })
    }

    /// `x` is (batch, time, in), `mask` is (batch, time, 1) with 1 on valid
    /// frames. The state is gated by the mask so padded frames neither update
    /// the state nor emit one, making outputs independent of padding length.
    /// `reverse` walks time back to front.
    pub fn forward(&self, x: &Tensor, mask: &Tensor, reverse: bool) -> Result<Tensor> {
        let (b, t, _in) = x.dims3()?;
        let h3 = 3 * self.hidden;
        let x_proj = Linear {
            weight: self.w_ih.clone(),
            bias: self.b_ih.clone(),
        }
        .forward(x)?; // (b, t, 3h)

        let mut h = Tensor::zeros((b, self.hidden), DType::F32, x.device())?;
        let mut outs: Vec<Tensor> = vec![Tensor::zeros(0, DType::F32, x.device())?; t];
        let order: Vec<usize> = if reverse { (0..t).rev().collect() } else { (0..t).collect() };
        for step in order {
            let xp = x_proj.narrow(1, step, 1)?.reshape((b, h3))?;
            let hp = h
                .matmul(&self.w_hh.t()?)?
                .broadcast_add(self.b_hh.as_tensor())?;
            let gate = |t: &Tensor, i: usize| t.narrow(1, i * self.hidden, self.hidden);
            let r = candle_nn::ops::sigmoid(&(gate(&xp, 0)? + gate(&hp, 0)?)?)?;
            let z = candle_nn::ops::sigmoid(&(gate(&xp, 1)? + gate(&hp, 1)?)?)?;
            let n = ((gate(&xp, 2)? + (r * gate(&hp, 2)?)?)?).tanh()?;
            let h_new = ((&z * &h)? + ((z.affine(-1.0, 1.0)?) * n)?)?;
            let m = mask.narrow(1, step, 1)?.reshape((b, 1))?;
            h = (h_new.broadcast_mul(&m)? + h.broadcast_mul(&m.affine(-1.0, 1.0)?)?)?;
            outs[step] = h.broadcast_mul(&m)?;
        }
        Ok(Tensor::stack(&outs, 1)?) // (b, t, hidden)
    }
}

/// Stacked bidirectional recurrence; output width is 2 × hidden.
pub(crate) struct BiGru {
    layers: Vec<(GruDirection, GruDirection)>,
}

impl BiGru {
    pub fn new(
        pb: &mut ParamBuilder,
        name: &str,
        in_dim: usize,
        hidden: usize,
        num_layers: usize,
    ) -> Result<Self> {
        let mut layers = Vec::new();
        for l in 0..num_layers {
            let d = if l == 0 { in_dim } else { 2 * hidden };
            layers.push((
                GruDirection::new(pb, &format!("{name}.l{l}.fwd"), d, hidden)?,
                GruDirection::new(pb, &format!("{name}.l{l}.bwd"), d, hidden)?,
            ));
        }
        Ok(BiGru { layers })
    }

    pub fn forward(&self, x: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let mut z = x.clone();
        for (fwd, bwd) in &self.layers {
            let f = fwd.forward(&z, mask, false)?;
            let b = bwd.forward(&z, mask, true)?;
            z = Tensor::cat(&[&f, &b], 2)?;
        }
        Ok(z)
    }
}

/// Multi-head attention against learned context vectors. Each head scores its
/// slice of the sequence by dot product with its context vector, normalizes
/// over time with a masked softmax, and emits the weighted sum. Contexts start
/// at zero, so an untrained summary is the plain time-mean of the sequence.
pub(crate) struct ContextAttention {
    contexts: Var, // (heads, head_dim)
    heads: usize,
    head_dim: usize,
}

impl ContextAttention {
    pub fn new(pb: &mut ParamBuilder, name: &str, dim: usize, heads: usize) -> Result<Self> {
        Ok(ContextAttention {
            contexts: pb.constant(&format!("{name}.contexts"), &[heads, dim / heads], 0.0)?,
            heads,
            head_dim: dim / heads,
        })
    }

    /// `z` is (batch, time, dim), `mask` (batch, time, 1). Returns the summary
    /// (batch, dim) and the attention weights (batch, heads, time).
    pub fn forward(&self, z: &Tensor, mask: &Tensor) -> Result<(Tensor, Tensor)> {
        let (b, t, _) = z.dims3()?;
        let neg = mask.reshape((b, t))?.affine(1e9, -1e9)?; // 0 on valid, -1e9 on pad
        let mut summaries = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let zh = z.narrow(2, h * self.head_dim, self.head_dim)?; // (b, t, d)
            let ch = self.contexts.narrow(0, h, 1)?.reshape((self.head_dim, 1))?;
            let scores = zh
                .reshape((b * t, self.head_dim))?
                .matmul(&ch)?
                .reshape((b, t))?;
            let w = candle_nn::ops::softmax(&(scores + &neg)?, 1)?; // (b, t)
            let r = zh.broadcast_mul(&w.reshape((b, t, 1))?)?.sum(1)?; // (b, d)
            summaries.push(r);
            weights.push(w);
        }
        Ok((
            Tensor::cat(&summaries, 1)?,
            Tensor::stack(&weights, 1)?,
        ))
    }
}

/// Inverted dropout with a mask drawn from the caller's seeded stream.
pub(crate) fn dropout(x: &Tensor, rate: f64, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    if rate <= 0.0 {
        return Ok(x.clone());
    }
    let n = x.elem_count();
    let keep = 1.0 - rate;
    let data: Vec<f32> = (0..n)
        .map(|_| if rng.gen_bool(keep) { (1.0 / keep) as f32 } else { 0.0 })
        .collect();
    let mask = Tensor::from_vec(data, x.shape(), x.device())?;
    Ok((x * mask)?)
}
