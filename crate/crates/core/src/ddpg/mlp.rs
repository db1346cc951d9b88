// SPDX-License-Identifier: Apache-2.0

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gemm::{gemm_acc, transpose_into};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Tanh,
    Linear,
}

/// Output-layer weights and biases start in `[-OUTPUT_INIT, OUTPUT_INIT]`.
pub const OUTPUT_INIT: f64 = 3e-3;

/// `exp(z) - 1` for `z <= 0` without branches, so the ELU loop vectorizes.
/// Arguments below -40 are clamped, where the result is -1 in `f64`.
fn expm1_nonpos(z: f64) -> f64 {
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    let z = z.clamp(-40.0, 0.0);
    let t = z * core::f64::consts::LOG2_E + MAGIC;
    let kf = t - MAGIC;
    let k = t.to_bits().wrapping_sub(MAGIC.to_bits());
    let r = (z - kf * LN2_HI) - kf * LN2_LO;
    // exp(r) - 1 on |r| <= ln2 / 2 by Taylor series to r^13
    let mut q = 1.0 / 6_227_020_800.0;
    for d in [479_001_600.0, 39_916_800.0, 3_628_800.0, 362_880.0, 40_320.0, 5_040.0, 720.0, 120.0, 24.0, 6.0, 2.0, 1.0] {
        q = q * r + 1.0 / d;
    }
    q *= r;
    let scale = f64::from_bits(k.wrapping_add(1023) << 52);
    scale * q + (scale - 1.0)
}

fn elu(z: f64) -> f64 {
    let e = expm1_nonpos(z);
    if z > 0.0 {
        z
    } else {
        e
    }
}

/// Dense feed-forward network with ELU hidden units.
///
/// All parameters live in one flat vector. Layer `l` stores its weights as
/// `sizes[l]` rows of `sizes[l + 1]` entries (input-major), followed by its
/// biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    params: Vec<f64>,
}

/// Per-layer activations of the last batched forward pass plus scratch for
/// the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    batch: usize,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    transposed: Vec<f64>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], Vec::as_slice)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument("network needs an input and an output layer of nonzero width".into()));
        }
        Ok(Self { sizes: sizes.to_vec(), output, params: vec![0.0; param_count(sizes)] })
    }

    /// Hidden layers uniform in `±1/sqrt(fan_in)`, output layer in
    /// `±OUTPUT_INIT`.
    pub fn init(sizes: &[usize], output: OutputActivation, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        let layers = net.layers();
        let mut at = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = if l + 1 == layers { OUTPUT_INIT } else { 1.0 / libm::sqrt(fan_in as f64) };
            for p in &mut net.params[at..at + fan_in * fan_out + fan_out] {
                *p = rng.random_range(-bound..=bound);
            }
            at += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// Builds a network from an existing flat parameter vector.
    pub fn from_params(sizes: &[usize], output: OutputActivation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension { expected: net.params.len(), got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Weights and biases of layer `l`.
    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let at: usize = param_count(&self.sizes[..=l]);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[at..at + i * o];
        (w, &self.params[at + i * o..at + i * o + o])
    }

    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.sizes[..=l])
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cache = Cache::default();
        self.forward_batch(x, 1, &mut cache)?;
        Ok(cache.output().to_vec())
    }

    /// Forward pass over `batch` row-major samples in `x`; the output rows
    /// are available from `cache.output()`.
    pub fn forward_batch(&self, x: &[f64], batch: usize, cache: &mut Cache) -> Result<()> {
        let n0 = self.sizes[0];
        if x.len() != batch * n0 {
            return Err(Error::Dimension { expected: batch * n0, got: x.len() });
        }
        let layers = self.layers();
        cache.batch = batch;
        cache.acts.resize_with(layers + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        for l in 0..layers {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let (w, bias) = self.layer(l);
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            out.clear();
            for _ in 0..batch {
                out.extend_from_slice(bias);
            }
            gemm_acc(out, input, w, batch, i, o);
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = elu(*v));
            } else if self.output == OutputActivation::Tanh {
                out.iter_mut().for_each(|v| *v = libm::tanh(*v));
            }
        }
        Ok(())
    }

    /// Reverse pass through the activations held in `cache`.
    ///
    /// `upstream` is the loss gradient with respect to the outputs. Parameter
    /// gradients are accumulated into `grads` when given; the input gradient
    /// is written to `input_grad` when given.
    pub fn backward_batch(
        &self,
        cache: &mut Cache,
        upstream: &[f64],
        mut grads: Option<&mut [f64]>,
        input_grad: Option<&mut [f64]>,
    ) -> Result<()> {
        let batch = cache.batch;
        let layers = self.layers();
        if cache.acts.len() != layers + 1 {
            return Err(Error::InvalidArgument("backward pass without a cached forward pass".into()));
        }
        let out_w = self.output_width();
        if upstream.len() != batch * out_w {
            return Err(Error::Dimension { expected: batch * out_w, got: upstream.len() });
        }
        if let Some(g) = grads.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::Dimension { expected: self.params.len(), got: g.len() });
            }
        }
        if let Some(g) = input_grad.as_deref() {
            if g.len() != batch * self.sizes[0] {
                return Err(Error::Dimension { expected: batch * self.sizes[0], got: g.len() });
            }
        }

        let Cache { acts, delta, delta_prev, transposed, .. } = cache;
        delta.clear();
        match self.output {
            OutputActivation::Linear => delta.extend_from_slice(upstream),
            OutputActivation::Tanh => delta.extend(upstream.iter().zip(&acts[layers]).map(|(&g, &a)| g * (1.0 - a * a))),
        }
        let need_input = input_grad.is_some();
        for l in (0..layers).rev() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            if let Some(g) = grads.as_deref_mut() {
                let at = self.layer_offset(l);
                let (gw, gb) = g[at..at + i * o + o].split_at_mut(i * o);
                transpose_into(input, batch, i, transposed);
                gemm_acc(gw, transposed, delta, i, batch, o);
                for d in delta.chunks_exact(o) {
                    for (gbj, &dj) in gb.iter_mut().zip(d) {
                        *gbj += dj;
                    }
                }
            }
            if l == 0 && !need_input {
                break;
            }
            let (w, _) = self.layer(l);
            transpose_into(w, i, o, transposed);
            delta_prev.clear();
            delta_prev.resize(batch * i, 0.0);
            gemm_acc(delta_prev, delta, transposed, batch, o, i);
            if l > 0 {
                // ELU'(z) = 1 for z > 0, exp(z) = a + 1 otherwise
                for (dp, &a) in delta_prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *dp *= a + 1.0;
                    }
                }
            }
            core::mem::swap(delta, delta_prev);
        }
        if let Some(g) = input_grad {
            g.copy_from_slice(delta);
        }
        Ok(())
    }

    /// Parameter and input gradients of `upstream · f(x)` for one sample.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut cache = Cache::default();
        self.forward_batch(x, 1, &mut cache)?;
        let mut grads = vec![0.0; self.params.len()];
        let mut dx = vec![0.0; self.sizes[0]];
        self.backward_batch(&mut cache, upstream, Some(&mut grads), Some(&mut dx))?;
        Ok((grads, dx))
    }
}

/// `target <- tau * source + (1 - tau) * target`, parameter by parameter.
pub fn polyak_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<()> {
    if target.sizes != source.sizes {
        return Err(Error::InvalidArgument("polyak update between differently shaped networks".into()));
    }
    for (t, &s) in target.params.iter_mut().zip(&source.params) {
        *t = tau * s + (1.0 - tau) * *t;
    }
    Ok(())
}
