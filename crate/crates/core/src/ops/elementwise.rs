use alloc::format;
use alloc::vec;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::seeded;
use crate::tensor::TensorF32;

pub const BATCHNORM_EPS: f32 = 1e-5;
pub const PRELU_INIT_SLOPE: f32 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    Train,
    Infer,
}

fn check_channel_len(op: &'static str, channels: usize, name: &str, len: usize) -> Result<()> {
    if len != channels {
        return Err(invalid(format!(
            "{op}: `{name}` has {len} entries for {channels} channels"
        )));
    }
    Ok(())
}

/// Applies `f(channel, value)` to every element of an NCHW tensor.
fn per_channel(input: &TensorF32, f: impl Fn(usize, f32) -> f32) -> Result<TensorF32> {
    let [_, c, h, w] = input.nchw()?;
    let plane = h * w;
    let data = input
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| f((i / plane) % c, v))
        .collect();
    TensorF32::new(input.dims().to_vec(), data)
}

/// Inference-mode batch normalization with running statistics:
/// `gamma * (x - mean) / sqrt(var + eps) + beta`.
pub fn batchnorm_infer(
    input: &TensorF32,
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    var: &[f32],
    eps: f32,
) -> Result<TensorF32> {
    let [_, c, _, _] = input.nchw()?;
    for (name, v) in [("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)] {
        check_channel_len("batchnorm_infer", c, name, v.len())?;
    }
    if let Some(ch) = var.iter().position(|&v| !(v >= 0.0)) {
        return Err(invalid(format!("negative variance {} in channel {ch}", var[ch])));
    }
    if !(eps >= 0.0) {
        return Err(invalid("batchnorm eps must be non-negative"));
    }
    let inv_std: alloc::vec::Vec<f32> = var.iter().map(|&v| 1.0 / libm::sqrtf(v + eps)).collect();
    per_channel(input, |ch, x| gamma[ch] * (x - mean[ch]) * inv_std[ch] + beta[ch])
}

/// Parametric ReLU with one slope per channel.
pub fn prelu(input: &TensorF32, slope: &[f32]) -> Result<TensorF32> {
    let [_, c, _, _] = input.nchw()?;
    check_channel_len("prelu", c, "slope", slope.len())?;
    per_channel(input, |ch, x| if x > 0.0 { x } else { slope[ch] * x })
}

pub fn sigmoid_scalar(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::expf(-x))
    } else {
        let e = libm::expf(x);
        e / (1.0 + e)
    }
}

pub fn sigmoid(input: &TensorF32) -> TensorF32 {
    input.map(sigmoid_scalar)
}

/// Spatial dropout: in training mode each (sample, channel) plane is zeroed
/// with probability `p` and survivors are scaled by `1 / (1 - p)`.
pub fn spatial_dropout(input: &TensorF32, p: f32, mode: Mode, seed: u64) -> Result<TensorF32> {
    if !(0.0..1.0).contains(&p) {
        return Err(invalid(format!("dropout probability {p} outside [0, 1)")));
    }
    let [n, c, h, w] = input.nchw()?;
    if mode == Mode::Infer || p == 0.0 {
        return Ok(input.clone());
    }
    let mut rng = seeded(seed);
    let scale = 1.0 / (1.0 - p);
    let plane = h * w;
    let mut out = input.clone();
    for chunk in out.data_mut().chunks_exact_mut(plane).take(n * c) {
        let keep = rng.random::<f32>() >= p;
        for v in chunk.iter_mut() {
            *v = if keep { *v * scale } else { 0.0 };
        }
    }
    Ok(out)
}

/// Appends all-zero channels until the tensor has `target_channels`.
pub fn channel_zero_pad(input: &TensorF32, target_channels: usize) -> Result<TensorF32> {
    let [n, c, h, w] = input.nchw()?;
    if target_channels < c {
        return Err(invalid(format!(
            "cannot pad {c} channels down to {target_channels}"
        )));
    }
    if target_channels == c {
        return Ok(input.clone());
    }
    let plane = h * w;
    let mut data = vec![0.0f32; n * target_channels * plane];
    for b in 0..n {
        let src = &input.data()[b * c * plane..(b + 1) * c * plane];
        data[b * target_channels * plane..b * target_channels * plane + c * plane]
            .copy_from_slice(src);
    }
    TensorF32::new(vec![n, target_channels, h, w], data)
}
