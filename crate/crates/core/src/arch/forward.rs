use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::spec::{ArchSpec, ConvGeom, HeadKind, LayerKind, LayerSpec, Variant};
use super::weights::WeightStore;
use crate::error::{invalid, Result};
use crate::ops::{
    batchnorm_infer, channel_zero_pad, conv2d, max_unpool2x2, maxpool2x2_with_indices, prelu,
    spatial_dropout, transposed_conv2d, ConvParams, Mode, PoolIndices, BATCHNORM_EPS,
};
use crate::rng::derive_seed;
use crate::tensor::TensorF32;

/// Raw head outputs plus the dims every layer actually produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `(N, 1, H/4, W/4)` segmentation logits (no sigmoid applied).
    pub seg_logits: TensorF32,
    /// `(N, 1, H/4, W/4)` horizontal field x-component.
    pub haf: TensorF32,
    /// `(N, 2, H/4, W/4)` vertical field.
    pub vaf: TensorF32,
    /// `(qualified layer name, [C, H, W])` in execution order.
    pub layer_dims: Vec<(String, [usize; 3])>,
}

struct Runner<'a> {
    spec: &'a ArchSpec,
    w: &'a WeightStore,
    mode: Mode,
    seed: u64,
    step: u64,
    indices: BTreeMap<u8, PoolIndices>,
    layer_dims: Vec<(String, [usize; 3])>,
}

/// Runs ENet-21 on an `(N, 3, H, W)` image batch.
///
/// Downsampling bottlenecks keep their pooling indices for the matching
/// upsampling bottleneck. In [`Mode::Train`] spatial dropout follows every
/// bottleneck, seeded from `seed` and the layer's position.
pub fn forward(
    spec: &ArchSpec,
    w: &WeightStore,
    image: &TensorF32,
    mode: Mode,
    seed: u64,
) -> Result<ForwardOutput> {
    spec.validate()?;
    w.validate(spec)?;
    let [_, c, h, wd] = image.nchw()?;
    if c != spec.layers[0].in_channels || h % 8 != 0 || wd % 8 != 0 {
        return Err(invalid(format!(
            "image dims {:?} need 3 channels and sides divisible by 8",
            image.dims()
        )));
    }
    let mut run = Runner {
        spec,
        w,
        mode,
        seed,
        step: 0,
        indices: BTreeMap::new(),
        layer_dims: Vec::new(),
    };
    let mut x = image.clone();
    for l in &spec.layers {
        x = run.layer(l, &l.name, &x)?;
    }
    let mut outputs: BTreeMap<HeadKind, TensorF32> = BTreeMap::new();
    if spec.shared_heads {
        let mut hx = x;
        for l in spec.heads[0].layers.iter().filter(|l| l.kind == LayerKind::Bottleneck) {
            hx = run.layer(l, &spec.head_layer_name(HeadKind::Seg, l), &hx)?;
        }
        for head in &spec.heads {
            let last = head.layers.last().expect("head has layers");
            let y = run.layer(last, &spec.head_layer_name(head.kind, last), &hx)?;
            outputs.insert(head.kind, y);
        }
    } else {
        for head in &spec.heads {
            let mut hx = x.clone();
            for l in &head.layers {
                hx = run.layer(l, &spec.head_layer_name(head.kind, l), &hx)?;
            }
            outputs.insert(head.kind, hx);
        }
    }
    let mut take = |k| outputs.remove(&k).ok_or_else(|| invalid("head missing from spec"));
    Ok(ForwardOutput {
        seg_logits: take(HeadKind::Seg)?,
        haf: take(HeadKind::Haf)?,
        vaf: take(HeadKind::Vaf)?,
        layer_dims: run.layer_dims,
    })
}

impl Runner<'_> {
    fn layer(&mut self, l: &LayerSpec, name: &str, x: &TensorF32) -> Result<TensorF32> {
        let y = match l.kind {
            LayerKind::Initial => self.initial(l, name, x)?,
            LayerKind::Conv1x1 => {
                let (_, g) = self.spec.convs(l)[0];
                self.conv(name, &g, x)?
            }
            LayerKind::Bottleneck => {
                let y = self.bottleneck(l, name, x)?;
                self.step += 1;
                spatial_dropout(&y, self.spec.dropout, self.mode, derive_seed(self.seed, self.step))?
            }
        };
        let [_, c, h, w] = y.nchw()?;
        self.layer_dims.push((name.into(), [c, h, w]));
        Ok(y)
    }

    fn conv(&self, slot: &str, g: &ConvGeom, x: &TensorF32) -> Result<TensorF32> {
        let kernel = self.w.require(&format!("{slot}.weight"), &g.kernel_dims())?.clone();
        let p = ConvParams::new(kernel)
            .stride(g.stride)
            .padding(g.padding)
            .dilation(g.dilation)
            .output_padding(g.output_padding);
        if g.transposed {
            transposed_conv2d(x, &p)
        } else {
            conv2d(x, &p)
        }
    }

    fn bn(&self, prefix: &str, x: &TensorF32) -> Result<TensorF32> {
        let c = x.nchw()?[1];
        let get = |s: &str| self.w.require(&format!("{prefix}.bn.{s}"), &[c]).map(|t| t.data());
        batchnorm_infer(x, get("gamma")?, get("beta")?, get("mean")?, get("var")?, BATCHNORM_EPS)
    }

    fn act(&self, slot: &str, x: &TensorF32) -> Result<TensorF32> {
        let c = x.nchw()?[1];
        prelu(x, self.w.require(slot, &[c])?.data())
    }

    /// conv → batch norm → PReLU
    fn conv_block(&self, slot: &str, g: &ConvGeom, x: &TensorF32) -> Result<TensorF32> {
        let y = self.conv(slot, g, x)?;
        let y = self.bn(slot, &y)?;
        self.act(&format!("{slot}.prelu"), &y)
    }

    fn initial(&self, l: &LayerSpec, name: &str, x: &TensorF32) -> Result<TensorF32> {
        let (_, g) = self.spec.convs(l)[0];
        let conv = self.conv(&format!("{name}.conv"), &g, x)?;
        let (pooled, _) = maxpool2x2_with_indices(x)?;
        let y = TensorF32::concat_channels(&[&conv, &pooled])?;
        let y = self.bn(name, &y)?;
        self.act(&format!("{name}.prelu"), &y)
    }

    fn bottleneck(&mut self, l: &LayerSpec, name: &str, x: &TensorF32) -> Result<TensorF32> {
        let convs = self.spec.convs(l);
        let mut ext = x.clone();
        let mut skip = None;
        for (role, g) in &convs {
            let slot = format!("{name}.{role}");
            if *role == "skip" {
                let s = self.conv(&slot, g, x)?;
                skip = Some(self.bn(&slot, &s)?);
            } else {
                ext = self.conv_block(&slot, g, &ext)?;
            }
        }
        let main = match l.variant {
            Variant::Downsampling => {
                let (pooled, idx) = maxpool2x2_with_indices(x)?;
                self.indices.insert(l.id, idx);
                channel_zero_pad(&pooled, l.out_channels)?
            }
            Variant::Upsampling => {
                let from = l.unpool_from.ok_or_else(|| invalid("upsampling without a source"))?;
                let idx = self
                    .indices
                    .get(&from)
                    .ok_or_else(|| invalid(format!("{name}: no indices recorded for row {from}")))?;
                let skip = skip.ok_or_else(|| invalid("upsampling needs a skip conv"))?;
                let mut dims = idx.input_dims.clone();
                dims[1] = l.out_channels;
                if idx.dims[1] != l.out_channels {
                    return Err(invalid(format!(
                        "{name}: indices carry {} channels, skip has {}",
                        idx.dims[1], l.out_channels
                    )));
                }
                max_unpool2x2(&skip, idx, &dims)?
            }
            _ => x.clone(),
        };
        let sum = main.add(&ext)?;
        self.act(&format!("{name}.out.prelu"), &sum)
    }
}
