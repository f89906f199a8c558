use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Dilation rates that appear in the layer table.
pub const ALLOWED_DILATIONS: [usize; 5] = [1, 2, 4, 8, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LayerKind {
    Initial,
    Bottleneck,
    Conv1x1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Variant {
    Plain,
    Downsampling,
    Upsampling,
    Dilated(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    /// Row number in the ENet-21 layer table (1..=21).
    pub id: u8,
    /// Table name, e.g. `bottleneck2.3`.
    pub name: String,
    pub kind: LayerKind,
    pub variant: Variant,
    pub in_channels: usize,
    pub out_channels: usize,
    pub dilation: usize,
    /// For upsampling bottlenecks: row id of the downsampling bottleneck whose
    /// pooling indices drive the unpool.
    pub unpool_from: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HeadKind {
    Seg,
    Haf,
    Vaf,
}

impl HeadKind {
    pub const ALL: [HeadKind; 3] = [HeadKind::Seg, HeadKind::Haf, HeadKind::Vaf];

    pub fn channels(self) -> usize {
        match self {
            HeadKind::Seg | HeadKind::Haf => 1,
            HeadKind::Vaf => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Seg => "seg",
            HeadKind::Haf => "haf",
            HeadKind::Vaf => "vaf",
        }
    }
}

/// Rows 19–21 for one output: two plain bottlenecks and a 1×1 projection.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeadSpec {
    pub kind: HeadKind,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchSpec {
    /// Shared trunk, rows 1–18.
    pub layers: Vec<LayerSpec>,
    pub heads: Vec<HeadSpec>,
    /// Bottleneck internal width is `out_channels / projection_ratio`.
    pub projection_ratio: usize,
    /// When set, rows 19–20 are computed once and only the final 1×1
    /// convolutions differ per head.
    pub shared_heads: bool,
    /// Spatial dropout probability applied after every bottleneck in training.
    pub dropout: f32,
}

/// Geometry of one convolution inside a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub transposed: bool,
    pub output_padding: usize,
}

impl ConvGeom {
    fn pointwise(in_ch: usize, out_ch: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel: 1,
            stride: 1,
            padding: 0,
            dilation: 1,
            transposed: false,
            output_padding: 0,
        }
    }

    pub fn kernel_dims(&self) -> Vec<usize> {
        vec![self.out_ch, self.in_ch, self.kernel, self.kernel]
    }

    pub fn params(&self) -> u64 {
        (self.in_ch * self.out_ch * self.kernel * self.kernel) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotRole {
    Kernel,
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
    PreluSlope,
}

impl SlotRole {
    /// Learned parameters; running statistics are buffers.
    pub fn trainable(self) -> bool {
        !matches!(self, SlotRole::RunningMean | SlotRole::RunningVar)
    }
}

/// One named tensor the forward pass reads from a weight store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSlot {
    pub name: String,
    pub dims: Vec<usize>,
    pub role: SlotRole,
    /// Qualified layer name the slot belongs to.
    pub layer: String,
}

impl ParamSlot {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn layer(id: u8, name: &str, kind: LayerKind, variant: Variant, cin: usize, cout: usize) -> LayerSpec {
    let dilation = match variant {
        Variant::Dilated(d) => d,
        _ => 1,
    };
    LayerSpec {
        id,
        name: name.into(),
        kind,
        variant,
        in_channels: cin,
        out_channels: cout,
        dilation,
        unpool_from: None,
    }
}

fn bottleneck(id: u8, name: &str, variant: Variant, cin: usize, cout: usize) -> LayerSpec {
    layer(id, name, LayerKind::Bottleneck, variant, cin, cout)
}

/// The ENet-21 layer table for a 640×352×3 input.
pub fn build_enet21() -> ArchSpec {
    use Variant::*;
    let mut layers = vec![
        layer(1, "initial", LayerKind::Initial, Plain, 3, 16),
        bottleneck(2, "bottleneck1.0", Downsampling, 16, 64),
        bottleneck(3, "bottleneck1.1", Dilated(2), 64, 64),
        bottleneck(4, "bottleneck1.2", Dilated(4), 64, 64),
        bottleneck(5, "bottleneck2.0", Downsampling, 64, 128),
        bottleneck(6, "bottleneck2.1", Plain, 128, 128),
        bottleneck(7, "bottleneck2.2", Dilated(2), 128, 128),
        bottleneck(8, "bottleneck2.3", Dilated(4), 128, 128),
        bottleneck(9, "bottleneck2.4", Dilated(8), 128, 128),
        bottleneck(10, "bottleneck2.5", Dilated(16), 128, 128),
        bottleneck(11, "bottleneck3.1", Plain, 128, 128),
        bottleneck(12, "bottleneck3.2", Dilated(2), 128, 128),
        bottleneck(13, "bottleneck3.3", Dilated(4), 128, 128),
        bottleneck(14, "bottleneck3.4", Dilated(8), 128, 128),
        bottleneck(15, "bottleneck3.5", Dilated(16), 128, 128),
        bottleneck(16, "bottleneck4.0", Upsampling, 128, 64),
        bottleneck(17, "bottleneck4.1", Plain, 64, 64),
        bottleneck(18, "bottleneck4.2", Plain, 64, 64),
    ];
    pair_unpooling(&mut layers);
    let heads = HeadKind::ALL
        .iter()
        .map(|&kind| HeadSpec {
            kind,
            layers: vec![
                bottleneck(19, "bottleneck5.0", Plain, 64, 64),
                bottleneck(20, "bottleneck5.1", Plain, 64, 64),
                layer(21, "conv", LayerKind::Conv1x1, Plain, 64, kind.channels()),
            ],
        })
        .collect();
    ArchSpec {
        layers,
        heads,
        projection_ratio: 4,
        shared_heads: false,
        dropout: 0.2,
    }
}

/// Each upsampling bottleneck consumes the indices of the most recent
/// downsampling bottleneck not yet consumed.
fn pair_unpooling(layers: &mut [LayerSpec]) {
    let mut stack = Vec::new();
    for l in layers.iter_mut() {
        match l.variant {
            Variant::Downsampling => stack.push(l.id),
            Variant::Upsampling => l.unpool_from = stack.pop(),
            _ => {}
        }
    }
}

impl ArchSpec {
    pub fn with_shared_heads(mut self, shared: bool) -> Self {
        self.shared_heads = shared;
        self
    }

    pub fn with_projection_ratio(mut self, ratio: usize) -> Self {
        self.projection_ratio = ratio;
        self
    }

    /// Checks the structural invariants of the layer table.
    pub fn validate(&self) -> Result<()> {
        if self.projection_ratio == 0 {
            return Err(invalid("projection_ratio must be positive"));
        }
        let initials = self.layers.iter().filter(|l| l.kind == LayerKind::Initial).count();
        if initials != 1 || self.layers.first().map(|l| l.kind) != Some(LayerKind::Initial) {
            return Err(invalid("exactly one initial block, in first position"));
        }
        let all = self.layers.iter().chain(self.heads.iter().flat_map(|h| &h.layers));
        for l in all {
            if !ALLOWED_DILATIONS.contains(&l.dilation) {
                return Err(invalid(format!("{}: dilation {} not allowed", l.name, l.dilation)));
            }
            if l.kind == LayerKind::Bottleneck && self.internal(l) == 0 {
                return Err(invalid(format!("{}: projection ratio leaves no channels", l.name)));
            }
            if l.variant == Variant::Upsampling && l.unpool_from.is_none() {
                return Err(invalid(format!("{}: no downsampling layer to unpool from", l.name)));
            }
        }
        if self.heads.len() != 3 {
            return Err(invalid("expected three heads"));
        }
        if self.shared_heads {
            let first = &self.heads[0].layers;
            let n = first.len().saturating_sub(1);
            if self.heads.iter().any(|h| h.layers.len() != first.len() || h.layers[..n] != first[..n]) {
                return Err(invalid("shared heads need identical bottleneck rows"));
            }
        }
        Ok(())
    }

    pub fn internal(&self, l: &LayerSpec) -> usize {
        l.out_channels / self.projection_ratio
    }

    /// Qualified name for a head layer; shared rows are prefixed `heads.`.
    pub fn head_layer_name(&self, head: HeadKind, l: &LayerSpec) -> String {
        if self.shared_heads && l.kind == LayerKind::Bottleneck {
            format!("heads.{}", l.name)
        } else {
            format!("{}.{}", head.as_str(), l.name)
        }
    }

    /// Convolutions inside a layer, in execution order, keyed by role
    /// (`conv`, `proj`, `main`, `expand`, `skip`).
    pub fn convs(&self, l: &LayerSpec) -> Vec<(&'static str, ConvGeom)> {
        let i = self.internal(l);
        match (l.kind, l.variant) {
            (LayerKind::Initial, _) => vec![(
                "conv",
                ConvGeom {
                    in_ch: l.in_channels,
                    out_ch: l.out_channels - l.in_channels,
                    kernel: 3,
                    stride: 2,
                    padding: 1,
                    dilation: 1,
                    transposed: false,
                    output_padding: 0,
                },
            )],
            (LayerKind::Conv1x1, _) => vec![("conv", ConvGeom::pointwise(l.in_channels, l.out_channels))],
            (LayerKind::Bottleneck, Variant::Downsampling) => vec![
                (
                    "proj",
                    ConvGeom {
                        kernel: 2,
                        stride: 2,
                        ..ConvGeom::pointwise(l.in_channels, i)
                    },
                ),
                ("main", main_conv(i, 1)),
                ("expand", ConvGeom::pointwise(i, l.out_channels)),
            ],
            (LayerKind::Bottleneck, Variant::Upsampling) => vec![
                ("skip", ConvGeom::pointwise(l.in_channels, l.out_channels)),
                ("proj", ConvGeom::pointwise(l.in_channels, i)),
                (
                    "main",
                    ConvGeom {
                        stride: 2,
                        transposed: true,
                        output_padding: 1,
                        ..main_conv(i, 1)
                    },
                ),
                ("expand", ConvGeom::pointwise(i, l.out_channels)),
            ],
            (LayerKind::Bottleneck, _) => vec![
                ("proj", ConvGeom::pointwise(l.in_channels, i)),
                ("main", main_conv(i, l.dilation)),
                ("expand", ConvGeom::pointwise(i, l.out_channels)),
            ],
        }
    }

    /// Every tensor a forward pass needs, with its exact dims.
    pub fn parameter_slots(&self) -> Vec<ParamSlot> {
        let mut slots = Vec::new();
        for l in &self.layers {
            self.layer_slots(&l.name, l, &mut slots);
        }
        if self.shared_heads {
            for l in self.heads[0].layers.iter().filter(|l| l.kind == LayerKind::Bottleneck) {
                self.layer_slots(&self.head_layer_name(HeadKind::Seg, l), l, &mut slots);
            }
        }
        for h in &self.heads {
            for l in &h.layers {
                if self.shared_heads && l.kind == LayerKind::Bottleneck {
                    continue;
                }
                self.layer_slots(&self.head_layer_name(h.kind, l), l, &mut slots);
            }
        }
        slots
    }

    fn layer_slots(&self, prefix: &str, l: &LayerSpec, out: &mut Vec<ParamSlot>) {
        let mut push = |name: String, dims: Vec<usize>, role: SlotRole| {
            out.push(ParamSlot {
                name,
                dims,
                role,
                layer: prefix.into(),
            })
        };
        for (role, g) in self.convs(l) {
            let base = if l.kind == LayerKind::Conv1x1 {
                String::from(prefix)
            } else {
                format!("{prefix}.{role}")
            };
            push(format!("{base}.weight"), g.kernel_dims(), SlotRole::Kernel);
            match (l.kind, role) {
                (LayerKind::Conv1x1, _) => {}
                // the initial block normalizes after concatenating the pooled input
                (LayerKind::Initial, _) => {}
                (_, "skip") => {
                    for (suffix, r) in BN_SUFFIXES {
                        push(format!("{base}.bn.{suffix}"), vec![g.out_ch], r);
                    }
                }
                _ => {
                    for (suffix, r) in BN_SUFFIXES {
                        push(format!("{base}.bn.{suffix}"), vec![g.out_ch], r);
                    }
                    push(format!("{base}.prelu"), vec![g.out_ch], SlotRole::PreluSlope);
                }
            }
        }
        match l.kind {
            LayerKind::Initial => {
                for (suffix, r) in BN_SUFFIXES {
                    push(format!("{prefix}.bn.{suffix}"), vec![l.out_channels], r);
                }
                push(format!("{prefix}.prelu"), vec![l.out_channels], SlotRole::PreluSlope);
            }
            LayerKind::Bottleneck => {
                push(format!("{prefix}.out.prelu"), vec![l.out_channels], SlotRole::PreluSlope);
            }
            LayerKind::Conv1x1 => {}
        }
    }
}

const BN_SUFFIXES: [(&str, SlotRole); 4] = [
    ("gamma", SlotRole::Gamma),
    ("beta", SlotRole::Beta),
    ("mean", SlotRole::RunningMean),
    ("var", SlotRole::RunningVar),
];

fn main_conv(ch: usize, dilation: usize) -> ConvGeom {
    ConvGeom {
        kernel: 3,
        padding: dilation,
        dilation,
        ..ConvGeom::pointwise(ch, ch)
    }
}
