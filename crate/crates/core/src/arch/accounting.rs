use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::spec::{ArchSpec, ConvGeom, HeadKind, LayerKind, LayerSpec, Variant};
use crate::error::{invalid, Result};
use crate::ops::{conv2d_output_hw, transposed_conv2d_output_hw, ConvParams};
use crate::tensor::TensorF32;

/// Output dims of one layer as `(channels, height, width)`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerShape {
    pub id: u8,
    pub name: String,
    pub dims: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerReport {
    pub id: u8,
    pub name: String,
    pub output_dims: Option<[usize; 3]>,
    pub params: u64,
    pub flops: u64,
}

/// Per-layer and total parameter / FLOP ledger.
///
/// FLOPs count a multiply-accumulate as two operations. Batch norm costs two
/// operations per element (scale, shift), PReLU and the residual add one each,
/// and a 2×2 max pool three comparisons per output. Padding, concatenation and
/// unpooling are free.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchReport {
    pub per_layer: Vec<LayerReport>,
    pub total_params: u64,
    pub total_flops: u64,
}

impl ArchReport {
    fn from_layers(per_layer: Vec<LayerReport>) -> Self {
        let total_params = per_layer.iter().map(|l| l.params).sum();
        let total_flops = per_layer.iter().map(|l| l.flops).sum();
        Self {
            per_layer,
            total_params,
            total_flops,
        }
    }

    pub fn layer(&self, name: &str) -> Option<&LayerReport> {
        self.per_layer.iter().find(|l| l.name == name)
    }
}

/// Trainable parameters (kernels, batch-norm scale/shift, PReLU slopes) per
/// layer. Running statistics are not counted.
pub fn count_params(spec: &ArchSpec) -> ArchReport {
    let per_layer = layer_order(spec)
        .into_iter()
        .map(|(id, name, _)| LayerReport {
            id,
            name,
            output_dims: None,
            params: 0,
            flops: 0,
        })
        .collect();
    let mut report = ArchReport::from_layers(per_layer);
    fill_params(spec, &mut report);
    report
}

/// Full ledger (shapes, parameters, FLOPs) for an input of `(3, H, W)`.
pub fn count_flops(spec: &ArchSpec, input_dims: (usize, usize, usize)) -> Result<ArchReport> {
    let per_layer = walk(spec, input_dims)?
        .into_iter()
        .map(|(id, name, dims, flops)| LayerReport {
            id,
            name,
            output_dims: Some(dims),
            params: 0,
            flops,
        })
        .collect();
    let mut report = ArchReport::from_layers(per_layer);
    fill_params(spec, &mut report);
    Ok(report)
}

/// Output dims of every row, heads included (one entry per head layer, or one
/// per shared row).
pub fn shape_trace(spec: &ArchSpec, input_dims: (usize, usize, usize)) -> Result<Vec<LayerShape>> {
    Ok(walk(spec, input_dims)?
        .into_iter()
        .map(|(id, name, dims, _)| LayerShape { id, name, dims })
        .collect())
}

fn fill_params(spec: &ArchSpec, report: &mut ArchReport) {
    let mut by_layer: BTreeMap<String, u64> = BTreeMap::new();
    for slot in spec.parameter_slots() {
        if slot.role.trainable() {
            *by_layer.entry(slot.layer).or_default() += slot.len() as u64;
        }
    }
    for l in &mut report.per_layer {
        l.params = by_layer.get(&l.name).copied().unwrap_or(0);
    }
    report.total_params = report.per_layer.iter().map(|l| l.params).sum();
}

/// `(id, qualified name, layer)` in execution order; shared head rows appear once.
fn layer_order(spec: &ArchSpec) -> Vec<(u8, String, &LayerSpec)> {
    let mut out: Vec<(u8, String, &LayerSpec)> =
        spec.layers.iter().map(|l| (l.id, l.name.clone(), l)).collect();
    if spec.shared_heads {
        for l in spec.heads[0].layers.iter().filter(|l| l.kind == LayerKind::Bottleneck) {
            out.push((l.id, spec.head_layer_name(HeadKind::Seg, l), l));
        }
    }
    for h in &spec.heads {
        for l in &h.layers {
            if spec.shared_heads && l.kind == LayerKind::Bottleneck {
                continue;
            }
            out.push((l.id, spec.head_layer_name(h.kind, l), l));
        }
    }
    out
}

fn conv_out(g: &ConvGeom, hw: (usize, usize)) -> Result<(usize, usize)> {
    // Build a throwaway parameter set so the kernels' own shape formulas are used.
    let p = ConvParams::new(TensorF32::zeros(&[1, 1, 1, 1])?)
        .stride(g.stride)
        .padding(g.padding)
        .dilation(g.dilation)
        .output_padding(g.output_padding);
    let k = (g.kernel, g.kernel);
    let out = if g.transposed {
        transposed_conv2d_output_hw(hw, k, &p)
    } else {
        conv2d_output_hw(hw, k, &p)
    };
    out.ok_or_else(|| invalid(format!("convolution {g:?} does not fit a {hw:?} map")))
}

fn conv_flops(g: &ConvGeom, in_hw: (usize, usize), out_hw: (usize, usize)) -> u64 {
    // a transposed conv does one MAC per (input pixel, kernel tap)
    let hw = if g.transposed { in_hw } else { out_hw };
    2 * g.params() * (hw.0 * hw.1) as u64
}

fn norm_act_flops(ch: usize, hw: (usize, usize)) -> u64 {
    3 * (ch * hw.0 * hw.1) as u64
}

type Walked = (u8, String, [usize; 3], u64);

fn walk(spec: &ArchSpec, (c, h, w): (usize, usize, usize)) -> Result<Vec<Walked>> {
    spec.validate()?;
    if c != spec.layers[0].in_channels {
        return Err(invalid(format!("input has {c} channels, network expects 3")));
    }
    if h == 0 || w == 0 || h % 8 != 0 || w % 8 != 0 {
        return Err(invalid(format!("input {h}x{w} is not divisible by 8")));
    }
    let mut pool_inputs: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    let mut out = Vec::new();
    let mut cur = (c, (h, w));
    let mut step = |l: &LayerSpec, name: String, cur: (usize, (usize, usize))| -> Result<(usize, (usize, usize))> {
        let (next, flops) = layer_cost(spec, l, cur, &mut pool_inputs)?;
        out.push((l.id, name, [next.0, next.1 .0, next.1 .1], flops));
        Ok(next)
    };
    for l in &spec.layers {
        cur = step(l, l.name.clone(), cur)?;
    }
    let trunk = cur;
    if spec.shared_heads {
        for l in spec.heads[0].layers.iter().filter(|l| l.kind == LayerKind::Bottleneck) {
            cur = step(l, spec.head_layer_name(HeadKind::Seg, l), cur)?;
        }
    }
    let head_input = cur;
    for head in &spec.heads {
        let mut hc = if spec.shared_heads { head_input } else { trunk };
        for l in &head.layers {
            if spec.shared_heads && l.kind == LayerKind::Bottleneck {
                continue;
            }
            hc = step(l, spec.head_layer_name(head.kind, l), hc)?;
        }
    }
    Ok(out)
}

fn layer_cost(
    spec: &ArchSpec,
    l: &LayerSpec,
    (cin, hw): (usize, (usize, usize)),
    pool_inputs: &mut BTreeMap<u8, (usize, usize)>,
) -> Result<((usize, (usize, usize)), u64)> {
    if cin != l.in_channels {
        return Err(invalid(format!(
            "{} expects {} channels, receives {cin}",
            l.name, l.in_channels
        )));
    }
    let convs = spec.convs(l);
    let mut flops = 0u64;
    let out = match (l.kind, l.variant) {
        (LayerKind::Initial, _) => {
            let g = &convs[0].1;
            let o = conv_out(g, hw)?;
            let pooled = (hw.0.div_ceil(2), hw.1.div_ceil(2));
            if pooled != o {
                return Err(invalid("initial conv and pool branches disagree"));
            }
            flops += conv_flops(g, hw, o);
            flops += 3 * (cin * o.0 * o.1) as u64;
            flops += norm_act_flops(l.out_channels, o);
            (l.out_channels, o)
        }
        (LayerKind::Conv1x1, _) => {
            let g = &convs[0].1;
            let o = conv_out(g, hw)?;
            flops += conv_flops(g, hw, o);
            (l.out_channels, o)
        }
        (LayerKind::Bottleneck, variant) => {
            let mut ext = hw;
            for (role, g) in &convs {
                if *role == "skip" {
                    let o = conv_out(g, hw)?;
                    flops += conv_flops(g, hw, o) + 2 * (g.out_ch * o.0 * o.1) as u64;
                    continue;
                }
                let o = conv_out(g, ext)?;
                flops += conv_flops(g, ext, o) + norm_act_flops(g.out_ch, o);
                ext = o;
            }
            match variant {
                Variant::Downsampling => {
                    let pooled = (hw.0.div_ceil(2), hw.1.div_ceil(2));
                    if pooled != ext {
                        return Err(invalid(format!("{}: branches disagree", l.name)));
                    }
                    flops += 3 * (cin * pooled.0 * pooled.1) as u64;
                    pool_inputs.insert(l.id, hw);
                }
                Variant::Upsampling => {
                    let src = l.unpool_from.and_then(|id| pool_inputs.get(&id).copied());
                    if src != Some(ext) {
                        return Err(invalid(format!(
                            "{}: unpool target {src:?} differs from extension output {ext:?}",
                            l.name
                        )));
                    }
                }
                _ => {
                    if ext != hw {
                        return Err(invalid(format!("{}: spatial size changed", l.name)));
                    }
                }
            }
            // residual add + output PReLU
            flops += 2 * (l.out_channels * ext.0 * ext.1) as u64;
            (l.out_channels, ext)
        }
    };
    Ok((out, flops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::build_enet21;

    #[test]
    fn single_initial_conv_kernel_params() {
        let spec = build_enet21();
        let g = spec.convs(&spec.layers[0])[0].1;
        assert_eq!(g.params(), 351);
    }

    #[test]
    fn pointwise_head_flops() {
        let spec = build_enet21();
        let r = count_flops(&spec, (3, 352, 640)).unwrap();
        let head = r.layer("seg.conv").unwrap();
        assert_eq!(head.flops, 2 * 64 * 88 * 160);
        assert_eq!(head.params, 64);
        assert_eq!(head.output_dims, Some([1, 88, 160]));
    }

    #[test]
    fn totals_are_sums() {
        let spec = build_enet21();
        let r = count_flops(&spec, (3, 352, 640)).unwrap();
        assert_eq!(r.total_params, r.per_layer.iter().map(|l| l.params).sum::<u64>());
        assert_eq!(r.total_flops, r.per_layer.iter().map(|l| l.flops).sum::<u64>());
        assert_eq!(r.total_params, count_params(&spec).total_params);
    }

    #[test]
    fn rejects_non_divisible_inputs() {
        let spec = build_enet21();
        assert!(shape_trace(&spec, (3, 350, 640)).is_err());
        assert!(shape_trace(&spec, (1, 352, 640)).is_err());
    }

    #[test]
    fn params_match_slot_total() {
        let spec = build_enet21();
        let from_slots: usize = spec
            .parameter_slots()
            .iter()
            .filter(|s| s.role.trainable())
            .map(|s| s.len())
            .sum();
        assert_eq!(count_params(&spec).total_params, from_slots as u64);
    }
}
