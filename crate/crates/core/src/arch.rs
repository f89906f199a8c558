//! ENet-21: a 21-row encoder/decoder built from ENet bottlenecks, ending in
//! three parallel heads (segmentation, HAF, VAF).
//!
//! [`ArchSpec`] is the single description every other piece derives from:
//! parameter slots (and so the [`WeightStore`] layout and parameter count),
//! the shape trace, the FLOP ledger and the forward pass.

mod accounting;
mod forward;
mod spec;
mod weights;

pub use accounting::{count_flops, count_params, shape_trace, ArchReport, LayerReport, LayerShape};
pub use forward::{forward, ForwardOutput};
pub use spec::{
    build_enet21, ArchSpec, ConvGeom, HeadKind, HeadSpec, LayerKind, LayerSpec, ParamSlot,
    SlotRole, Variant, ALLOWED_DILATIONS,
};
pub use weights::{WeightStore, WEIGHTS_MAGIC};
