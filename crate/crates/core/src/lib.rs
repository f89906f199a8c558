#![no_std]
// `!(x > 0.0)` style checks are there to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Deterministic core of an ENet-21 style lane-detection pipeline.
//!
//! Everything in this crate is a pure function over in-memory data and only
//! needs `alloc`:
//!
//! - [`tensor`] / [`ops`]: an NCHW `f32` tensor plus the handful of kernels the
//!   network needs (dilated and transposed convolution, max pooling with
//!   indices, unpooling, batch norm, PReLU, spatial dropout).
//! - [`arch`]: the declarative ENet-21 layer table, its shape trace,
//!   parameter/FLOP ledger and a forward pass driven by a [`arch::WeightStore`].
//! - [`affinity`]: horizontal/vertical affinity field generation from lane
//!   masks and the bottom-to-top decoder that turns predicted fields back into
//!   lane instances.
//! - [`losses`]: weighted BCE, soft IoU and foreground L1 field losses.
//! - [`eval`]: TuSimple-style vertex accuracy, FP/FN rates and the F1 used to
//!   summarize them.
//! - [`dataset`]: annotation geometry (rasterization, decoded-lane resampling)
//!   and seeded image noise.
//! - [`synth`]: a seeded quadratic-lane scene generator used by the tests.
//!
//! File and JSON handling lives in the `lanecli` crate.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod affinity;
pub mod arch;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod format;
pub mod losses;
pub mod ops;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use crate::error::{Error, FormatError, Result};
pub use crate::tensor::TensorF32;

/// Rows of the network output (and of every lane mask / field map).
pub const MAP_HEIGHT: usize = 88;
/// Columns of the network output.
pub const MAP_WIDTH: usize = 160;
/// Width of an original TuSimple frame.
pub const ORIG_WIDTH: usize = 1280;
/// Height of an original TuSimple frame.
pub const ORIG_HEIGHT: usize = 720;
/// Network input width (half of the original frame).
pub const INPUT_WIDTH: usize = 640;
/// Network input height.
pub const INPUT_HEIGHT: usize = 352;
