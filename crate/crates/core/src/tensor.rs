//! Dense `f32` tensor in canonical (N, C, H, W) row-major layout.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// N-dimensional `f32` array. Every dimension is at least one and the buffer
/// length always equals the product of the dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorF32 {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl TensorF32 {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected = checked_volume(&dims)?;
        if expected != data.len() {
            return Err(invalid(alloc::format!(
                "dims {:?} need {} elements, buffer has {}",
                dims,
                expected,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn full(dims: &[usize], value: f32) -> Result<Self> {
        let n = checked_volume(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::full(dims, 0.0)
    }

    /// Builds a tensor by evaluating `f` at every flat index.
    pub fn from_fn(dims: &[usize], f: impl FnMut(usize) -> f32) -> Result<Self> {
        let n = checked_volume(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: (0..n).map(f).collect(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Dimensions as `[n, c, h, w]`; fails unless the tensor has rank 4.
    pub fn nchw(&self) -> Result<[usize; 4]> {
        match *self.dims.as_slice() {
            [n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(Error::ShapeMismatch {
                op: "nchw",
                left: self.dims.clone(),
                right: vec![0; 4],
            }),
        }
    }

    /// Interprets the tensor as `(channels, height, width)` planes of a single
    /// image. Accepts `[H, W]`, `[C, H, W]` and `[1, C, H, W]`.
    pub fn planes(&self) -> Result<(usize, usize, usize)> {
        match *self.dims.as_slice() {
            [h, w] => Ok((1, h, w)),
            [c, h, w] => Ok((c, h, w)),
            [1, c, h, w] => Ok((c, h, w)),
            _ => Err(invalid(alloc::format!(
                "expected a single-image map, got dims {:?}",
                self.dims
            ))),
        }
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.data)
    }

    /// Element-wise sum of two tensors of identical shape.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.ensure_same_shape(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Concatenates rank-4 tensors along the channel axis.
    pub fn concat_channels(parts: &[&TensorF32]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| invalid("concat of zero tensors"))?
            .nchw()?;
        let [n, _, h, w] = first;
        let mut channels = 0;
        for p in parts {
            let [pn, pc, ph, pw] = p.nchw()?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(Error::ShapeMismatch {
                    op: "concat_channels",
                    left: first.to_vec(),
                    right: p.dims.clone(),
                });
            }
            channels += pc;
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * channels * plane);
        for b in 0..n {
            for p in parts {
                let pc = p.dims[1];
                data.extend_from_slice(&p.data[b * pc * plane..(b + 1) * pc * plane]);
            }
        }
        Self::new(vec![n, channels, h, w], data)
    }

    /// Copies channels `start..end` of a rank-4 tensor.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Self> {
        let [n, c, h, w] = self.nchw()?;
        if start >= end || end > c {
            return Err(invalid(alloc::format!(
                "channel range {start}..{end} out of 0..{c}"
            )));
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * (end - start) * plane);
        for b in 0..n {
            let base = b * c * plane;
            data.extend_from_slice(&self.data[base + start * plane..base + end * plane]);
        }
        Self::new(vec![n, end - start, h, w], data)
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch {
                op,
                left: self.dims.clone(),
                right: other.dims.clone(),
            });
        }
        Ok(())
    }
}

pub(crate) fn checked_volume(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(invalid("tensor rank must be at least 1"));
    }
    if dims.contains(&0) {
        return Err(invalid(alloc::format!("zero-sized dimension in {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| invalid(alloc::format!("dims {dims:?} overflow")))
}
