use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::tensor::TensorF32;

/// Convolution hyper-parameters. The kernel is laid out `(out_ch, in_ch, kH, kW)`
/// for both the regular and the transposed convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub kernel: TensorF32,
    /// Per-output-channel bias. Every ENet-21 convolution leaves this empty.
    pub bias: Option<Vec<f32>>,
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
    pub padding: (usize, usize),
    /// Extra rows/cols appended to the bottom/right of a transposed
    /// convolution's output. Ignored by [`conv2d`].
    pub output_padding: (usize, usize),
}

impl ConvParams {
    /// Stride 1, dilation 1, no padding, no bias.
    pub fn new(kernel: TensorF32) -> Self {
        Self {
            kernel,
            bias: None,
            stride: (1, 1),
            dilation: (1, 1),
            padding: (0, 0),
            output_padding: (0, 0),
        }
    }

    pub fn stride(mut self, s: usize) -> Self {
        self.stride = (s, s);
        self
    }

    pub fn dilation(mut self, d: usize) -> Self {
        self.dilation = (d, d);
        self
    }

    pub fn padding(mut self, p: usize) -> Self {
        self.padding = (p, p);
        self
    }

    pub fn output_padding(mut self, p: usize) -> Self {
        self.output_padding = (p, p);
        self
    }

    pub fn bias(mut self, b: Vec<f32>) -> Self {
        self.bias = Some(b);
        self
    }

    fn kernel_dims(&self) -> Result<[usize; 4]> {
        self.kernel.nchw()
    }

    fn validate(&self, op: &'static str, in_ch: usize, in_dims: &[usize]) -> Result<[usize; 4]> {
        let kd = self.kernel_dims()?;
        if kd[1] != in_ch {
            return Err(Error::ShapeMismatch {
                op,
                left: in_dims.to_vec(),
                right: kd.to_vec(),
            });
        }
        if self.stride.0 == 0 || self.stride.1 == 0 || self.dilation.0 == 0 || self.dilation.1 == 0 {
            return Err(invalid("stride and dilation must be at least 1"));
        }
        if let Some(b) = &self.bias {
            if b.len() != kd[0] {
                return Err(Error::ShapeMismatch {
                    op,
                    left: vec![b.len()],
                    right: vec![kd[0]],
                });
            }
        }
        Ok(kd)
    }
}

fn conv_extent(size: usize, k: usize, s: usize, d: usize, p: usize) -> Option<usize> {
    let span = d * (k - 1) + 1;
    let padded = size + 2 * p;
    if padded < span {
        return None;
    }
    Some((padded - span) / s + 1)
}

/// `floor((H + 2p - d(k-1) - 1) / s) + 1` for both axes.
pub fn conv2d_output_hw(
    (h, w): (usize, usize),
    (kh, kw): (usize, usize),
    p: &ConvParams,
) -> Option<(usize, usize)> {
    Some((
        conv_extent(h, kh, p.stride.0, p.dilation.0, p.padding.0)?,
        conv_extent(w, kw, p.stride.1, p.dilation.1, p.padding.1)?,
    ))
}

/// `(H - 1)s - 2p + d(k-1) + output_padding + 1` for both axes.
pub fn transposed_conv2d_output_hw(
    (h, w): (usize, usize),
    (kh, kw): (usize, usize),
    p: &ConvParams,
) -> Option<(usize, usize)> {
    let axis = |size: usize, k: usize, s: usize, d: usize, pad: usize, op: usize| {
        ((size - 1) * s + d * (k - 1) + op + 1).checked_sub(2 * pad).filter(|&v| v > 0)
    };
    Some((
        axis(h, kh, p.stride.0, p.dilation.0, p.padding.0, p.output_padding.0)?,
        axis(w, kw, p.stride.1, p.dilation.1, p.padding.1, p.output_padding.1)?,
    ))
}

/// Valid output columns `lo..hi` for which `o*s + off` lands inside `0..len`.
fn valid_range(out_len: usize, s: usize, off: isize, len: usize) -> (usize, usize) {
    // o*s + off >= 0  <=>  o >= ceil(-off / s)
    let lo = if off >= 0 { 0 } else { ((-off) as usize).div_ceil(s) };
    // o*s + off <= len - 1
    let limit = len as isize - 1 - off;
    let hi = if limit < 0 { 0 } else { (limit as usize / s + 1).min(out_len) };
    (lo.min(hi), hi)
}

/// 2-D cross-correlation over an NCHW tensor.
pub fn conv2d(input: &TensorF32, p: &ConvParams) -> Result<TensorF32> {
    let [n, c, h, w] = input.nchw()?;
    let [oc, _, kh, kw] = p.validate("conv2d", c, input.dims())?;
    let (oh, ow) = conv2d_output_hw((h, w), (kh, kw), p).ok_or_else(|| Error::ShapeMismatch {
        op: "conv2d",
        left: input.dims().to_vec(),
        right: p.kernel.dims().to_vec(),
    })?;
    let (sh, sw) = p.stride;
    let (dh, dw) = p.dilation;
    let (ph, pw) = p.padding;
    let src = input.data();
    let k = p.kernel.data();
    let mut out = vec![0.0f32; n * oc * oh * ow];

    for b in 0..n {
        for o in 0..oc {
            let dst = &mut out[(b * oc + o) * oh * ow..(b * oc + o + 1) * oh * ow];
            for i in 0..c {
                let plane = &src[(b * c + i) * h * w..(b * c + i + 1) * h * w];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = k[((o * c + i) * kh + ky) * kw + kx];
                        let off_x = (kx * dw) as isize - pw as isize;
                        let (x_lo, x_hi) = valid_range(ow, sw, off_x, w);
                        if x_lo >= x_hi {
                            continue;
                        }
                        for y in 0..oh {
                            let iy = (y * sh + ky * dh) as isize - ph as isize;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            let row = &plane[iy as usize * w..(iy as usize + 1) * w];
                            let drow = &mut dst[y * ow..(y + 1) * ow];
                            if sw == 1 {
                                let base = (x_lo as isize + off_x) as usize;
                                for (d, s) in drow[x_lo..x_hi]
                                    .iter_mut()
                                    .zip(&row[base..base + (x_hi - x_lo)])
                                {
                                    *d += wv * s;
                                }
                            } else {
                                for x in x_lo..x_hi {
                                    drow[x] += wv * row[(x as isize * sw as isize + off_x) as usize];
                                }
                            }
                        }
                    }
                }
            }
            if let Some(bias) = &p.bias {
                for v in dst.iter_mut() {
                    *v += bias[o];
                }
            }
        }
    }
    TensorF32::new(vec![n, oc, oh, ow], out)
}

/// Transposed ("full") convolution: every input element scatters its
/// kernel-weighted contribution into the output. This is the adjoint of
/// [`conv2d`] with in/out kernel channels swapped.
pub fn transposed_conv2d(input: &TensorF32, p: &ConvParams) -> Result<TensorF32> {
    let [n, c, h, w] = input.nchw()?;
    let [oc, _, kh, kw] = p.validate("transposed_conv2d", c, input.dims())?;
    if p.output_padding.0 >= p.stride.0.max(p.dilation.0)
        || p.output_padding.1 >= p.stride.1.max(p.dilation.1)
    {
        return Err(invalid("output_padding must be smaller than stride or dilation"));
    }
    let (oh, ow) =
        transposed_conv2d_output_hw((h, w), (kh, kw), p).ok_or_else(|| Error::ShapeMismatch {
            op: "transposed_conv2d",
            left: input.dims().to_vec(),
            right: p.kernel.dims().to_vec(),
        })?;
    let (sh, sw) = p.stride;
    let (dh, dw) = p.dilation;
    let (ph, pw) = p.padding;
    let src = input.data();
    let k = p.kernel.data();
    let mut out = vec![0.0f32; n * oc * oh * ow];

    for b in 0..n {
        for o in 0..oc {
            let dst = &mut out[(b * oc + o) * oh * ow..(b * oc + o + 1) * oh * ow];
            for i in 0..c {
                let plane = &src[(b * c + i) * h * w..(b * c + i + 1) * h * w];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = k[((o * c + i) * kh + ky) * kw + kx];
                        let off_x = (kx * dw) as isize - pw as isize;
                        // input columns whose target x*sw + off_x lands in 0..ow
                        let (x_lo, x_hi) = valid_range(w, sw, off_x, ow);
                        if x_lo >= x_hi {
                            continue;
                        }
                        for y in 0..h {
                            let ty = (y * sh + ky * dh) as isize - ph as isize;
                            if ty < 0 || ty as usize >= oh {
                                continue;
                            }
                            let row = &plane[y * w..(y + 1) * w];
                            let drow = &mut dst[ty as usize * ow..(ty as usize + 1) * ow];
                            for x in x_lo..x_hi {
                                drow[(x as isize * sw as isize + off_x) as usize] += wv * row[x];
                            }
                        }
                    }
                }
            }
            if let Some(bias) = &p.bias {
                for v in dst.iter_mut() {
                    *v += bias[o];
                }
            }
        }
    }
    TensorF32::new(vec![n, oc, oh, ow], out)
}
