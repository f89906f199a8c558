use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::TensorF32;

/// Argmax positions recorded by [`maxpool2x2_with_indices`]: one flat index
/// into the pre-pool tensor per pooled element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    /// Dims of the pooled output.
    pub dims: Vec<usize>,
    /// Dims of the tensor that was pooled.
    pub input_dims: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// 2×2 stride-2 max pooling. Odd heights/widths are padded with −∞ on the
/// bottom/right, so the output is `ceil(H/2) × ceil(W/2)`. Ties resolve to
/// the first cell in row-major window order.
pub fn maxpool2x2_with_indices(input: &TensorF32) -> Result<(TensorF32, PoolIndices)> {
    let [n, c, h, w] = input.nchw()?;
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let src = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_idx = base + 2 * y * w + 2 * x;
                let mut first = true;
                for dy in 0..2 {
                    let yy = 2 * y + dy;
                    if yy >= h {
                        continue;
                    }
                    for dx in 0..2 {
                        let xx = 2 * x + dx;
                        if xx >= w {
                            continue;
                        }
                        let idx = base + yy * w + xx;
                        if first || src[idx] > best {
                            best = src[idx];
                            best_idx = idx;
                            first = false;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    let dims = vec![n, c, oh, ow];
    Ok((
        TensorF32::new(dims.clone(), out)?,
        PoolIndices {
            dims,
            input_dims: input.dims().to_vec(),
            argmax,
        },
    ))
}

/// Scatters pooled values back to their recorded argmax positions inside a
/// zero tensor of `out_dims`.
pub fn max_unpool2x2(input: &TensorF32, idx: &PoolIndices, out_dims: &[usize]) -> Result<TensorF32> {
    let [n, c, h, w] = input.nchw()?;
    if idx.dims != input.dims() || idx.argmax.len() != input.len() {
        return Err(Error::ShapeMismatch {
            op: "max_unpool2x2",
            left: input.dims().to_vec(),
            right: idx.dims.clone(),
        });
    }
    let &[on, oc, oh, ow] = out_dims else {
        return Err(Error::ShapeMismatch {
            op: "max_unpool2x2",
            left: input.dims().to_vec(),
            right: out_dims.to_vec(),
        });
    };
    if on != n || oc != c || oh.div_ceil(2) != h || ow.div_ceil(2) != w {
        return Err(Error::ShapeMismatch {
            op: "max_unpool2x2",
            left: input.dims().to_vec(),
            right: out_dims.to_vec(),
        });
    }
    let mut out = vec![0.0f32; on * oc * oh * ow];
    let plane_len = oh * ow;
    for (pos, (&v, &target)) in input.data().iter().zip(&idx.argmax).enumerate() {
        let plane = pos / (h * w);
        let (y, x) = ((pos % (h * w)) / w, pos % w);
        if target >= out.len() {
            return Err(Error::CorruptIndices(format!(
                "index {target} outside output of {} elements",
                out.len()
            )));
        }
        let (tp, ty, tx) = (target / plane_len, (target % plane_len) / ow, target % ow);
        if tp != plane || ty / 2 != y || tx / 2 != x {
            return Err(Error::CorruptIndices(format!(
                "index {target} is outside the pooling window of element {pos}"
            )));
        }
        out[target] = v;
    }
    TensorF32::new(out_dims.to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_window_max_and_its_index() {
        let x = TensorF32::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (p, idx) = maxpool2x2_with_indices(&x).unwrap();
        assert_eq!(p.data(), &[4.0]);
        assert_eq!(idx.argmax, vec![3]);
        let back = max_unpool2x2(&p, &idx, &[1, 1, 2, 2]).unwrap();
        assert_eq!(back.data(), &[0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn ties_resolve_to_top_left() {
        let x = TensorF32::full(&[1, 1, 2, 2], 7.0).unwrap();
        let (_, idx) = maxpool2x2_with_indices(&x).unwrap();
        assert_eq!(idx.argmax, vec![0]);
    }

    #[test]
    fn odd_dims_pad_with_negative_infinity() {
        let x = TensorF32::new(vec![1, 1, 3, 3], vec![-5.0; 9]).unwrap();
        let (p, idx) = maxpool2x2_with_indices(&x).unwrap();
        assert_eq!(p.dims(), &[1, 1, 2, 2]);
        assert!(p.data().iter().all(|&v| v == -5.0));
        assert_eq!(idx.argmax, vec![0, 2, 6, 8]);
        let back = max_unpool2x2(&p, &idx, &[1, 1, 3, 3]).unwrap();
        assert_eq!(back.data().iter().filter(|&&v| v != 0.0).count(), 4);
    }

    #[test]
    fn corrupt_indices_are_rejected() {
        let x = TensorF32::from_fn(&[1, 1, 4, 4], |i| i as f32).unwrap();
        let (p, mut idx) = maxpool2x2_with_indices(&x).unwrap();
        idx.argmax[0] = 99;
        assert!(matches!(
            max_unpool2x2(&p, &idx, &[1, 1, 4, 4]),
            Err(Error::CorruptIndices(_))
        ));
        // in range but belongs to another window
        idx.argmax[0] = 15;
        assert!(matches!(
            max_unpool2x2(&p, &idx, &[1, 1, 4, 4]),
            Err(Error::CorruptIndices(_))
        ));
    }
}
