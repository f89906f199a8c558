use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::TensorF32;

/// Integer label grid: 0 is background, `k >= 1` is lane `k`.
///
/// Masks produced by rasterization satisfy two invariants checked by
/// [`LaneMask::validate`]: lane ids are exactly `1..=L`, and within every row
/// each lane's pixels form one contiguous run. Decoder cluster maps reuse this
/// type without those guarantees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneMask {
    height: usize,
    width: usize,
    labels: Vec<u16>,
}

impl LaneMask {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            labels: vec![0; height * width],
        }
    }

    /// Builds and validates a mask.
    pub fn from_labels(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        let m = Self::from_labels_unchecked(height, width, labels)?;
        m.validate()?;
        Ok(m)
    }

    /// Builds a label grid checking only its size.
    pub fn from_labels_unchecked(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::InvalidMask(format!(
                "{} labels for a {height}x{width} grid",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, id: u16) {
        self.labels[y * self.width + x] = id;
    }

    pub fn row(&self, y: usize) -> &[u16] {
        &self.labels[y * self.width..(y + 1) * self.width]
    }

    pub fn lane_count(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    /// Contiguous `1..=L` ids and one run per lane per row.
    pub fn validate(&self) -> Result<()> {
        let lanes = self.lane_count();
        let mut seen = vec![false; lanes + 1];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = (1..=lanes).find(|&k| !seen[k]) {
            return Err(Error::InvalidMask(format!(
                "lane ids are not contiguous: {missing} missing below {lanes}"
            )));
        }
        for y in 0..self.height {
            for (lane, x0, _) in self.runs(y) {
                let row = self.row(y);
                if row[..x0].contains(&lane) {
                    return Err(Error::InvalidMask(format!(
                        "lane {lane} has more than one run in row {y}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Maximal same-label runs `(lane, x_start, x_end_exclusive)` in row `y`.
    pub fn runs(&self, y: usize) -> Vec<(u16, usize, usize)> {
        let row = self.row(y);
        let mut out = Vec::new();
        let mut x = 0;
        while x < row.len() {
            let l = row[x];
            let start = x;
            while x < row.len() && row[x] == l {
                x += 1;
            }
            if l != 0 {
                out.push((l, start, x));
            }
        }
        out
    }

    /// `(1, H, W)` float tensor holding the integer labels.
    pub fn to_tensor(&self) -> TensorF32 {
        TensorF32::new(
            vec![1, self.height, self.width],
            self.labels.iter().map(|&l| l as f32).collect(),
        )
        .expect("mask dims are positive")
    }

    /// Inverse of [`LaneMask::to_tensor`]; every value must be a non-negative
    /// integer label.
    pub fn from_tensor(t: &TensorF32) -> Result<Self> {
        let (c, h, w) = t.planes()?;
        if c != 1 {
            return Err(Error::InvalidMask(format!("mask tensor has {c} channels")));
        }
        let labels = t
            .data()
            .iter()
            .map(|&v| {
                if v >= 0.0 && v <= u16::MAX as f32 && libm::truncf(v) == v {
                    Ok(v as u16)
                } else {
                    Err(Error::InvalidMask(format!("non-integer label {v}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_labels(h, w, labels)
    }
}
