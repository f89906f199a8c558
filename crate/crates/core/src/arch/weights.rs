use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use super::spec::{ArchSpec, ParamSlot, SlotRole};
use crate::error::{Error, FormatError, Result};
use crate::format::{write_tensor, Reader};
use crate::ops::PRELU_INIT_SLOPE;
use crate::rng::seeded;
use crate::tensor::TensorF32;

/// Magic of the weight file: `AFW1`, `u32` entry count, then per entry a
/// `u16` name length, the UTF-8 name and an `AFT1` blob.
pub const WEIGHTS_MAGIC: [u8; 4] = *b"AFW1";

/// Named tensors keyed by layer-qualified slot name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, TensorF32>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: TensorF32) -> Option<TensorF32> {
        self.tensors.insert(name.into(), t)
    }

    pub fn get(&self, name: &str) -> Option<&TensorF32> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut TensorF32> {
        self.tensors.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TensorF32)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Looks up a slot and checks its dims.
    pub fn require(&self, name: &str, dims: &[usize]) -> Result<&TensorF32> {
        let t = self.tensors.get(name).ok_or_else(|| Error::Weight {
            slot: name.into(),
            reason: "missing".into(),
        })?;
        if t.dims() != dims {
            return Err(Error::Weight {
                slot: name.into(),
                reason: format!("expected dims {dims:?}, found {:?}", t.dims()),
            });
        }
        Ok(t)
    }

    /// One tensor per slot, every element set by `value(slot)`.
    pub fn filled(spec: &ArchSpec, value: impl Fn(&ParamSlot) -> f32) -> Self {
        let mut store = Self::new();
        for slot in spec.parameter_slots() {
            let t = TensorF32::full(&slot.dims, value(&slot)).expect("slot dims are positive");
            store.insert(slot.name, t);
        }
        store
    }

    /// Seeded uniform noise for kernels (scaled by fan-in), unit running
    /// variance, zero running mean, batch-norm scale/shift near 1/0 and the
    /// conventional 0.25 PReLU slope.
    pub fn random(spec: &ArchSpec, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut store = Self::new();
        for slot in spec.parameter_slots() {
            let n = slot.len();
            let data: Vec<f32> = match slot.role {
                SlotRole::Kernel => {
                    let fan_in: usize = slot.dims[1..].iter().product();
                    let bound = libm::sqrtf(3.0 / fan_in as f32);
                    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
                }
                SlotRole::Gamma => (0..n).map(|_| rng.random_range(0.8..1.2)).collect(),
                SlotRole::Beta => (0..n).map(|_| rng.random_range(-0.1..0.1)).collect(),
                SlotRole::RunningMean => alloc::vec![0.0; n],
                SlotRole::RunningVar => alloc::vec![1.0; n],
                SlotRole::PreluSlope => alloc::vec![PRELU_INIT_SLOPE; n],
            };
            store.insert(slot.name, TensorF32::new(slot.dims, data).expect("slot dims"));
        }
        store
    }

    /// Every slot of `spec` present with matching dims and no extra names.
    pub fn validate(&self, spec: &ArchSpec) -> Result<()> {
        let slots = spec.parameter_slots();
        for slot in &slots {
            self.require(&slot.name, &slot.dims)?;
        }
        if let Some(extra) = self
            .tensors
            .keys()
            .find(|k| !slots.iter().any(|s| &s.name == *k))
        {
            return Err(FormatError::UnknownTensor(extra.clone()).into());
        }
        Ok(())
    }

    pub fn to_afw_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&WEIGHTS_MAGIC);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let bytes = name.as_bytes();
            assert!(bytes.len() <= u16::MAX as usize, "tensor name too long");
            out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
            out.extend_from_slice(bytes);
            write_tensor(&mut out, t);
        }
        out
    }

    pub fn from_afw_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.magic(WEIGHTS_MAGIC)?;
        let count = r.u32()?;
        let mut store = Self::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = core::str::from_utf8(r.take(len)?)
                .map_err(|_| FormatError::InvalidName)?
                .to_string();
            let t = r.tensor()?;
            if store.tensors.contains_key(&name) {
                return Err(FormatError::DuplicateTensor(name));
            }
            store.tensors.insert(name, t);
        }
        r.finish()?;
        Ok(store)
    }

    /// Parses a weight file and rejects names `spec` does not define.
    pub fn from_afw_bytes_for(bytes: &[u8], spec: &ArchSpec) -> Result<Self, FormatError> {
        let store = Self::from_afw_bytes(bytes)?;
        let slots = spec.parameter_slots();
        if let Some(extra) = store.tensors.keys().find(|k| !slots.iter().any(|s| &s.name == *k)) {
            return Err(FormatError::UnknownTensor(extra.clone()));
        }
        Ok(store)
    }
}
