//! Dense order-d complex tensors with cubical shape n x n x ... x n.
//!
//! Entries are stored row-major (mode 1 slowest) in a flat `Vec<Complex64>`.
//! Public indices are 1-based, matching the usual mathematical convention for
//! modes and hyperplanes; the mapping to 0-based storage happens here and
//! nowhere else.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default cap on the number of stored entries (n^d).
pub const DEFAULT_STORAGE_CAP: u128 = 100_000_000;

/// Dense order-d tensor over the complex numbers, all modes of dimension n.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    order: usize,
    dim: usize,
    entries: Vec<Complex64>,
}

impl Tensor {
    /// Build a tensor from entries listed in row-major index order.
    ///
    /// Requires order >= 2, dim >= 1, exactly dim^order finite entries and a
    /// total size below the storage cap.
    pub fn new(order: usize, dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        Self::with_cap(order, dim, entries, DEFAULT_STORAGE_CAP)
    }

    /// As [`Tensor::new`] but with an explicit storage cap.
    pub fn with_cap(
        order: usize,
        dim: usize,
        entries: Vec<Complex64>,
        cap: u128,
    ) -> Result<Self> {
        let expected = Self::checked_len(order, dim, cap)?;
        if entries.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {}^{} = {} entries, got {}",
                dim,
                order,
                expected,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().position(|e| !e.re.is_finite() || !e.im.is_finite()) {
            return Err(Error::NonFinite(format!("entry at flat position {bad}")));
        }
        Ok(Tensor { order, dim, entries })
    }

    /// The all-ones tensor of the given shape.
    pub fn ones(order: usize, dim: usize) -> Result<Self> {
        let len = Self::checked_len(order, dim, DEFAULT_STORAGE_CAP)?;
        Ok(Tensor {
            order,
            dim,
            entries: vec![Complex64::new(1.0, 0.0); len],
        })
    }

    /// Constant tensor with every entry equal to `value`.
    pub fn constant(order: usize, dim: usize, value: Complex64) -> Result<Self> {
        let len = Self::checked_len(order, dim, DEFAULT_STORAGE_CAP)?;
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::NonFinite("constant fill value".into()));
        }
        Ok(Tensor {
            order,
            dim,
            entries: vec![value; len],
        })
    }

    fn checked_len(order: usize, dim: usize, cap: u128) -> Result<usize> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!(
                "tensor order must be at least 2, got {order}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be positive".into()));
        }
        let mut total: u128 = 1;
        for _ in 0..order {
            total = total.saturating_mul(dim as u128);
            if total > cap {
                return Err(Error::StorageCap {
                    order,
                    dim,
                    entries: total,
                    cap,
                });
            }
        }
        Ok(total as usize)
    }

    /// Number of modes d.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Dimension n of every mode.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Flat row-major entry storage.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Stride of a 1-based mode in the flat layout (mode 1 is slowest).
    pub fn stride(&self, mode: usize) -> usize {
        debug_assert!((1..=self.order).contains(&mode));
        self.dim.pow((self.order - mode) as u32)
    }

    /// Entry at a 1-based multi-index.  Panics on a malformed index; use the
    /// checked operations below for untrusted input.
    pub fn entry(&self, index: &[usize]) -> Complex64 {
        assert_eq!(index.len(), self.order, "index arity mismatch");
        let mut flat = 0;
        for &i in index {
            assert!((1..=self.dim).contains(&i), "index {i} out of 1..={}", self.dim);
            flat = flat * self.dim + (i - 1);
        }
        self.entries[flat]
    }

    /// Entrywise map alpha + z * a over the whole tensor.
    ///
    /// With alpha = 1 this forms J + z A; with z = 1 and alpha = -mu it
    /// recenters a shifted sample.
    pub fn affine_combine(&self, alpha: Complex64, z: Complex64) -> Result<Tensor> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let v = alpha + z * e;
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite("affine_combine produced a non-finite entry".into()));
            }
            entries.push(v);
        }
        Ok(Tensor {
            order: self.order,
            dim: self.dim,
            entries,
        })
    }

    /// Sum of all entries on the hyperplane where `mode` (1-based) is fixed
    /// to `index` (1-based).  Summation follows flat storage order, so the
    /// result is deterministic.
    pub fn hyperplane_sum(&self, mode: usize, index: usize) -> Result<Complex64> {
        if !(1..=self.order).contains(&mode) {
            return Err(Error::OutOfRange(format!(
                "mode {mode} not in 1..={}",
                self.order
            )));
        }
        if !(1..=self.dim).contains(&index) {
            return Err(Error::OutOfRange(format!(
                "index {index} not in 1..={}",
                self.dim
            )));
        }
        let stride = self.stride(mode);
        let block = stride * self.dim;
        let outer = self.entries.len() / block;
        let mut acc = Complex64::new(0.0, 0.0);
        for o in 0..outer {
            let base = o * block + (index - 1) * stride;
            for e in &self.entries[base..base + stride] {
                acc += e;
            }
        }
        Ok(acc)
    }

    /// Sum of every entry.  Equal to the sum of hyperplane sums over any one
    /// mode.
    pub fn total_sum(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for e in &self.entries {
            acc += e;
        }
        acc
    }

    /// Extract the subtensor picked out by `sel`: entry (j_1, ..., j_d) of the
    /// result is entry (sel_1[j_1], ..., sel_d[j_d]) of `self`.
    pub fn subtensor(&self, sel: &IndexSelection) -> Result<Tensor> {
        if sel.order() != self.order {
            return Err(Error::InvalidArgument(format!(
                "selection has {} modes, tensor has {}",
                sel.order(),
                self.order
            )));
        }
        for (m, list) in sel.modes().iter().enumerate() {
            if let Some(&bad) = list.iter().find(|&&i| i < 1 || i > self.dim) {
                return Err(Error::OutOfRange(format!(
                    "selection index {bad} in mode {} not in 1..={}",
                    m + 1,
                    self.dim
                )));
            }
        }
        let k = sel.size();
        let d = self.order;
        let mut entries = Vec::with_capacity(k.pow(d as u32));
        let mut idx = vec![0usize; d];
        loop {
            let mut flat = 0;
            for m in 0..d {
                flat = flat * self.dim + (sel.modes()[m][idx[m]] - 1);
            }
            entries.push(self.entries[flat]);
            // Odometer over the k^d result positions, last mode fastest.
            let mut m = d;
            loop {
                if m == 0 {
                    return Tensor::with_cap(d, k, entries, DEFAULT_STORAGE_CAP);
                }
                m -= 1;
                idx[m] += 1;
                if idx[m] < k {
                    break;
                }
                idx[m] = 0;
            }
        }
    }
}

/// One list of 1-based indices per mode, each strictly increasing and all of
/// the same length k.  Describes an axis-aligned subtensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSelection {
    modes: Vec<Vec<usize>>,
}

impl IndexSelection {
    /// Validate and wrap per-mode index lists.
    pub fn new(modes: Vec<Vec<usize>>) -> Result<Self> {
        if modes.len() < 2 {
            return Err(Error::InvalidArgument(
                "selection needs at least two modes".into(),
            ));
        }
        let k = modes[0].len();
        if k == 0 {
            return Err(Error::InvalidArgument("selection lists must be non-empty".into()));
        }
        for (m, list) in modes.iter().enumerate() {
            if list.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "selection mode {} has length {}, expected {}",
                    m + 1,
                    list.len(),
                    k
                )));
            }
            if !list.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "selection mode {} is not strictly increasing",
                    m + 1
                )));
            }
            if list[0] < 1 {
                return Err(Error::InvalidArgument("selection indices are 1-based".into()));
            }
        }
        Ok(IndexSelection { modes })
    }

    /// The identity selection keeping all of 1..=dim in every mode.
    pub fn full(order: usize, dim: usize) -> Self {
        IndexSelection {
            modes: vec![(1..=dim).collect(); order],
        }
    }

    /// Number of modes.
    pub fn order(&self) -> usize {
        self.modes.len()
    }

    /// Common length k of the index lists.
    pub fn size(&self) -> usize {
        self.modes[0].len()
    }

    /// Per-mode index lists.
    pub fn modes(&self) -> &[Vec<usize>] {
        &self.modes
    }

    /// Compose with a selection acting on the subtensor this one produces:
    /// `subtensor(subtensor(A, self), inner) == subtensor(A, self.compose(inner))`.
    pub fn compose(&self, inner: &IndexSelection) -> Result<IndexSelection> {
        if inner.order() != self.order() {
            return Err(Error::InvalidArgument("selection order mismatch".into()));
        }
        if inner.modes.iter().flatten().any(|&i| i > self.size()) {
            return Err(Error::OutOfRange(
                "inner selection exceeds outer selection size".into(),
            ));
        }
        let modes = self
            .modes
            .iter()
            .zip(&inner.modes)
            .map(|(outer, inner)| inner.iter().map(|&i| outer[i - 1]).collect())
            .collect();
        IndexSelection::new(modes)
    }
}

// --- JSON interchange -----------------------------------------------------
//
// {"order": d, "dim": n, "entries": [[re, im], ...]} with entries row-major.

#[derive(Serialize, Deserialize)]
struct TensorWire {
    order: usize,
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for Tensor {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let wire = TensorWire {
            order: self.order,
            dim: self.dim,
            entries: self.entries.iter().map(|e| [e.re, e.im]).collect(),
        };
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tensor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = TensorWire::deserialize(deserializer)?;
        let entries = wire
            .entries
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        Tensor::new(wire.order, wire.dim, entries).map_err(D::Error::custom)
    }
}
