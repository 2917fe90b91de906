//! Named parameter tensors with paired gradient buffers.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};
use crate::rng::Rng;

const ARCHIVE_HEADER: &str = "#params v1";

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Registration-ordered store; the order is also the serialization order.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore<T> {
    entries: Vec<Param<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        ParameterStore { entries: Vec::new(), index: HashMap::new() }
    }

    pub fn define(&mut self, name: &str, value: Tensor<T>) -> usize {
        assert!(
            !self.index.contains_key(name),
            "parameter {name:?} defined twice"
        );
        let grad = Tensor::zeros(value.rows, value.cols);
        self.entries.push(Param { name: name.to_string(), value, grad });
        let idx = self.entries.len() - 1;
        self.index.insert(name.to_string(), idx);
        idx
    }

    /// Glorot-uniform matrix: bound sqrt(6 / (fan_in + fan_out)), seeded per
    /// parameter name so registration order cannot change init values.
    pub fn define_matrix(&mut self, name: &str, rows: usize, cols: usize, init_seed: u64) -> usize {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let mut rng = Rng::stream(init_seed, name, 0);
        let data = (0..rows * cols)
            .map(|_| T::from_f64(rng.uniform(-bound, bound)))
            .collect();
        self.define(name, Tensor { rows, cols, data })
    }

    pub fn define_zeros(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        self.define(name, Tensor::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_entries(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, idx: usize) -> &Param<T> {
        &self.entries[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Param<T> {
        &mut self.entries[idx]
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.lookup(name).map(|i| &self.entries[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|p| p.name.as_str())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.fill(T::zero());
        }
    }

    pub fn accumulate_grad(&mut self, idx: usize, grad: &Tensor<T>) {
        let p = &mut self.entries[idx];
        assert!(p.grad.same_shape(grad), "gradient shape for {}", p.name);
        for (slot, g) in p.grad.data.iter_mut().zip(&grad.data) {
            *slot += *g;
        }
    }

    pub fn grad_global_norm(&self) -> T {
        let mut acc = T::zero();
        for p in &self.entries {
            for g in &p.grad.data {
                acc += *g * *g;
            }
        }
        acc.sqrt()
    }

    /// Scales every gradient by threshold/norm when the global L2 norm
    /// exceeds the threshold. Returns the pre-clip norm.
    pub fn clip_global_norm(&mut self, threshold: T) -> T {
        assert!(threshold > T::zero(), "clip threshold must be positive");
        let norm = self.grad_global_norm();
        if norm > threshold {
            let scale = threshold / norm;
            for p in &mut self.entries {
                for g in &mut p.grad.data {
                    *g *= scale;
                }
            }
        }
        norm
    }

    /// Errors with the parameter name if any value or gradient is non-finite.
    pub fn check_finite(&self) -> Result<()> {
        for p in &self.entries {
            if !p.value.all_finite() {
                return Err(Error::NonFinite(format!("parameter {}", p.name)));
            }
            if !p.grad.all_finite() {
                return Err(Error::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        Ok(())
    }

    /// Serializes values as a text manifest (name, shape, dtype per entry)
    /// followed by raw little-endian arrays in manifest order.
    pub fn to_archive(&self) -> Vec<u8> {
        let mut head = String::from(ARCHIVE_HEADER);
        head.push('\n');
        for p in &self.entries {
            head.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                p.name,
                p.value.rows,
                p.value.cols,
                T::DTYPE
            ));
        }
        head.push('\n');
        let mut bytes = head.into_bytes();
        for p in &self.entries {
            for &x in &p.value.data {
                x.write_le(&mut bytes);
            }
        }
        bytes
    }

    pub fn from_archive(bytes: &[u8]) -> Result<ParameterStore<T>> {
        let mut reader = ArchiveReader::new(bytes, "parameter archive")?;
        let mut store = ParameterStore::new();
        let manifest = reader.manifest.clone();
        for (name, rows, cols, dtype) in manifest {
            if dtype != T::DTYPE {
                return Err(Error::Format {
                    path: "parameter archive".into(),
                    detail: format!("entry {name} is {dtype}, expected {}", T::DTYPE),
                });
            }
            let data = reader.read_array(rows * cols)?;
            store.define(&name, Tensor { rows, cols, data });
        }
        Ok(store)
    }

    /// Overwrites values in place from an archive with an identical manifest.
    pub fn load_values(&mut self, bytes: &[u8]) -> Result<()> {
        let loaded = ParameterStore::<T>::from_archive(bytes)?;
        if loaded.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "archive has {} parameters, store has {}",
                loaded.len(),
                self.len()
            )));
        }
        for (mine, theirs) in self.entries.iter_mut().zip(loaded.entries) {
            if mine.name != theirs.name || !mine.value.same_shape(&theirs.value) {
                return Err(Error::ShapeMismatch(format!(
                    "archive entry {} {} vs store entry {} {}",
                    theirs.name,
                    theirs.value.shape_string(),
                    mine.name,
                    mine.value.shape_string()
                )));
            }
            mine.value = theirs.value;
        }
        Ok(())
    }
}

/// Shared manifest-plus-raw-data reader used by parameter and optimizer
/// archives.
pub(crate) struct ArchiveReader<'a> {
    pub manifest: Vec<(String, usize, usize, &'static str)>,
    data: &'a [u8],
    what: &'static str,
}

impl<'a> ArchiveReader<'a> {
    pub fn new(bytes: &'a [u8], what: &'static str) -> Result<Self> {
        let mut pos = 0usize;
        let mut lines = Vec::new();
        loop {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Truncated(what.to_string()))?;
            let line = std::str::from_utf8(&rest[..nl]).map_err(|_| Error::Format {
                path: what.to_string(),
                detail: "manifest is not UTF-8".into(),
            })?;
            pos += nl + 1;
            if line.is_empty() {
                break;
            }
            lines.push(line.to_string());
        }
        if lines.first().map(String::as_str) != Some(ARCHIVE_HEADER) {
            return Err(Error::VersionMismatch {
                found: lines.first().cloned().unwrap_or_default(),
                expected: ARCHIVE_HEADER.to_string(),
            });
        }
        let mut manifest = Vec::new();
        for line in &lines[1..] {
            let mut parts = line.split('\t');
            let bad = || Error::Format {
                path: what.to_string(),
                detail: format!("bad manifest line {line:?}"),
            };
            let name = parts.next().ok_or_else(bad)?.to_string();
            let rows: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let cols: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let dtype = match parts.next().ok_or_else(bad)? {
                "f32" => f32::DTYPE,
                "f64" => f64::DTYPE,
                _ => return Err(bad()),
            };
            manifest.push((name, rows, cols, dtype));
        }
        Ok(ArchiveReader { manifest, data: &bytes[pos..], what })
    }

    pub fn read_array<T: Scalar>(&mut self, len: usize) -> Result<Vec<T>> {
        let need = len * T::BYTES;
        if self.data.len() < need {
            return Err(Error::Truncated(self.what.to_string()));
        }
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            out.push(T::read_le(&self.data[i * T::BYTES..]));
        }
        self.data = &self.data[need..];
        Ok(out)
    }
}
