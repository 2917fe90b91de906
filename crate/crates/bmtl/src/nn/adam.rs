//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::nn::params::{ArchiveReader, ParameterStore};
use crate::nn::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second-moment accumulators, one pair per parameter, plus the step
/// counter used for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(store: &ParameterStore<T>, config: AdamConfig) -> Self {
        let first = store.iter().map(|p| Tensor::zeros(p.value.rows, p.value.cols)).collect();
        let second = store.iter().map(|p| Tensor::zeros(p.value.rows, p.value.cols)).collect();
        AdamState { config, first, second, step: 0 }
    }

    /// Applies one update from the gradients currently in `store`,
    /// optionally scaling the configured learning rate (used for decay
    /// schedules). Gradients are left untouched; the caller zeroes them.
    pub fn step(&mut self, store: &mut ParameterStore<T>, lr_scale: f64) -> Result<()> {
        if self.first.len() != store.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer tracks {} parameters, store has {}",
                self.first.len(),
                store.len()
            )));
        }
        self.step += 1;
        let b1 = T::from_f64(self.config.beta1);
        let b2 = T::from_f64(self.config.beta2);
        let lr = T::from_f64(self.config.learning_rate * lr_scale);
        let eps = T::from_f64(self.config.epsilon);
        let bias1 = T::from_f64(1.0 - self.config.beta1.powi(self.step as i32));
        let bias2 = T::from_f64(1.0 - self.config.beta2.powi(self.step as i32));

        for idx in 0..store.len() {
            let p = store.get_mut(idx);
            let m = &mut self.first[idx];
            let v = &mut self.second[idx];
            if !m.same_shape(&p.value) || !v.same_shape(&p.value) {
                return Err(Error::ShapeMismatch(format!(
                    "optimizer state {} vs parameter {} {}",
                    m.shape_string(),
                    p.name,
                    p.value.shape_string()
                )));
            }
            for i in 0..p.value.data.len() {
                let g = p.grad.data[i];
                m.data[i] = b1 * m.data[i] + (T::one() - b1) * g;
                v.data[i] = b2 * v.data[i] + (T::one() - b2) * g * g;
                let m_hat = m.data[i] / bias1;
                let v_hat = v.data[i] / bias2;
                p.value.data[i] = p.value.data[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Moment arrays in the parameter-archive layout, first moments then
    /// second moments, prefixed with the step counter.
    pub fn to_bytes(&self, store: &ParameterStore<T>) -> Vec<u8> {
        let mut moments: ParameterStore<T> = ParameterStore::new();
        for (idx, p) in store.iter().enumerate() {
            moments.define(&format!("m.{}", p.name), self.first[idx].clone());
        }
        for (idx, p) in store.iter().enumerate() {
            moments.define(&format!("v.{}", p.name), self.second[idx].clone());
        }
        let archive = moments.to_archive();
        let mut out = format!("step {}\n", self.step).into_bytes();
        out.extend_from_slice(&archive);
        out
    }

    pub fn from_bytes(
        bytes: &[u8],
        store: &ParameterStore<T>,
        config: AdamConfig,
    ) -> Result<AdamState<T>> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Truncated("optimizer state".into()))?;
        let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format {
            path: "optimizer state".into(),
            detail: "header not UTF-8".into(),
        })?;
        let step: u64 = head
            .strip_prefix("step ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format {
                path: "optimizer state".into(),
                detail: format!("bad header {head:?}"),
            })?;
        let mut reader = ArchiveReader::new(&bytes[nl + 1..], "optimizer state")?;
        let manifest = reader.manifest.clone();
        if manifest.len() != 2 * store.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer archive has {} arrays for {} parameters",
                manifest.len(),
                store.len()
            )));
        }
        let mut arrays = Vec::with_capacity(manifest.len());
        for (name, rows, cols, dtype) in &manifest {
            if *dtype != T::DTYPE {
                return Err(Error::Format {
                    path: "optimizer state".into(),
                    detail: format!("entry {name} is {dtype}, expected {}", T::DTYPE),
                });
            }
            let data = reader.read_array::<T>(rows * cols)?;
            arrays.push(Tensor { rows: *rows, cols: *cols, data });
        }
        let second = arrays.split_off(store.len());
        let first = arrays;
        for (idx, p) in store.iter().enumerate() {
            if !first[idx].same_shape(&p.value) || !second[idx].same_shape(&p.value) {
                return Err(Error::ShapeMismatch(format!(
                    "optimizer state shape for {}",
                    p.name
                )));
            }
        }
        Ok(AdamState { config, first, second, step })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(theta: f64, grad: f64) -> ParameterStore<f64> {
        let mut store = ParameterStore::new();
        let i = store.define("theta", Tensor::scalar(theta));
        store.get_mut(i).grad.data[0] = grad;
        store
    }

    #[test]
    fn single_step_hand_computation() {
        // m=0.1, v=0.001, m_hat=1, v_hat=1 -> theta = 1 - 1e-4/(1+1e-8)
        let mut store = scalar_store(1.0, 1.0);
        let mut adam = AdamState::new(&store, AdamConfig::default());
        adam.step(&mut store, 1.0).unwrap();
        let theta = store.get(0).value.data[0];
        assert!((theta - 0.9999).abs() < 1e-7, "theta {theta}");
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut store = scalar_store(0.37, 0.0);
        let mut adam = AdamState::new(&store, AdamConfig::default());
        adam.step(&mut store, 1.0).unwrap();
        assert_eq!(store.get(0).value.data[0], 0.37);
    }

    #[test]
    fn identical_parameters_update_identically() {
        let mut store: ParameterStore<f64> = ParameterStore::new();
        let a = store.define("a", Tensor::scalar(0.5));
        let b = store.define("b", Tensor::scalar(0.5));
        store.get_mut(a).grad.data[0] = -0.75;
        store.get_mut(b).grad.data[0] = -0.75;
        let mut adam = AdamState::new(&store, AdamConfig::default());
        adam.step(&mut store, 1.0).unwrap();
        adam.step(&mut store, 1.0).unwrap();
        assert_eq!(store.get(a).value.data[0], store.get(b).value.data[0]);
    }

    #[test]
    fn mismatched_state_errors() {
        let mut store = scalar_store(1.0, 1.0);
        let mut adam = AdamState::new(&store, AdamConfig::default());
        store.define("extra", Tensor::scalar(0.0));
        assert!(matches!(adam.step(&mut store, 1.0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn state_bytes_roundtrip() {
        let mut store = scalar_store(1.0, 0.25);
        let mut adam = AdamState::new(&store, AdamConfig::default());
        adam.step(&mut store, 1.0).unwrap();
        let bytes = adam.to_bytes(&store);
        let loaded = AdamState::from_bytes(&bytes, &store, AdamConfig::default()).unwrap();
        assert_eq!(loaded.step, adam.step);
        assert_eq!(loaded.first[0], adam.first[0]);
        assert_eq!(loaded.second[0], adam.second[0]);
    }
}
