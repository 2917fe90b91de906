//! Standalone differentiable primitives with their spec'd contracts.

use crate::error::{Error, Result};
use crate::nn::tensor::Scalar;

/// Max-subtracted softmax with a validity mask. Masked entries come out as
/// exactly zero; unmasked entries are positive and sum to one.
pub fn softmax<T: Scalar>(scores: &[T], mask: &[bool]) -> Result<Vec<T>> {
    assert_eq!(scores.len(), mask.len(), "softmax mask length");
    let mut max: Option<T> = None;
    for (s, &m) in scores.iter().zip(mask) {
        if m && max.map_or(true, |cur| *s > cur) {
            max = Some(*s);
        }
    }
    let max = max.ok_or_else(|| Error::Numeric("softmax over an all-masked vector".into()))?;
    let mut out = vec![T::zero(); scores.len()];
    let mut total = T::zero();
    for i in 0..scores.len() {
        if mask[i] {
            let e = (scores[i] - max).exp();
            out[i] = e;
            total += e;
        }
    }
    for v in &mut out {
        *v = *v / total;
    }
    Ok(out)
}

/// Log-probabilities over an unmasked score vector.
pub fn log_softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let mut max = scores[0];
    for &s in scores {
        if s > max {
            max = s;
        }
    }
    let mut total = T::zero();
    for &s in scores {
        total += (s - max).exp();
    }
    let log_z = max + total.ln();
    scores.iter().map(|&s| s - log_z).collect()
}

/// Negative log-likelihood of `target` under softmax(logits), together with
/// the gradient wrt the logits (softmax minus one-hot).
pub fn cross_entropy<T: Scalar>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if target >= logits.len() {
        return Err(Error::Numeric(format!(
            "cross-entropy target {target} out of range for {} classes",
            logits.len()
        )));
    }
    let mask = vec![true; logits.len()];
    let mut grad = softmax(logits, &mask)?;
    let loss = -(grad[target].ln());
    grad[target] = grad[target] - T::one();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetry() {
        let p = softmax(&[0.0f64, 0.0], &[true, true]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_masked_entry_is_zero() {
        let p = softmax(&[5.0f64, 5.0, 5.0], &[true, true, false]).unwrap();
        assert_eq!(p[2], 0.0);
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_hand_values() {
        // exp(1), exp(2), exp(3) normalized
        let p = softmax(&[1.0f64, 2.0, 3.0], &[true; 3]).unwrap();
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        for (i, expect) in [(0, 1f64.exp() / z), (1, 2f64.exp() / z), (2, 3f64.exp() / z)] {
            assert!((p[i] - expect).abs() < 1e-12);
        }
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_all_masked_errors() {
        assert!(softmax(&[1.0f64, 2.0], &[false, false]).is_err());
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&[1.0f64, 2.0, 3.0], &[true; 3]).unwrap();
        let b = softmax(&[101.0f64, 102.0, 103.0], &[true; 3]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_entropy_symmetric_logits() {
        let (loss, grad) = cross_entropy(&[0.0f64, 0.0], 0).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert!((grad[0] - (-0.5)).abs() < 1e-12);
        assert!((grad[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_confident() {
        let (loss, _) = cross_entropy(&[10.0f64, -10.0], 0).unwrap();
        assert!(loss < 1e-8);
    }

    #[test]
    fn cross_entropy_out_of_range() {
        assert!(cross_entropy(&[0.0f64, 0.0], 2).is_err());
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let logits = [0.3f64, -1.2, 0.7, 0.1];
        let target = 2;
        let (_, grad) = cross_entropy(&logits, target).unwrap();
        let h = 1e-6;
        for i in 0..logits.len() {
            let mut plus = logits;
            plus[i] += h;
            let mut minus = logits;
            minus[i] -= h;
            let (lp, _) = cross_entropy(&plus, target).unwrap();
            let (lm, _) = cross_entropy(&minus, target).unwrap();
            let numeric = (lp - lm) / (2.0 * h);
            assert!(
                (grad[i] - numeric).abs() < 1e-8,
                "entry {i}: analytic {} vs numeric {numeric}",
                grad[i]
            );
        }
    }

    #[test]
    fn log_softmax_matches_softmax() {
        let scores = [0.5f64, -0.25, 2.0];
        let p = softmax(&scores, &[true; 3]).unwrap();
        let lp = log_softmax(&scores);
        for (a, b) in p.iter().zip(&lp) {
            assert!((a.ln() - b).abs() < 1e-12);
        }
    }
}
