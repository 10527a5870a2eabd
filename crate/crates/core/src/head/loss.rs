use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = logits.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    pub gamma: f64,
    /// Per-class weights.
    pub alpha: Vec<f64>,
}

impl FocalConfig {
    pub fn new(gamma: f64, alpha: Vec<f64>) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Param(format!("focal gamma must be >= 0, got {gamma}")));
        }
        if alpha.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::Param("focal alpha weights must be >= 0".into()));
        }
        Ok(Self { gamma, alpha })
    }

    pub fn uniform(classes: usize, gamma: f64, alpha: f64) -> Result<Self> {
        Self::new(gamma, vec![alpha; classes])
    }
}

/// `-alpha_t (1 - p_t)^gamma log p_t` and its gradient with respect to the
/// logits.
pub fn focal_loss(logits: ArrayView1<f64>, label: usize, cfg: &FocalConfig) -> Result<(f64, Array1<f64>)> {
    let c = logits.len();
    if label >= c {
        return Err(Error::Param(format!("label {label} out of range for {c} classes")));
    }
    if cfg.alpha.len() != c {
        return Err(Error::DimMismatch(format!("{} focal weights for {c} classes", cfg.alpha.len())));
    }
    let p = softmax(logits);
    let pt = p[label];
    let alpha = cfg.alpha[label];
    let gamma = cfg.gamma;
    let log_pt = pt.max(1e-12).ln();
    let rest = 1.0 - pt;
    let loss = -alpha * rest.powf(gamma) * log_pt;

    // dL/dz_j = -alpha [(1-p_t)^g - g (1-p_t)^(g-1) p_t log p_t] (d_jt - p_j)
    let focus = if gamma == 0.0 || rest <= 0.0 {
        0.0
    } else {
        gamma * rest.powf(gamma - 1.0) * pt * log_pt
    };
    let coef = -alpha * (rest.powf(gamma) - focus);
    let mut grad = p.mapv(|pj| -coef * pj);
    grad[label] += coef;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use ndarray::array;

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841345).abs() < 1e-6);
        assert!((gelu(10.0) - 10.0).abs() < 1e-6);
        assert!(gelu(-10.0).abs() < 1e-6);
    }

    #[test]
    fn gelu_derivative_matches_differences() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let n = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((gelu_grad(x) - n).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn softmax_shift_invariant() {
        let z = array![0.3, -1.2, 2.0];
        let a = softmax(z.view());
        let b = softmax((&z + 17.5).view());
        assert!((a.sum() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn half_probability_example() {
        let cfg = FocalConfig::uniform(2, 2.0, 1.0).unwrap();
        let (loss, _) = focal_loss(array![0.0, 0.0].view(), 0, &cfg).unwrap();
        assert!((loss - 0.25 * 2f64.ln()).abs() < 1e-12);
        assert!((loss - 0.173287).abs() < 1e-6);
    }

    #[test]
    fn gamma_zero_is_cross_entropy() {
        let cfg = FocalConfig::uniform(4, 0.0, 1.0).unwrap();
        let mut rng = Rng::new(3);
        for _ in 0..100 {
            let z = Array1::from_shape_fn(4, |_| rng.uniform_range(-5.0, 5.0));
            let label = rng.below(4);
            let (loss, grad) = focal_loss(z.view(), label, &cfg).unwrap();
            let p = softmax(z.view());
            assert!((loss + p[label].ln()).abs() < 1e-12);
            for j in 0..4 {
                let expect = p[j] - if j == label { 1.0 } else { 0.0 };
                assert!((grad[j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn confident_prediction_has_no_loss() {
        let cfg = FocalConfig::uniform(3, 0.5, 1.0).unwrap();
        let (loss, grad) = focal_loss(array![800.0, 0.0, 0.0].view(), 0, &cfg).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn gradient_matches_differences() {
        let cfg = FocalConfig::new(2.0, vec![0.5, 1.0, 2.0]).unwrap();
        let z = array![0.2, -0.4, 1.1];
        for label in 0..3 {
            let (_, grad) = focal_loss(z.view(), label, &cfg).unwrap();
            for j in 0..3 {
                let mut up = z.clone();
                up[j] += 1e-6;
                let mut down = z.clone();
                down[j] -= 1e-6;
                let n = (focal_loss(up.view(), label, &cfg).unwrap().0
                    - focal_loss(down.view(), label, &cfg).unwrap().0)
                    / 2e-6;
                assert!((grad[j] - n).abs() < 1e-8);
            }
        }
    }
}
