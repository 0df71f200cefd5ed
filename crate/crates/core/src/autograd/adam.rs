//! Bias-corrected Adam.

use super::{AutogradError, Tensor};
use crate::scalar::{real, Real};

/// Optimizer state over a fixed parameter list. Moment buffers are keyed by
/// position, so `step` must always receive the same parameters in the same
/// order. Not shareable across concurrent trainers.
pub struct AdamState<F: Real> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    t: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> AdamState<F> {
    pub fn new(lr: F, beta1: F, beta2: F, params: &[Tensor<F>]) -> Self {
        assert!(beta1 > F::zero() && beta1 < F::one(), "beta1 in (0,1)");
        assert!(beta2 > F::zero() && beta2 < F::one(), "beta2 in (0,1)");
        Self {
            lr,
            beta1,
            beta2,
            eps: real::<F>(1e-8),
            t: 0,
            m: params.iter().map(|p| vec![F::zero(); p.numel()]).collect(),
            v: params.iter().map(|p| vec![F::zero(); p.numel()]).collect(),
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// One update: `p -= lr * m_hat / (sqrt(v_hat) + eps)`. Parameters with
    /// no accumulated gradient are treated as having a zero gradient.
    pub fn step(&mut self, params: &[Tensor<F>]) -> Result<(), AutogradError> {
        if params.len() != self.m.len() {
            return Err(AutogradError::ShapeMismatch(format!(
                "adam state covers {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        let bc1 = F::one() - self.beta1.powi(self.t as i32);
        let bc2 = F::one() - self.beta2.powi(self.t as i32);
        let one = F::one();

        for (i, p) in params.iter().enumerate() {
            let grad = p.grad();
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            if m.len() != p.numel() {
                return Err(AutogradError::ShapeMismatch(format!(
                    "adam moment {} has {} entries, parameter has {}",
                    i,
                    m.len(),
                    p.numel()
                )));
            }
            let mut node = p.node.borrow_mut();
            match grad {
                Some(g) => {
                    if g.len() != m.len() {
                        return Err(AutogradError::ShapeMismatch(format!(
                            "gradient length {} vs parameter {}",
                            g.len(),
                            m.len()
                        )));
                    }
                    for j in 0..m.len() {
                        m[j] = self.beta1 * m[j] + (one - self.beta1) * g[j];
                        v[j] = self.beta2 * v[j] + (one - self.beta2) * g[j] * g[j];
                        let m_hat = m[j] / bc1;
                        let v_hat = v[j] / bc2;
                        node.values[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
                None => {
                    // Zero gradient: moments decay toward zero, the update is
                    // exactly zero, so values stay put.
                    for j in 0..m.len() {
                        m[j] = self.beta1 * m[j];
                        v[j] = self.beta2 * v[j];
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let p = Tensor::leaf(vec![1.0f64, -2.0, 0.5], &[3], true).unwrap();
        let loss = p
            .mul(&Tensor::constant(vec![3.0, -1.0, 2.0], &[3]).unwrap())
            .unwrap()
            .sum();
        loss.backward().unwrap();
        let g = p.grad().unwrap();
        let before = p.values();
        let mut adam = AdamState::new(0.01, 0.9, 0.999, std::slice::from_ref(&p));
        adam.step(std::slice::from_ref(&p)).unwrap();
        let after = p.values();
        for j in 0..3 {
            let expected = before[j] - 0.01 * g[j] / (g[j].abs() + 1e-8);
            assert!((after[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let p = Tensor::leaf(vec![1.0, 2.0], &[2], true).unwrap();
        let mut adam = AdamState::new(0.1, 0.9, 0.999, std::slice::from_ref(&p));
        for _ in 0..50 {
            adam.step(std::slice::from_ref(&p)).unwrap();
        }
        assert_eq!(p.values(), vec![1.0, 2.0]);
    }

    #[test]
    fn quadratic_descends_and_matches_scalar_recurrence() {
        // Minimize f(x) = x^2 from x = 1 with lr 0.1.
        let p = Tensor::leaf(vec![1.0f64], &[1], true).unwrap();
        let mut adam = AdamState::new(0.1, 0.9, 0.999, std::slice::from_ref(&p));
        for _ in 0..200 {
            p.zero_grad();
            let loss = p.mul(&p).unwrap().sum();
            loss.backward().unwrap();
            adam.step(std::slice::from_ref(&p)).unwrap();
        }
        let x = p.values()[0];
        assert!(x.abs() < 0.05, "x = {x}");

        let oracle =
            crate::reference::scalar_adam(1.0, |x| 2.0 * x, 0.1, 0.9, 0.999, 1e-8, 200);
        assert!((x - oracle).abs() < 1e-9, "{x} vs oracle {oracle}");
    }
}
