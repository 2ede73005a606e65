use crate::error::{check_len, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One update of `theta` in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        check_len(self.m.len(), theta.len())?;
        check_len(self.m.len(), grad.len())?;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((w, &g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_theta() {
        let mut s = AdamState::new(3, 1e-3);
        let mut theta = vec![1.0, -2.0, 0.5];
        s.step(&mut theta, &[0.0; 3]).unwrap();
        assert_eq!(theta, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn constant_gradient_steps_by_lr() {
        // With g constant, m_hat = g and v_hat = g^2 exactly, so every
        // step is lr * g / (|g| + eps).
        let lr = 1e-3;
        let mut s = AdamState::new(1, lr);
        let mut theta = vec![0.0];
        let mut prev = 0.0;
        for t in 1..=200 {
            s.step(&mut theta, &[1.0]).unwrap();
            let step = prev - theta[0];
            prev = theta[0];
            let expected = lr / (1.0 + 1e-8);
            assert!((step - expected).abs() < 1e-15 * t as f64, "t={t} step={step}");
        }
    }

    #[test]
    fn pure_given_inputs() {
        let mut a = AdamState::new(2, 0.01);
        let mut b = a.clone();
        let (mut ta, mut tb) = (vec![0.3, 0.1], vec![0.3, 0.1]);
        a.step(&mut ta, &[0.2, -1.0]).unwrap();
        b.step(&mut tb, &[0.2, -1.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn length_mismatch_is_error() {
        let mut s = AdamState::new(2, 0.01);
        assert!(s.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
