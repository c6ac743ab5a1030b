//! Adam with bias correction, plus global-norm gradient clipping.

use super::DiffProbError;

pub const DEFAULT_LEARNING_RATE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize, learning_rate: f64) -> Self {
        Self { step: 0, m: vec![0.0; n], v: vec![0.0; n], learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One descent step on `params` for the gradient `grads` of a loss.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), DiffProbError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(DiffProbError::Shape { expected: self.m.len(), params: params.len(), grads: grads.len() });
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Rescales `grads` in place so its Euclidean norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut a = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        a.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut a = AdamState::new(3, 0.005);
        let mut p = vec![0.0; 3];
        a.step(&mut p, &[4.0, -0.01, 1e3]).unwrap();
        for (x, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((x - s * 0.005).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut a = AdamState::new(4, 0.005);
        let mut w = vec![3.0, -2.0, 0.5, 1.0];
        for _ in 0..10_000 {
            let g: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
            a.step(&mut w, &g).unwrap();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "{norm}");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut a = AdamState::new(2, 0.1);
        assert!(a.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![300.0, 400.0];
        assert_eq!(clip_global_norm(&mut g, 100.0), 500.0);
        assert!((g[0] - 60.0).abs() < 1e-12 && (g[1] - 80.0).abs() < 1e-12);
        let mut small = vec![1.0, 1.0];
        clip_global_norm(&mut small, 100.0);
        assert_eq!(small, vec![1.0, 1.0]);
    }
}
