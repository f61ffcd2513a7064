//! Adam optimiser with bias-corrected first and second moments.

/// Optimiser state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(param_count: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut adam = Adam::new(3, 0.1, 0.9, 0.999, 1e-8);
        let mut params = vec![1.0, -2.0, 0.5];
        adam.step(&mut params, &[0.0; 3]);
        assert_eq!(params, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn descends_a_quadratic() {
        // Minimise (p - 3)^2; gradient 2(p - 3).
        let mut adam = Adam::new(1, 0.1, 0.9, 0.999, 1e-8);
        let mut p = vec![0.0];
        for _ in 0..500 {
            let g = 2.0 * (p[0] - 3.0);
            adam.step(&mut p, &[g]);
        }
        assert!((p[0] - 3.0).abs() < 1e-2, "converged to {}", p[0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate_magnitude() {
        // With bias correction the first update is lr * sign(g).
        let mut adam = Adam::new(1, 0.05, 0.9, 0.999, 1e-8);
        let mut p = vec![0.0];
        adam.step(&mut p, &[12.34]);
        assert!((p[0] + 0.05).abs() < 1e-6);
    }
}
