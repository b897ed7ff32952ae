use super::{NeuralError, ParamSet};

/// The Adam optimizer with the usual defaults
/// (`beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`).
///
/// Moment buffers are keyed by parameter position, so one `Adam` instance
/// must stay paired with one `ParamSet` for its lifetime.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    /// Applies one update from the accumulated gradients, then clears them.
    ///
    /// If any gradient (including one on a frozen parameter) is non-finite,
    /// no parameter is touched and the offending parameter is reported.
    /// Frozen parameters are skipped entirely: no value update, no moment
    /// update.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<(), NeuralError> {
        for p in params.iter() {
            if p.grad.data.iter().any(|g| !g.is_finite()) {
                return Err(NeuralError::NonFiniteGradient { name: p.name.clone() });
            }
        }
        while self.m.len() < params.len() {
            let dim = params.get(self.m.len()).value.len();
            self.m.push(vec![0.0; dim]);
            self.v.push(vec![0.0; dim]);
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for id in 0..params.len() {
            let p = params.get_mut(id);
            if p.trainable {
                let (m, v) = (&mut self.m[id], &mut self.v[id]);
                for j in 0..p.value.len() {
                    let g = p.grad.data[j];
                    m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                    v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                    let m_hat = m[j] / bc1;
                    let v_hat = v[j] / bc2;
                    p.value.data[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
            p.grad.data.iter_mut().for_each(|g| *g = 0.0);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::Tensor;
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With constant gradient 1, bias correction makes the very first
        // Adam update equal lr / (1 + eps) up to eps.
        let mut params = ParamSet::new();
        let a = params.add("a", Tensor::vector(vec![0.0]), true);
        params.get_mut(a).grad.data[0] = 1.0;
        let mut adam = Adam::new(1e-3);
        adam.step(&mut params).unwrap();
        let moved = -params.get(a).value.data[0];
        assert!((moved - 1e-3).abs() < 1e-3 * 1e-6, "moved {moved}");
    }

    #[test]
    fn frozen_parameters_never_move() {
        let mut params = ParamSet::new();
        let frozen = params.add("frozen", Tensor::vector(vec![1.0, 2.0]), false);
        let live = params.add("live", Tensor::vector(vec![1.0, 2.0]), true);
        let mut adam = Adam::new(0.1);
        for _ in 0..10 {
            params.get_mut(frozen).grad.data = vec![1.0, -1.0];
            params.get_mut(live).grad.data = vec![1.0, -1.0];
            adam.step(&mut params).unwrap();
        }
        assert_eq!(params.get(frozen).value.data, vec![1.0, 2.0]);
        assert_ne!(params.get(live).value.data, vec![1.0, 2.0]);
    }

    #[test]
    fn non_finite_gradient_aborts_with_name() {
        let mut params = ParamSet::new();
        let a = params.add("good", Tensor::vector(vec![0.5]), true);
        let b = params.add("bad", Tensor::vector(vec![0.5]), true);
        params.get_mut(a).grad.data[0] = 1.0;
        params.get_mut(b).grad.data[0] = f64::NAN;
        let mut adam = Adam::new(0.1);
        let err = adam.step(&mut params).unwrap_err();
        assert_eq!(err, NeuralError::NonFiniteGradient { name: "bad".to_string() });
        // Nothing was applied, not even to the healthy parameter.
        assert_eq!(params.get(a).value.data, vec![0.5]);
    }

    #[test]
    fn gradients_are_cleared_after_step() {
        let mut params = ParamSet::new();
        let a = params.add("a", Tensor::vector(vec![0.0]), true);
        params.get_mut(a).grad.data[0] = 2.5;
        Adam::new(1e-3).step(&mut params).unwrap();
        assert_eq!(params.get(a).grad.data, vec![0.0]);
    }
}
