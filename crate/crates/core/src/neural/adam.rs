use super::{Mlp, NeuralError, Scalar};

/// Bias-corrected Adam with 64-bit moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; param_count], v: vec![0.0; param_count], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// The update that would be added to each parameter, advancing the moments.
    pub fn deltas(&mut self, grads: &[f64]) -> Result<Vec<f64>, NeuralError> {
        if grads.len() != self.m.len() {
            return Err(NeuralError::Dimension { expected: self.m.len(), got: grads.len() });
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        Ok(grads
            .iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&g, (m, v))| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                -self.lr * m_hat / (v_hat.sqrt() + self.eps)
            })
            .collect())
    }

    pub fn step<T: Scalar>(&mut self, net: &mut Mlp<T>, grads: &[f64]) -> Result<(), NeuralError> {
        let deltas = self.deltas(grads)?;
        for (p, d) in net.params_mut().iter_mut().zip(deltas) {
            if d != 0.0 {
                *p = T::from_f64(p.as_f64() + d);
            }
        }
        Ok(())
    }
}
