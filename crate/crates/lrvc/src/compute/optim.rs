use crate::compute::params::ParamStore;
use crate::error::{Error, Result};

/// Adam-style adaptive-moment optimizer state: per-parameter first and
/// second moment buffers plus the shared step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: Vec<Vec<f32>>,
    second_moment: Vec<Vec<f32>>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, params: &ParamStore) -> Result<Self> {
        if learning_rate <= 0.0 {
            return Err(Error::Argument(format!(
                "learning rate must be > 0, got {learning_rate}"
            )));
        }
        Ok(OptimizerState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: params.iter().map(|p| vec![0.0; p.value.len()]).collect(),
            second_moment: params.iter().map(|p| vec![0.0; p.value.len()]).collect(),
        })
    }

    pub fn moments(&self, index: usize) -> (&[f32], &[f32]) {
        (&self.first_moment[index], &self.second_moment[index])
    }

    pub(crate) fn restore_moments(&mut self, index: usize, m: Vec<f32>, v: Vec<f32>) {
        self.first_moment[index] = m;
        self.second_moment[index] = v;
    }

    /// One update over all parameters. Gradients must already be populated;
    /// they are left untouched (the caller zeroes them between steps).
    pub fn apply(&mut self, params: &mut ParamStore) -> Result<()> {
        for p in params.iter() {
            if !p.grad.all_finite() {
                return Err(Error::Training(format!(
                    "non-finite gradient in parameter {}",
                    p.name
                )));
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let lr = self.learning_rate as f32;
        let eps = self.epsilon as f32;
        let (bc1, bc2) = (bc1 as f32, bc2 as f32);

        for (i, p) in params.iter_mut().enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            let grads = p.grad.data().to_vec();
            for ((mi, vi), (&g, w)) in m
                .iter_mut()
                .zip(v.iter_mut())
                .zip(grads.iter().zip(p.value.data_mut()))
            {
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
