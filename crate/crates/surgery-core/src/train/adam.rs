//! Adam with bias correction, plus global-norm gradient clipping.

use crate::model::ModelParams;
use crate::objective::GradBuffer;
use crate::tensor::Scalar;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ModelParams<T>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<T>> = params
            .buffers()
            .iter()
            .map(|b| vec![T::zero(); b.data.len()])
            .collect();
        Adam {
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update with the given learning rate; gradients are read as-is
    /// (clip first if clipping is wanted).
    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &GradBuffer<T>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let one_m_b1 = T::from_f64(1.0 - self.beta1);
        let one_m_b2 = T::from_f64(1.0 - self.beta2);

        for ((buf, g), (m, v)) in params
            .buffers_mut()
            .into_iter()
            .zip(grads.buffers())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..buf.data.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + one_m_b1 * gi;
                v[i] = b2 * v[i] + one_m_b2 * gi * gi;
                let m_hat = m[i].as_f64() / bc1;
                let v_hat = v[i].as_f64() / bc2;
                let delta = lr * m_hat / (v_hat.sqrt() + self.eps);
                buf.data[i] = buf.data[i] - T::from_f64(delta);
            }
        }
    }

    pub fn state(&self) -> (u64, &[Vec<T>], &[Vec<T>]) {
        (self.step, &self.m, &self.v)
    }

    pub fn restore(&mut self, step: u64, m: Vec<Vec<T>>, v: Vec<Vec<T>>) {
        self.step = step;
        self.m = m;
        self.v = v;
    }
}

/// Scales gradients so the global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<T: Scalar>(grads: &mut GradBuffer<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}
