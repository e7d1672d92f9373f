//! Adam optimizer over a flat parameter vector.

use super::real::Real;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![T::ZERO; n_params],
            v: vec![T::ZERO; n_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. Elementwise, so the parallel split
    /// cannot change the result.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one_b1 = T::from_f64(1.0 - self.beta1);
        let one_b2 = T::from_f64(1.0 - self.beta2);
        let corr1 = T::from_f64(1.0 / (1.0 - self.beta1.powi(self.step as i32)));
        let corr2 = T::from_f64(1.0 / (1.0 - self.beta2.powi(self.step as i32)));
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(self.eps);

        const PAR_CHUNK: usize = 1 << 16;
        params
            .par_chunks_mut(PAR_CHUNK)
            .zip(grads.par_chunks(PAR_CHUNK))
            .zip(self.m.par_chunks_mut(PAR_CHUNK))
            .zip(self.v.par_chunks_mut(PAR_CHUNK))
            .for_each(|(((p, g), m), v)| {
                for i in 0..p.len() {
                    let gi = g[i];
                    m[i] = b1 * m[i] + one_b1 * gi;
                    v[i] = b2 * v[i] + one_b2 * gi * gi;
                    let mhat = m[i] * corr1;
                    let vhat = v[i] * corr2;
                    p[i] -= lr * mhat / (vhat.sqrt() + eps);
                }
            });
    }
}
