use serde::{Deserialize, Serialize};

use crate::model::Tensors;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub settings: AdamSettings,
    m: Tensors<T>,
    v: Tensors<T>,
    t: u32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(settings: AdamSettings, d: usize, h: usize, o: usize) -> Self {
        Self {
            settings,
            m: Tensors::zeros(d, h, o),
            v: Tensors::zeros(d, h, o),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }

    /// Applies one update of `params` against `grad`.
    pub fn step(&mut self, params: &mut Tensors<T>, grad: &Tensors<T>) {
        self.t += 1;
        let s = self.settings;
        let b1 = T::lit(s.beta1);
        let b2 = T::lit(s.beta2);
        let one = T::one();
        let c1 = one - T::lit(s.beta1.powi(self.t as i32));
        let c2 = one - T::lit(s.beta2.powi(self.t as i32));
        let lr = T::lit(s.learning_rate);
        let eps = T::lit(s.epsilon);
        let [p0, p1, p2, p3] = params.buffers_mut();
        let [m0, m1, m2, m3] = self.m.buffers_mut();
        let [v0, v1, v2, v3] = self.v.buffers_mut();
        let g = grad.buffers();
        for ((p, m), (v, g)) in [p0, p1, p2, p3]
            .into_iter()
            .zip([m0, m1, m2, m3])
            .zip([v0, v1, v2, v3].into_iter().zip(g))
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
