use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: Vec<(Array2<f64>, Array2<f64>)>,
}

impl Adam {
    /// One moment pair per parameter, shaped like `shapes`.
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: shapes
                .iter()
                .map(|&s| (Array2::zeros(s), Array2::zeros(s)))
                .collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moment_shapes(&self) -> Vec<(usize, usize)> {
        self.moments.iter().map(|(m, _)| m.dim()).collect()
    }

    pub fn reset(&mut self) {
        self.step = 0;
        for (m, v) in &mut self.moments {
            m.fill(0.0);
            v.fill(0.0);
        }
    }

    /// Applies one update to every parameter in place.
    pub fn update(&mut self, params: &mut [&mut Array2<f64>], grads: &[Array2<f64>], lr: f64) {
        assert_eq!(params.len(), self.moments.len());
        assert_eq!(grads.len(), self.moments.len());
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for ((w, g), (m, v)) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            Zip::from(&mut **w)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
    }
}
