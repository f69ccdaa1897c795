use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};

/// Adaptive-moment optimizer.
///
/// ```text
/// m <- b1 m + (1 - b1) g
/// v <- b2 v + (1 - b2) g^2
/// p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Moments for one tensor per slice in `sizes`.
    pub fn for_tensors(lr: f64, sizes: &[usize]) -> Self {
        let mut a = Adam::new(lr);
        a.m = sizes.iter().map(|&n| vec![0.0; n]).collect();
        a.v = a.m.clone();
        a
    }

    pub fn for_net(lr: f64, net: &Mlp) -> Self {
        let sizes: Vec<usize> = net
            .layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        Adam::for_tensors(lr, &sizes)
    }

    /// Applies one update to raw parameter tensors.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::domain(
                "optimizer state does not match parameter layout",
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::domain(format!(
                    "tensor {k}: optimizer shape mismatch"
                )));
            }
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }

    pub fn step_net(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(Error::domain("gradient layout does not match network"));
        }
        let mut params: Vec<&mut [f64]> = Vec::with_capacity(2 * net.layers.len());
        for l in &mut net.layers {
            params.push(l.weights.as_slice_mut().expect("standard layout"));
            params.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        let mut owned = Vec::with_capacity(2 * grads.layers.len());
        for g in &grads.layers {
            let w = g.weights.as_standard_layout();
            owned.push(w.into_owned().into_raw_vec_and_offset().0);
            owned.push(g.bias.to_vec());
        }
        let views: Vec<&[f64]> = owned.iter().map(Vec::as_slice).collect();
        self.update(&mut params, &views)
    }
}
