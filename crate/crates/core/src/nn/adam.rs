use crate::error::{Error, Result};

use super::{Gradients, QNetwork};

/// Adaptive-moment optimizer over any list of flat tensors.
#[derive(Debug, Clone, PartialEq)]
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
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of `params` along `grads`. A non-finite gradient rejects
    /// the whole step and leaves parameters and moments untouched.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::ShapeMismatch("parameters and gradients differ in shape".into()));
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("gradient"));
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != grads.len() || self.m.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
            return Err(Error::ShapeMismatch("optimizer state belongs to other parameters".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, net: &mut QNetwork, grads: &Gradients) -> Result<()> {
        let g = grads.tensors();
        let mut p = net.tensors_mut();
        self.update(&mut p, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params_and_counts_step() {
        let mut opt = Adam::new(0.1);
        let mut x = [3.0];
        opt.update(&mut [&mut x[..]], &[&[0.0][..]]).unwrap();
        assert_eq!(x, [3.0]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn moves_against_constant_gradient() {
        let mut opt = Adam::new(0.01);
        let mut x = [0.0];
        for _ in 0..100 {
            opt.update(&mut [&mut x[..]], &[&[2.5][..]]).unwrap();
        }
        assert!(x[0] < -0.5);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut opt = Adam::new(0.01);
        let mut x = [1.0];
        assert!(matches!(
            opt.update(&mut [&mut x[..]], &[&[f64::INFINITY][..]]),
            Err(Error::NonFinite(_))
        ));
        assert_eq!((x, opt.steps()), ([1.0], 0));
    }
}
