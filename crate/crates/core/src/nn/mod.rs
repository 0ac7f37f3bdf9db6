//! Dense two-branch Q-network with manual backpropagation.
//!
//! The picker features and the order features first pass through separate
//! rectified layers; their outputs are concatenated and fed through three more
//! rectified layers and a linear head with one output per action.

mod adam;
mod checkpoint;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use checkpoint::checkpoint_file_name;

use crate::error::{Error, Result};

/// Layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QNetworkSpec {
    pub picker_in: usize,
    pub order_in: usize,
    pub h_p: usize,
    pub h_o: usize,
    pub f1: usize,
    pub f2: usize,
    pub f3: usize,
    pub out: usize,
}

impl QNetworkSpec {
    pub fn for_aisles(n_aisles: usize) -> Self {
        Self {
            picker_in: 4,
            order_in: 2 * n_aisles,
            h_p: 64,
            h_o: 160,
            f1: 256,
            f2: 128,
            f3: 64,
            out: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [
            self.picker_in,
            self.order_in,
            self.h_p,
            self.h_o,
            self.f1,
            self.f2,
            self.f3,
            self.out,
        ];
        if w.contains(&0) {
            return Err(Error::InvalidConfig("all layer widths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.picker_in + self.order_in
    }

    /// `(fan_in, fan_out)` per layer: picker branch, order branch, three
    /// hidden layers, head.
    pub fn layer_shapes(&self) -> [(usize, usize); 6] {
        [
            (self.picker_in, self.h_p),
            (self.order_in, self.h_o),
            (self.h_p + self.h_o, self.f1),
            (self.f1, self.f2),
            (self.f2, self.f3),
            (self.f3, self.out),
        ]
    }
}

/// `y = x·w + b` with `w` stored fan_in × fan_out.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

fn relu(mut a: Array2<f64>) -> Array2<f64> {
    a.mapv_inplace(|v| v.max(0.0));
    a
}

/// Zeroes `grad` wherever the rectified output was not positive.
fn relu_back(grad: &mut Array2<f64>, out: &Array2<f64>) {
    ndarray::Zip::from(grad).and(out).for_each(|g, &o| {
        if o <= 0.0 {
            *g = 0.0;
        }
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    spec: QNetworkSpec,
    layers: Vec<Dense>,
}

/// Gradients with the same layout as [`QNetwork`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.w.as_slice().expect("standard layout"),
                    l.b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

struct Cache {
    x: Array2<f64>,
    hp: Array2<f64>,
    ho: Array2<f64>,
    z: Array2<f64>,
    h1: Array2<f64>,
    h2: Array2<f64>,
    h3: Array2<f64>,
}

impl QNetwork {
    /// Uniform ±1/√fan_in weights, zero biases.
    pub fn new(spec: QNetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layer_shapes()
            .iter()
            .map(|&(fi, fo)| {
                let bound = 1.0 / (fi as f64).sqrt();
                let mut d = Dense::zeros(fi, fo);
                d.w.mapv_inplace(|_| rng.gen_range(-bound..bound));
                d
            })
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn zeros(spec: QNetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layer_shapes().iter().map(|&(fi, fo)| Dense::zeros(fi, fo)).collect();
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &QNetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.w.as_slice_mut().expect("standard layout"),
                    l.b.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                values.len()
            )));
        }
        let mut it = values.iter();
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.spec.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} input features, got {}",
                self.spec.input_width(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    fn forward_cached(&self, x: &ArrayView2<f64>) -> (Array2<f64>, Cache) {
        let p = self.spec.picker_in;
        let xp = x.slice(s![.., ..p]);
        let xo = x.slice(s![.., p..]);
        let hp = relu(self.layers[0].apply(&xp));
        let ho = relu(self.layers[1].apply(&xo));
        let z = concatenate(Axis(1), &[hp.view(), ho.view()]).expect("same row count");
        let h1 = relu(self.layers[2].apply(&z.view()));
        let h2 = relu(self.layers[3].apply(&h1.view()));
        let h3 = relu(self.layers[4].apply(&h2.view()));
        let q = self.layers[5].apply(&h3.view());
        let cache = Cache {
            x: x.to_owned(),
            hp,
            ho,
            z,
            h1,
            h2,
            h3,
        };
        (q, cache)
    }

    /// Q-values for a batch of rows laid out as picker features then order features.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.forward_cached(&x).0)
    }

    pub fn forward(&self, picker: &[f64], orders: &[f64]) -> Result<Vec<f64>> {
        if picker.len() != self.spec.picker_in || orders.len() != self.spec.order_in {
            return Err(Error::ShapeMismatch(format!(
                "expected {}+{} features, got {}+{}",
                self.spec.picker_in,
                self.spec.order_in,
                picker.len(),
                orders.len()
            )));
        }
        let row: Vec<f64> = picker.iter().chain(orders).copied().collect();
        let x = Array2::from_shape_vec((1, row.len()), row).expect("one row");
        Ok(self.forward_batch(x.view())?.row(0).to_vec())
    }

    fn backward(&self, cache: &Cache, dq: Array2<f64>) -> Gradients {
        let grad = |input: &Array2<f64>, d: &Array2<f64>| Dense {
            w: input.t().dot(d),
            b: d.sum_axis(Axis(0)),
        };
        let p = self.spec.picker_in;
        let g5 = grad(&cache.h3, &dq);
        let mut d3 = dq.dot(&self.layers[5].w.t());
        relu_back(&mut d3, &cache.h3);
        let g4 = grad(&cache.h2, &d3);
        let mut d2 = d3.dot(&self.layers[4].w.t());
        relu_back(&mut d2, &cache.h2);
        let g3 = grad(&cache.h1, &d2);
        let mut d1 = d2.dot(&self.layers[3].w.t());
        relu_back(&mut d1, &cache.h1);
        let g2 = grad(&cache.z, &d1);
        let dz = d1.dot(&self.layers[2].w.t());
        let mut dhp = dz.slice(s![.., ..self.spec.h_p]).to_owned();
        let mut dho = dz.slice(s![.., self.spec.h_p..]).to_owned();
        relu_back(&mut dhp, &cache.hp);
        relu_back(&mut dho, &cache.ho);
        let xp = cache.x.slice(s![.., ..p]).to_owned();
        let xo = cache.x.slice(s![.., p..]).to_owned();
        let g0 = grad(&xp, &dhp);
        let g1 = grad(&xo, &dho);
        Gradients {
            layers: vec![g0, g1, g2, g3, g4, g5],
        }
    }

    /// Gradient of `sum(dq ⊙ Q(x))` with respect to every parameter.
    pub fn vjp(&self, x: ArrayView2<f64>, dq: ArrayView2<f64>) -> Result<Gradients> {
        self.check_input(&x)?;
        if dq.dim() != (x.nrows(), self.spec.out) {
            return Err(Error::ShapeMismatch("output gradient shape".into()));
        }
        let (_, cache) = self.forward_cached(&x);
        Ok(self.backward(&cache, dq.to_owned()))
    }

    /// Huber loss between `Q(x_i, a_i)` and `targets_i`, averaged over the
    /// batch, and its parameter gradient.
    pub fn td_loss_and_grads(
        &self,
        x: ArrayView2<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradients)> {
        self.check_input(&x)?;
        let b = x.nrows();
        if actions.len() != b || targets.len() != b {
            return Err(Error::ShapeMismatch("batch, actions and targets differ in length".into()));
        }
        if actions.iter().any(|&a| a >= self.spec.out) {
            return Err(Error::ShapeMismatch("action index out of range".into()));
        }
        let (q, cache) = self.forward_cached(&x);
        let pred: Vec<f64> = actions.iter().enumerate().map(|(i, &a)| q[[i, a]]).collect();
        let (loss, dpred) = huber_loss(&pred, targets)?;
        let mut dq = Array2::zeros((b, self.spec.out));
        for (i, &a) in actions.iter().enumerate() {
            dq[[i, a]] = dpred[i];
        }
        Ok((loss, self.backward(&cache, dq)))
    }

    /// `self ← tau·online + (1 − tau)·self`, elementwise.
    pub fn soft_blend(&mut self, online: &QNetwork, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidInput(format!("blend rate must lie in (0, 1], got {tau}")));
        }
        if self.spec != online.spec {
            return Err(Error::ShapeMismatch("networks have different layouts".into()));
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.w.zip_mut_with(&o.w, |a, &b| *a = tau * b + (1.0 - tau) * *a);
            t.b.zip_mut_with(&o.b, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
        Ok(())
    }
}

/// Mean Huber loss with threshold 1 and its gradient with respect to `pred`.
pub fn huber_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let e = p - t;
        if e.abs() <= 1.0 {
            loss += 0.5 * e * e;
            grad.push(e / n);
        } else {
            loss += e.abs() - 0.5;
            grad.push(e.signum() / n);
        }
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_outputs_head_bias() {
        let spec = QNetworkSpec::for_aisles(10);
        let mut net = QNetwork::zeros(spec).unwrap();
        net.layers_mut()[5].b = Array1::from(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let q = net.forward(&[1.0, 2.0, 3.0, 4.0], &[0.5; 20]).unwrap();
        assert_eq!(q, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn huber_values() {
        let (l, g) = huber_loss(&[1.0], &[1.0]).unwrap();
        assert_eq!((l, g), (0.0, vec![0.0]));
        assert_eq!(huber_loss(&[0.5], &[0.0]).unwrap().0, 0.125);
        assert_eq!(huber_loss(&[2.0], &[0.0]).unwrap().0, 1.5);
        assert!(huber_loss(&[1.0], &[]).is_err());
    }

    #[test]
    fn input_shape_checked() {
        let net = QNetwork::new(QNetworkSpec::for_aisles(3), 0).unwrap();
        assert!(matches!(net.forward(&[0.0; 4], &[0.0; 5]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            net.forward(&[f64::NAN, 0.0, 0.0, 0.0], &[0.0; 6]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn blend_rate_validated() {
        let spec = QNetworkSpec::for_aisles(2);
        let mut a = QNetwork::zeros(spec).unwrap();
        let b = QNetwork::new(spec, 1).unwrap();
        assert!(a.soft_blend(&b, 0.0).is_err());
        a.soft_blend(&b, 1.0).unwrap();
        assert_eq!(a, b);
    }
}
