//! Small fully connected networks with hand-written backpropagation, enough
//! for the autoencoder and VAE baselines.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::Tanh => z.tanh(),
            Self::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Self::Tanh => 1.0 - y * y,
            Self::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-scaled Gaussian weights, zero bias.
    pub fn new<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let std = (2.0 / (inputs + outputs) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid std");
        Self {
            weights: DMatrix::from_fn(outputs, inputs, |_, _| normal.sample(rng)),
            bias: DVector::zeros(outputs),
            activation,
        }
    }

    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.weights * x + &self.bias).map(|z| self.activation.apply(z))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer parameter gradients.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (DMatrix::zeros(l.weights.nrows(), l.weights.ncols()), DVector::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &Self) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|x| x.is_finite()))
    }
}

impl Mlp {
    /// Layers of the given widths; `activations[i]` applies after layer `i`.
    pub fn new<R: Rng>(widths: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert_eq!(widths.len(), activations.len() + 1);
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| Dense::new(w[0], w[1], a, rng))
            .collect();
        Self { layers }
    }

    /// Outputs of every layer, starting with the input itself.
    pub fn forward_trace(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut trace = vec![x.clone()];
        for layer in &self.layers {
            let next = layer.forward(trace.last().expect("non-empty"));
            trace.push(next);
        }
        trace
    }

    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        self.forward_trace(x).pop().expect("non-empty")
    }

    /// Gradients of a loss whose derivative w.r.t. the network output is
    /// `grad_out`, plus the derivative w.r.t. the input.
    pub fn backward(&self, trace: &[DVector<f64>], grad_out: &DVector<f64>) -> (Gradients, DVector<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &trace[i + 1];
            let pre = delta.component_mul(&out.map(|y| layer.activation.derivative_from_output(y)));
            grads.push((&pre * trace[i].transpose(), pre.clone()));
            delta = layer.weights.tr_mul(&pre);
        }
        grads.reverse();
        (Gradients { layers: grads }, delta)
    }

    /// `θ ← θ - lr · g`.
    pub fn apply(&mut self, grads: &Gradients, lr: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights -= gw * lr;
            layer.bias -= gb * lr;
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bias.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = seeding::rng(5);
        let net = Mlp::new(&[3, 4, 2], &[Activation::Tanh, Activation::Identity], &mut rng);
        let x = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        let target = DVector::from_vec(vec![0.5, -1.0]);
        let loss = |n: &Mlp| (n.forward(&x) - &target).norm_squared();
        let trace = net.forward_trace(&x);
        let grad_out = (trace.last().unwrap() - &target) * 2.0;
        let (grads, _) = net.backward(&trace, &grad_out);
        let h = 1e-6;
        for l in 0..2 {
            for idx in 0..net.layers[l].weights.len() {
                let mut plus = net.clone();
                plus.layers[l].weights[idx] += h;
                let mut minus = net.clone();
                minus.layers[l].weights[idx] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                assert!((numeric - grads.layers[l].0[idx]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = seeding::rng(8);
        let net = Mlp::new(&[2, 3, 1], &[Activation::Tanh, Activation::Tanh], &mut rng);
        let x = DVector::from_vec(vec![0.1, 0.4]);
        let trace = net.forward_trace(&x);
        let (_, gx) = net.backward(&trace, &DVector::from_vec(vec![1.0]));
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let numeric = (net.forward(&xp)[0] - net.forward(&xm)[0]) / (2.0 * h);
            assert!((numeric - gx[i]).abs() < 1e-8);
        }
    }
}
