//! Dense feed-forward networks: representation, forward pass, training and I/O.

mod dataset;
mod idx;
mod io;
mod train;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::seed;

pub use dataset::Dataset;
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, load_mnist, MnistSplit};
pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use train::{
    accuracy, fine_tune, loss_and_gradients, softmax_cross_entropy, train_sgd, FineTuneConfig,
    FineTuneReport, LayerGradient, SgdConfig,
};

/// One affine map followed by an optional activation. Row `j` of `weights`
/// is the incoming weight vector of output neuron `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Array2<f64>,
    bias: Array1<f64>,
    activation: Option<Activation>,
}

impl DenseLayer {
    pub fn new(
        weights: Array2<f64>,
        bias: Array1<f64>,
        activation: Option<Activation>,
    ) -> Result<Self> {
        if bias.len() != weights.nrows() {
            return Err(Error::DimensionMismatch {
                context: "layer bias length",
                expected: weights.nrows(),
                got: bias.len(),
            });
        }
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::invalid(
                "layer must have at least one input and one output",
            ));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Option<Activation> {
        self.activation
    }

    pub fn in_units(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_units(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Pre-activation `Wx + b`.
    pub fn linear(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&x) + &self.bias
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut z = self.linear(x);
        if let Some(act) = self.activation {
            z.mapv_inplace(|v| act.eval(v));
        }
        z
    }

    /// Batched pre-activation, one sample per row.
    pub fn linear_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }

    pub fn apply_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = self.linear_batch(x);
        if let Some(act) = self.activation {
            z.mapv_inplace(|v| act.eval(v));
        }
        z
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Array2<f64>, &mut Array1<f64>) {
        (&mut self.weights, &mut self.bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
}

impl DenseNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_units() != pair[1].in_units() {
                return Err(Error::DimensionMismatch {
                    context: "layer chaining",
                    expected: pair[0].out_units(),
                    got: pair[1].in_units(),
                });
            }
        }
        Ok(DenseNetwork { layers })
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero biases,
    /// `hidden` on every layer except the last, which emits raw logits.
    pub fn random(sizes: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("bad layer sizes {sizes:?}")));
        }
        let mut rng = seed::rng(seed);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    rng.random_range(-limit..limit)
                });
                let act = (l != last).then_some(hidden);
                DenseLayer::new(weights, Array1::zeros(fan_out), act)
            })
            .collect::<Result<Vec<_>>>()?;
        DenseNetwork::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<DenseLayer> {
        self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_units()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_units()
    }

    /// Layer widths including the input, e.g. `[784, 300, 100, 10]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(DenseLayer::out_units))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Output of every layer in order; the last entry is the network output.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<Array1<f64>>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut outputs: Vec<Array1<f64>> = Vec::with_capacity(self.layers.len());
        let input = ArrayView1::from(x);
        for layer in &self.layers {
            let next = match outputs.last() {
                Some(prev) => layer.apply(prev.view()),
                None => layer.apply(input),
            };
            outputs.push(next);
        }
        Ok(outputs)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Array1<f64>> {
        Ok(self.forward(x)?.pop().expect("network has layers"))
    }

    /// Network output for a batch with one sample per row.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut out = self.layers[0].apply_batch(x);
        for layer in &self.layers[1..] {
            out = layer.apply_batch(out.view());
        }
        Ok(out)
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>], dim: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((rows.len(), dim));
    for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(rows) {
        if src.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "query vector",
                expected: dim,
                got: src.len(),
            });
        }
        dst.assign(&ArrayView1::from(src.as_slice()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::StandardNormal;

    #[test]
    fn identity_relu_layer() {
        let layer = DenseLayer::new(
            array![[1.0, 0.0], [0.0, 1.0]],
            array![0.0, 0.0],
            Some(Activation::Relu),
        )
        .unwrap();
        let net = DenseNetwork::new(vec![layer]).unwrap();
        assert_eq!(net.predict(&[1.0, -1.0]).unwrap(), array![1.0, 0.0]);
    }

    #[test]
    fn zero_weights_emit_activated_bias() {
        let layer = DenseLayer::new(
            Array2::zeros((3, 2)),
            array![-1.0, 0.0, 2.0],
            Some(Activation::Sigmoid),
        )
        .unwrap();
        let net = DenseNetwork::new(vec![layer]).unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0]] {
            let y = net.predict(&x).unwrap();
            for (got, b) in y.iter().zip([-1.0, 0.0, 2.0]) {
                assert_eq!(*got, Activation::Sigmoid.eval(b));
            }
        }
    }

    fn random_net(sizes: &[usize], acts: &[Option<Activation>], seed: u64) -> DenseNetwork {
        let mut rng = seed::rng(seed);
        let layers = sizes
            .windows(2)
            .zip(acts)
            .map(|(w, &a)| {
                let weights =
                    Array2::from_shape_simple_fn((w[1], w[0]), || rng.sample(StandardNormal));
                let bias = Array1::from_shape_simple_fn(w[1], || rng.sample(StandardNormal));
                DenseLayer::new(weights, bias, a).unwrap()
            })
            .collect();
        DenseNetwork::new(layers).unwrap()
    }

    #[test]
    fn forward_matches_hand_rolled_chain() {
        let acts = [Some(Activation::Relu), Some(Activation::Softplus), None];
        let net = random_net(&[4, 6, 5, 3], &acts, 11);
        let x = [0.3, -1.2, 0.7, 2.0];
        let mut v = x.to_vec();
        for layer in net.layers() {
            let w = layer.weights();
            v = (0..w.nrows())
                .map(|r| {
                    let z: f64 =
                        (0..w.ncols()).map(|c| w[[r, c]] * v[c]).sum::<f64>() + layer.bias()[r];
                    layer.activation().map_or(z, |a| a.eval(z))
                })
                .collect();
        }
        let got = net.predict(&x).unwrap();
        for (a, b) in got.iter().zip(&v) {
            assert!((a - b).abs() < 1e-10);
        }
        let batch = net
            .predict_batch(ArrayView2::from_shape((1, 4), &x).unwrap())
            .unwrap();
        for (a, b) in batch.row(0).iter().zip(&v) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_network_collapses_to_single_affine_map() {
        let net = random_net(&[5, 4, 6, 2], &[None, None, None], 3);
        let mut w = Array2::<f64>::eye(5);
        let mut b = Array1::<f64>::zeros(5);
        for layer in net.layers() {
            b = layer.weights().dot(&b) + layer.bias();
            w = layer.weights().dot(&w);
        }
        let mut rng = seed::rng(99);
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
            let direct = w.dot(&ArrayView1::from(&x)) + &b;
            let got = net.predict(&x).unwrap();
            for (a, c) in got.iter().zip(direct.iter()) {
                assert!((a - c).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn shape_errors() {
        assert!(DenseLayer::new(Array2::zeros((2, 3)), Array1::zeros(3), None).is_err());
        let a = DenseLayer::new(Array2::zeros((2, 3)), Array1::zeros(2), None).unwrap();
        let b = DenseLayer::new(Array2::zeros((4, 3)), Array1::zeros(4), None).unwrap();
        assert!(DenseNetwork::new(vec![a.clone(), b]).is_err());
        let net = DenseNetwork::new(vec![a]).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2,
                ..
            })
        ));
    }

    #[test]
    fn glorot_init_is_bounded_and_seeded() {
        let net = DenseNetwork::random(&[784, 300, 100, 10], Activation::Relu, 1).unwrap();
        assert_eq!(net.param_count(), 266_610);
        assert_eq!(net.widths(), vec![784, 300, 100, 10]);
        let limit = (6.0f64 / 1084.0).sqrt();
        assert!(net.layers()[0].weights().iter().all(|w| w.abs() <= limit));
        assert_eq!(net.layers()[2].activation(), None);
        assert_eq!(
            net,
            DenseNetwork::random(&[784, 300, 100, 10], Activation::Relu, 1).unwrap()
        );
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(array![1.0, 3.0, 3.0].view()), 1);
        assert_eq!(argmax(array![0.0, 0.0].view()), 0);
    }
}
