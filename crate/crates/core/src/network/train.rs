//! Minibatch SGD on softmax cross-entropy.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;

use super::{argmax, Dataset, DenseNetwork};
use crate::error::{Error, Result};
use crate::seed::{self, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 0.05,
            batch: 32,
            epochs: 10,
            seed: 0,
        }
    }
}

/// Training until validation accuracy stalls: stop once the epoch-over-epoch
/// gain stays below `min_gain` for `patience` consecutive epochs, or after
/// `max_epochs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineTuneConfig {
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub max_epochs: usize,
    pub min_gain: f64,
    pub patience: usize,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            lr: 0.05,
            batch: 32,
            seed: 0,
            max_epochs: 20,
            min_gain: 0.0005,
            patience: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneReport {
    pub epochs: usize,
    pub initial_val_accuracy: f64,
    pub val_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Mean softmax cross-entropy of one logit vector, via log-sum-exp.
pub fn softmax_cross_entropy(logits: ArrayView1<f64>, label: usize) -> f64 {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

fn check_shapes(net: &DenseNetwork, dim: usize, classes: usize) -> Result<()> {
    if dim != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "dataset features vs network input",
            expected: net.input_dim(),
            got: dim,
        });
    }
    if classes != net.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "class count vs network output",
            expected: net.output_dim(),
            got: classes,
        });
    }
    Ok(())
}

/// Mean loss over the batch and its gradient with respect to every layer.
pub fn loss_and_gradients(
    net: &DenseNetwork,
    inputs: ArrayView2<f64>,
    labels: &[usize],
) -> Result<(f64, Vec<LayerGradient>)> {
    check_shapes(net, inputs.ncols(), net.output_dim())?;
    if inputs.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "batch inputs vs labels",
            expected: inputs.nrows(),
            got: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let layers = net.layers();
    let b = labels.len() as f64;

    // Keep every pre-activation and activation for the backward pass.
    let mut pre: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
    let mut post: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let z = match l {
            0 => layer.linear_batch(inputs),
            _ => layer.linear_batch(post[l - 1].view()),
        };
        let a = match layer.activation() {
            Some(act) => z.mapv(|v| act.eval(v)),
            None => z.clone(),
        };
        pre.push(z);
        post.push(a);
    }

    let logits = post.last().expect("network has layers");
    let mut loss = 0.0;
    let mut delta = Array2::zeros(logits.raw_dim());
    for (i, (row, &label)) in logits.axis_iter(Axis(0)).zip(labels).enumerate() {
        loss += softmax_cross_entropy(row, label);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exps = row.mapv(|v| (v - max).exp());
        let total = exps.sum();
        let mut d = delta.row_mut(i);
        d.assign(&(exps / total));
        d[label] -= 1.0;
    }
    loss /= b;
    delta /= b;

    let mut grads: Vec<LayerGradient> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        if let Some(act) = layer.activation() {
            Zip::from(&mut delta)
                .and(&pre[l])
                .for_each(|d, &z| *d *= act.derivative(z));
        }
        let input = if l == 0 { inputs } else { post[l - 1].view() };
        let gw = delta.t().dot(&input);
        let gb = delta.sum_axis(Axis(0));
        if l > 0 {
            delta = delta.dot(layer.weights());
        }
        grads.push(LayerGradient {
            weights: gw,
            bias: gb,
        });
    }
    grads.reverse();
    Ok((loss, grads))
}

fn run_epoch(
    net: &mut DenseNetwork,
    data: &Dataset,
    lr: f64,
    batch: usize,
    epoch: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for (bi, chunk) in order.chunks(batch).enumerate() {
        let x = data.inputs().select(Axis(0), chunk);
        let y: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
        let (loss, grads) = loss_and_gradients(net, x.view(), &y)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: bi });
        }
        total += loss * chunk.len() as f64;
        for (layer, g) in net.layers_mut().iter_mut().zip(grads) {
            let (w, b) = layer.params_mut();
            w.scaled_add(-lr, &g.weights);
            b.scaled_add(-lr, &g.bias);
        }
    }
    Ok(total / data.len() as f64)
}

fn check_training(net: &DenseNetwork, data: &Dataset, lr: f64, batch: usize) -> Result<()> {
    check_shapes(net, data.dim(), data.classes())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(Error::invalid(format!(
            "learning rate must be nonnegative, got {lr}"
        )));
    }
    Ok(())
}

pub fn train_sgd(net: &DenseNetwork, train: &Dataset, cfg: &SgdConfig) -> Result<DenseNetwork> {
    check_training(net, train, cfg.lr, cfg.batch)?;
    let mut net = net.clone();
    let mut rng = seed::rng(cfg.seed);
    for epoch in 0..cfg.epochs {
        run_epoch(&mut net, train, cfg.lr, cfg.batch, epoch, &mut rng)?;
    }
    Ok(net)
}

pub fn fine_tune(
    net: &DenseNetwork,
    train: &Dataset,
    val: &Dataset,
    cfg: &FineTuneConfig,
) -> Result<(DenseNetwork, FineTuneReport)> {
    check_training(net, train, cfg.lr, cfg.batch)?;
    let mut net = net.clone();
    let mut rng = seed::rng(cfg.seed);
    let initial = accuracy(&net, val)?;
    let mut history = Vec::new();
    let (mut prev, mut stalled) = (initial, 0);
    for epoch in 0..cfg.max_epochs {
        run_epoch(&mut net, train, cfg.lr, cfg.batch, epoch, &mut rng)?;
        let acc = accuracy(&net, val)?;
        history.push(acc);
        if acc - prev < cfg.min_gain {
            stalled += 1;
        } else {
            stalled = 0;
        }
        prev = acc;
        if stalled >= cfg.patience {
            break;
        }
    }
    let report = FineTuneReport {
        epochs: history.len(),
        initial_val_accuracy: initial,
        val_accuracy: history,
    };
    Ok((net, report))
}

/// Fraction of samples whose arg-max output equals the label.
pub fn accuracy(net: &DenseNetwork, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_shapes(net, data.dim(), data.classes())?;
    const CHUNK: usize = 2048;
    let mut correct = 0usize;
    let mut start = 0;
    while start < data.len() {
        let end = (start + CHUNK).min(data.len());
        let out = net.predict_batch(data.inputs().slice(s![start..end, ..]))?;
        correct += out
            .axis_iter(Axis(0))
            .zip(&data.labels()[start..end])
            .filter(|(row, &label)| argmax(row.view()) == label)
            .count();
        start = end;
    }
    Ok(correct as f64 / data.len() as f64)
}
