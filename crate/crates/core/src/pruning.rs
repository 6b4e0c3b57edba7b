//! Layer-wise neural pruning.
//!
//! To prune layer `i`, its neurons become the weighted points of a coreset
//! problem: point `j` is row `j` of layer `i` with the bias appended
//! (`p̃ⱼ = (pⱼ, bⱼ)`), and consumer `c` of layer `i+1` weighs it by
//! `W_{i+1}[c, j]`. Queries are augmented the same way (`x̃ = (x, 1)`), so
//! `p̃ⱼᵀx̃ = pⱼᵀx + bⱼ` and `‖x̃‖ ≤ √(β² + 1)`. The selected rows survive in
//! layer `i`; layer `i+1` keeps only the matching columns, replaced by the
//! coreset weights `u_c`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::Serialize;

use crate::activation::Activation;
use crate::baselines::BaselineScheme;
use crate::error::{Error, Result};
use crate::network::{DenseLayer, DenseNetwork};
use crate::sampler::{coreset_layer, sample_size, sensitivity_distribution, Coreset};
use crate::seed::derive_seed;
use crate::weighted::{WeightedPoint, WeightedSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Coreset,
    Baseline(BaselineScheme),
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Coreset => "coreset",
            Scheme::Baseline(b) => b.name(),
        }
    }

    /// Selects points from `set`; `beta` is the (augmented) query radius.
    pub fn select(
        &self,
        set: &WeightedSet,
        m: usize,
        act: Activation,
        beta: f64,
        seed: u64,
    ) -> Result<Coreset> {
        match self {
            Scheme::Coreset => coreset_layer(set, m, act, beta, seed),
            Scheme::Baseline(b) => b.select(set, m, seed),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "coreset" {
            return Ok(Scheme::Coreset);
        }
        s.parse::<BaselineScheme>()
            .map(Scheme::Baseline)
            .map_err(|_| Error::invalid(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    #[default]
    BottomUp,
    TopDown,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bottom_up" => Ok(Direction::BottomUp),
            "top_down" => Ok(Direction::TopDown),
            other => Err(Error::invalid(format!("unknown direction `{other}`"))),
        }
    }
}

/// How many samples to draw for one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerBudget {
    Samples(usize),
    /// Derive `m` from the additive-error bound with the layer's total sensitivity.
    Epsilon {
        epsilon: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    /// One budget per prunable layer (every layer but the last).
    pub budgets: Vec<LayerBudget>,
    /// Per-layer query radius; `None` derives radii from the network.
    pub betas: Option<Vec<f64>>,
    pub scheme: Scheme,
    pub direction: Direction,
    pub seed: u64,
    /// Constant of the sample-size bound.
    pub c: f64,
}

impl PruneConfig {
    pub fn with_samples(samples: &[usize], scheme: Scheme, seed: u64) -> Self {
        PruneConfig {
            budgets: samples.iter().map(|&m| LayerBudget::Samples(m)).collect(),
            betas: None,
            scheme,
            direction: Direction::BottomUp,
            seed,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    pub layer: usize,
    pub original_width: usize,
    pub new_width: usize,
    /// Total sensitivity of the layer under the coreset distribution, when defined.
    pub total_sensitivity: Option<f64>,
    pub m: usize,
    pub seed: u64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneReport {
    pub scheme: String,
    pub layers: Vec<LayerReport>,
    pub params_before: usize,
    pub params_after: usize,
    pub compression_ratio: f64,
}

impl PruneReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "layer",
            "original_width",
            "new_width",
            "total_sensitivity",
            "m",
            "seed",
            "beta",
            "params_before",
            "params_after",
            "compression_ratio",
        ])?;
        for l in &self.layers {
            w.write_record([
                l.layer.to_string(),
                l.original_width.to_string(),
                l.new_width.to_string(),
                l.total_sensitivity
                    .map(|t| t.to_string())
                    .unwrap_or_default(),
                l.m.to_string(),
                l.seed.to_string(),
                l.beta.to_string(),
                self.params_before.to_string(),
                self.params_after.to_string(),
                self.compression_ratio.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// Layer `i`'s neurons as bias-augmented points weighted by layer `i+1`'s columns.
pub fn layer_weighted_set(net: &DenseNetwork, i: usize) -> Result<WeightedSet> {
    let (layer, next) = prunable_pair(net, i)?;
    let points = (0..layer.out_units())
        .map(|j| {
            let mut coords = layer.weights().row(j).to_vec();
            coords.push(layer.bias()[j]);
            WeightedPoint::new(coords, next.weights().column(j).to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedSet::new(points)
}

fn prunable_pair(net: &DenseNetwork, i: usize) -> Result<(&DenseLayer, &DenseLayer)> {
    let layers = net.layers();
    if i + 1 >= layers.len() {
        return Err(Error::NotPrunable {
            layer: i,
            reason: "no following layer consumes its outputs".into(),
        });
    }
    if layers[i].activation().is_none() {
        return Err(Error::NotPrunable {
            layer: i,
            reason: "layer has no activation".into(),
        });
    }
    Ok((&layers[i], &layers[i + 1]))
}

/// Query radius seen by the bias-augmented points of a layer whose inputs
/// satisfy `‖x‖ ≤ beta`.
pub fn augmented_radius(beta: f64) -> f64 {
    (beta * beta + 1.0).sqrt()
}

/// Default per-layer input radii: `beta0` for the network input, then
/// `√width · max_j sup|φ|` of the previous layer, a bound on the norm of
/// its output over the previous ball.
pub fn default_betas(net: &DenseNetwork, beta0: f64) -> Vec<f64> {
    let mut betas = vec![beta0];
    let prunable = net.layers().len() - 1;
    for layer in &net.layers()[..prunable.saturating_sub(1)] {
        let prev = *betas.last().expect("nonempty");
        let radius = augmented_radius(prev);
        let sup = match layer.activation() {
            Some(act) => (0..layer.out_units())
                .map(|j| {
                    let row = layer.weights().row(j);
                    let norm = (row.dot(&row) + layer.bias()[j].powi(2)).sqrt();
                    act.ball_sup(norm, radius)
                })
                .fold(0.0, f64::max),
            None => 0.0,
        };
        let next = (layer.out_units() as f64).sqrt() * sup;
        // Dead layers still need a positive radius.
        betas.push(if next > 0.0 && next.is_finite() {
            next
        } else {
            beta0
        });
    }
    betas
}

pub fn prune_layer(
    net: &DenseNetwork,
    i: usize,
    m: usize,
    beta: f64,
    scheme: Scheme,
    seed: u64,
) -> Result<(DenseNetwork, LayerReport)> {
    let (layer, next) = prunable_pair(net, i)?;
    let act = layer.activation().expect("checked by prunable_pair");
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let set = layer_weighted_set(net, i)?;
    let radius = augmented_radius(beta);
    let total_sensitivity = sensitivity_distribution(&set, act, radius)
        .ok()
        .map(|d| d.total_sensitivity);
    let coreset = scheme.select(&set, m, act, radius, seed)?;
    let (pruned, next_pruned) = rebuild(layer, next, &coreset)?;

    let mut layers = net.layers().to_vec();
    layers[i] = pruned;
    layers[i + 1] = next_pruned;
    let out = DenseNetwork::new(layers)?;
    let report = LayerReport {
        layer: i,
        original_width: layer.out_units(),
        new_width: coreset.len(),
        total_sensitivity,
        m,
        seed,
        beta,
    };
    Ok((out, report))
}

fn rebuild(
    layer: &DenseLayer,
    next: &DenseLayer,
    coreset: &Coreset,
) -> Result<(DenseLayer, DenseLayer)> {
    let kept: Vec<usize> = coreset.indices().collect();
    let weights = layer.weights().select(Axis(0), &kept);
    let bias = layer.bias().select(Axis(0), &kept);
    let pruned = DenseLayer::new(weights, bias, layer.activation())?;

    let consumers = next.out_units();
    let mut next_weights = Array2::zeros((consumers, kept.len()));
    for (col, entry) in coreset.entries.values().enumerate() {
        next_weights
            .column_mut(col)
            .assign(&Array1::from(entry.weights.clone()));
    }
    let next_pruned = DenseLayer::new(next_weights, next.bias().clone(), next.activation())?;
    Ok((pruned, next_pruned))
}

pub fn prune_network(net: &DenseNetwork, cfg: &PruneConfig) -> Result<(DenseNetwork, PruneReport)> {
    let prunable = net.layers().len() - 1;
    if cfg.budgets.len() != prunable {
        return Err(Error::invalid(format!(
            "need one budget per prunable layer ({prunable}), got {}",
            cfg.budgets.len()
        )));
    }
    let betas = match &cfg.betas {
        Some(b) if b.len() != prunable => {
            return Err(Error::invalid(format!(
                "need one beta per prunable layer ({prunable}), got {}",
                b.len()
            )))
        }
        Some(b) => b.clone(),
        None => default_betas(net, 1.0),
    };
    let order: Vec<usize> = match cfg.direction {
        Direction::BottomUp => (0..prunable).collect(),
        Direction::TopDown => (0..prunable).rev().collect(),
    };

    let mut current = net.clone();
    let mut reports = Vec::with_capacity(prunable);
    for i in order {
        let annotate = |e: Error| Error::AtLayer {
            layer: i,
            source: Box::new(e),
        };
        let seed = derive_seed(cfg.seed, i as u64);
        let m = match cfg.budgets[i] {
            LayerBudget::Samples(m) => m,
            LayerBudget::Epsilon { epsilon, delta } => {
                let set = layer_weighted_set(&current, i).map_err(annotate)?;
                let act = current.layers()[i].activation().ok_or_else(|| {
                    annotate(Error::NotPrunable {
                        layer: i,
                        reason: "layer has no activation".into(),
                    })
                })?;
                let t = sensitivity_distribution(&set, act, augmented_radius(betas[i]))
                    .map_err(annotate)?
                    .total_sensitivity;
                sample_size(epsilon, delta, cfg.c, set.dim(), t)
                    .map_err(annotate)?
                    .m
            }
        };
        let (next, report) =
            prune_layer(&current, i, m, betas[i], cfg.scheme, seed).map_err(annotate)?;
        current = next;
        reports.push(report);
    }
    reports.sort_by_key(|r| r.layer);

    let params_before = net.param_count();
    let params_after = current.param_count();
    let report = PruneReport {
        scheme: cfg.scheme.name().to_string(),
        layers: reports,
        params_before,
        params_after,
        compression_ratio: 1.0 - params_after as f64 / params_before as f64,
    };
    Ok((current, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_net(sizes: &[usize], seed: u64) -> DenseNetwork {
        let mut rng = seed::rng(seed);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let weights =
                    Array2::from_shape_simple_fn((w[1], w[0]), || rng.sample(StandardNormal));
                let bias = Array1::from_shape_simple_fn(w[1], || {
                    0.3 * rng.sample::<f64, _>(StandardNormal)
                });
                DenseLayer::new(weights, bias, (l != last).then_some(Activation::Relu)).unwrap()
            })
            .collect();
        DenseNetwork::new(layers).unwrap()
    }

    #[test]
    fn parses_scheme_and_direction() {
        assert_eq!("coreset".parse::<Scheme>().unwrap(), Scheme::Coreset);
        assert_eq!(
            "l1l2".parse::<Scheme>().unwrap(),
            Scheme::Baseline(BaselineScheme::L1L2)
        );
        assert!("svd".parse::<Scheme>().is_err());
        assert_eq!("top_down".parse::<Direction>().unwrap(), Direction::TopDown);
        assert!("sideways".parse::<Direction>().is_err());
    }

    #[test]
    fn bias_folding_preserves_pre_activation() {
        let net = random_net(&[3, 5, 2], 1);
        let set = layer_weighted_set(&net, 0).unwrap();
        let x = [0.4, -0.2, 0.9];
        let xa = [0.4, -0.2, 0.9, 1.0];
        let z = net.layers()[0].linear(ndarray::ArrayView1::from(&x));
        for (j, p) in set.points().iter().enumerate() {
            assert!((p.dot(&xa) - z[j]).abs() < 1e-12);
            assert_eq!(
                p.weights(),
                net.layers()[1].weights().column(j).to_vec().as_slice()
            );
        }
    }

    #[test]
    fn final_layer_is_not_prunable() {
        let net = random_net(&[3, 4, 2], 2);
        assert!(matches!(
            prune_layer(&net, 1, 2, 1.0, Scheme::Coreset, 0),
            Err(Error::NotPrunable { layer: 1, .. })
        ));
    }

    #[test]
    fn percentile_keep_all_is_identity() {
        let net = random_net(&[4, 6, 5, 3], 3);
        let (same, report) = prune_layer(
            &net,
            0,
            6,
            1.0,
            Scheme::Baseline(BaselineScheme::Percentile),
            0,
        )
        .unwrap();
        assert_eq!(same, net);
        assert_eq!(report.new_width, 6);

        let cfg =
            PruneConfig::with_samples(&[6, 5], Scheme::Baseline(BaselineScheme::Percentile), 1);
        let (same, report) = prune_network(&net, &cfg).unwrap();
        assert_eq!(same, net);
        assert_eq!(report.compression_ratio, 0.0);
    }

    #[test]
    fn full_draw_reconstructs_reweighted_original() {
        // With every neuron drawn, the pruned net equals the original with
        // column j of the next layer scaled by draws_j / (m · pr_j).
        let net = random_net(&[3, 4, 2], 4);
        let (m, beta) = (40, 1.0);
        let set = layer_weighted_set(&net, 0).unwrap();
        let dist =
            sensitivity_distribution(&set, Activation::Relu, augmented_radius(beta)).unwrap();
        let seed = (0..100)
            .find(|&s| {
                coreset_layer(&set, m, Activation::Relu, augmented_radius(beta), s)
                    .unwrap()
                    .len()
                    == 4
            })
            .expect("some seed draws every neuron");
        let coreset =
            coreset_layer(&set, m, Activation::Relu, augmented_radius(beta), seed).unwrap();
        let (pruned, _) = prune_layer(&net, 0, m, beta, Scheme::Coreset, seed).unwrap();

        let mut scaled = net.layers()[1].weights().clone();
        for (j, e) in &coreset.entries {
            let factor = e.draws as f64 / (m as f64 * dist.probabilities[*j]);
            scaled.column_mut(*j).mapv_inplace(|w| w * factor);
        }
        let reweighted = DenseNetwork::new(vec![
            net.layers()[0].clone(),
            DenseLayer::new(scaled, net.layers()[1].bias().clone(), None).unwrap(),
        ])
        .unwrap();
        let mut rng = seed::rng(5);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let a = pruned.predict(&x).unwrap();
            let b = reweighted.predict(&x).unwrap();
            for (u, v) in a.iter().zip(b.iter()) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn toy_two_two_one_hand_trace() {
        // Layer 0 rows (1,0) and (0,2), biases 0; consumer weights (3, -1).
        // Augmented norms 1 and 2, |w| 3 and 1 → s = (3, 2), pr = (0.6, 0.4).
        let l0 = DenseLayer::new(
            array![[1.0, 0.0], [0.0, 2.0]],
            array![0.0, 0.0],
            Some(Activation::Relu),
        )
        .unwrap();
        let l1 = DenseLayer::new(array![[3.0, -1.0]], array![0.5], None).unwrap();
        let net = DenseNetwork::new(vec![l0, l1]).unwrap();
        let m = 2;
        for seed in 0..16 {
            let (pruned, report) = prune_layer(&net, 0, m, 1.0, Scheme::Coreset, seed).unwrap();
            assert!((report.total_sensitivity.unwrap() - 5.0 * 2f64.sqrt()).abs() < 1e-12);
            let set = layer_weighted_set(&net, 0).unwrap();
            let c = coreset_layer(&set, m, Activation::Relu, 2f64.sqrt(), seed).unwrap();
            let expected: Vec<f64> = c
                .entries
                .iter()
                .map(|(&j, e)| {
                    let (w, pr) = if j == 0 { (3.0, 0.6) } else { (-1.0, 0.4) };
                    e.draws as f64 * w / (m as f64 * pr)
                })
                .collect();
            let got = pruned.layers()[1].weights().row(0).to_vec();
            assert_eq!(got.len(), expected.len());
            for (a, b) in got.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(pruned.layers()[1].bias(), &array![0.5]);
            let rows: Vec<usize> = c.indices().collect();
            assert_eq!(
                pruned.layers()[0].weights(),
                &net.layers()[0].weights().select(Axis(0), &rows)
            );
        }
    }

    #[test]
    fn consumers_share_support_with_distinct_weights() {
        // Seven neurons feeding two consumers with different weights.
        let mut rng = seed::rng(8);
        let l0 = DenseLayer::new(
            Array2::from_shape_simple_fn((7, 4), || rng.sample(StandardNormal)),
            Array1::zeros(7),
            Some(Activation::Relu),
        )
        .unwrap();
        let l1 = DenseLayer::new(
            Array2::from_shape_simple_fn((2, 7), || rng.sample(StandardNormal)),
            Array1::zeros(2),
            None,
        )
        .unwrap();
        let net = DenseNetwork::new(vec![l0, l1]).unwrap();
        let (pruned, report) = prune_layer(&net, 0, 5, 1.0, Scheme::Coreset, 3).unwrap();
        assert!(report.new_width <= 5);
        let w = pruned.layers()[1].weights();
        assert_eq!(w.nrows(), 2);
        assert_eq!(w.ncols(), report.new_width);
        assert!(w.row(0).iter().zip(w.row(1)).any(|(a, b)| a != b));
    }

    #[test]
    fn network_prune_shapes_and_ratio() {
        let net = random_net(&[20, 30, 15, 4], 6);
        for direction in [Direction::BottomUp, Direction::TopDown] {
            let mut cfg = PruneConfig::with_samples(&[8, 5], Scheme::Coreset, 11);
            cfg.direction = direction;
            let (pruned, report) = prune_network(&net, &cfg).unwrap();
            assert_eq!(pruned.input_dim(), 20);
            assert_eq!(pruned.output_dim(), 4);
            assert!(pruned.predict(&[0.1; 20]).is_ok());
            assert_eq!(report.params_after, pruned.param_count());
            let ratio = 1.0 - report.params_after as f64 / report.params_before as f64;
            assert_eq!(report.compression_ratio, ratio);
            for l in &report.layers {
                assert!(l.new_width <= l.original_width && l.new_width <= l.m);
            }
            assert_eq!(prune_network(&net, &cfg).unwrap().0, pruned);
        }
    }

    #[test]
    fn epsilon_budget_uses_sample_size_bound() {
        let net = random_net(&[3, 6, 2], 7);
        let cfg = PruneConfig {
            budgets: vec![LayerBudget::Epsilon {
                epsilon: 0.5,
                delta: 0.1,
            }],
            betas: Some(vec![1.0]),
            scheme: Scheme::Coreset,
            direction: Direction::BottomUp,
            seed: 0,
            c: 1.0,
        };
        let (_, report) = prune_network(&net, &cfg).unwrap();
        let set = layer_weighted_set(&net, 0).unwrap();
        let t = sensitivity_distribution(&set, Activation::Relu, 2f64.sqrt())
            .unwrap()
            .total_sensitivity;
        assert_eq!(
            report.layers[0].m,
            sample_size(0.5, 0.1, 1.0, 4, t).unwrap().m
        );
    }

    #[test]
    fn errors_are_annotated_with_layer() {
        let mut net = random_net(&[3, 4, 4, 2], 9);
        let mut layers = net.clone().into_layers();
        // Zero consumer weights make every neuron of layer 1 insensitive.
        layers[2] = DenseLayer::new(Array2::zeros((2, 4)), Array1::zeros(2), None).unwrap();
        net = DenseNetwork::new(layers).unwrap();
        let cfg = PruneConfig::with_samples(&[2, 2], Scheme::Coreset, 0);
        let err = prune_network(&net, &cfg).unwrap_err();
        assert!(matches!(err, Error::AtLayer { layer: 1, .. }), "{err}");
        assert!(matches!(err.root(), Error::AllZeroSensitivity));
        assert!(prune_network(&net, &PruneConfig::with_samples(&[2], Scheme::Coreset, 0)).is_err());
    }

    #[test]
    fn report_serializes() {
        let net = random_net(&[5, 6, 3], 10);
        let (_, report) =
            prune_network(&net, &PruneConfig::with_samples(&[3], Scheme::Coreset, 2)).unwrap();
        let csv = report.to_csv().unwrap();
        assert!(csv.starts_with("layer,original_width,new_width,total_sensitivity,m,seed,beta"));
        assert_eq!(csv.lines().count(), 2);
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["params_before"], 5 * 6 + 6 + 6 * 3 + 3);
    }
}
