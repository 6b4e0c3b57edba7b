//! Sensitivity sampling of neurons.
//!
//! A layer of neurons `p₁ … pₙ` feeds `k` consumer neurons through weights
//! `wᵢ(pⱼ)`. The sensitivity of a point is the largest contribution it can make
//! to any consumer over the query ball,
//!
//! ```text
//! s(p) = maxᵢ |wᵢ(p)| · sup_{‖x‖≤β} |φ(pᵀx)|
//! ```
//!
//! and points are drawn i.i.d. with probability `s(p)/t`, `t = Σ s(p)`. Each
//! draw of `q` adds `wᵢ(q) / (m·pr(q))` to the new weight `uᵢ(q)`, which makes
//! `Σ_C uᵢ(q) φ(qᵀx)` an unbiased estimate of `Σ_P wᵢ(p) φ(pᵀx)` for every `x`.
//! Signed weights keep their sign in the update; only the sampling
//! probabilities use magnitudes.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::seed;
use crate::weighted::WeightedSet;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityDistribution {
    pub sensitivities: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub total_sensitivity: f64,
}

impl SensitivityDistribution {
    /// Normalizes nonnegative scores into a sampling distribution.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::invalid("cannot sample from an empty set"));
        }
        if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::invalid(format!(
                "sensitivity scores must be finite and nonnegative, got {bad}"
            )));
        }
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZeroSensitivity);
        }
        if !total.is_finite() {
            return Err(Error::invalid("total sensitivity overflowed"));
        }
        let probabilities = scores.iter().map(|s| s / total).collect();
        Ok(SensitivityDistribution {
            sensitivities: scores,
            probabilities,
            total_sensitivity: total,
        })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

pub fn sensitivity_distribution(
    set: &WeightedSet,
    act: Activation,
    beta: f64,
) -> Result<SensitivityDistribution> {
    check_beta(beta)?;
    let scores = set
        .points()
        .iter()
        .map(|p| p.max_abs_weight() * act.ball_sup(p.norm(), beta))
        .collect();
    SensitivityDistribution::from_scores(scores)
}

/// The inputs and resulting sample count of the additive-error size bound
/// `m = ⌈c·t/ε² · (d·ln max(t, e) + ln(1/δ))⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizePlan {
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub vc_dim: usize,
    pub t: f64,
    pub m: usize,
}

pub fn sample_size(
    epsilon: f64,
    delta: f64,
    c: f64,
    vc_dim: usize,
    t: f64,
) -> Result<SampleSizePlan> {
    let unit = |v: f64| v > 0.0 && v < 1.0;
    if !unit(epsilon) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    if !unit(delta) {
        return Err(Error::invalid(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("c must be positive, got {c}")));
    }
    if vc_dim == 0 {
        return Err(Error::invalid("vc_dim must be at least 1"));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!(
            "total sensitivity must be positive, got {t}"
        )));
    }
    let log_t = t.max(std::f64::consts::E).ln();
    let bound = c * t / (epsilon * epsilon) * (vc_dim as f64 * log_t + (1.0 / delta).ln());
    let m = bound.ceil().max(1.0);
    if m >= usize::MAX as f64 {
        return Err(Error::invalid("sample size bound overflows"));
    }
    Ok(SampleSizePlan {
        epsilon,
        delta,
        c,
        vc_dim,
        t,
        m: m as usize,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoresetEntry {
    /// New weight per consumer, `u₁(q) … u_k(q)`.
    pub weights: Vec<f64>,
    /// How many of the `m` draws landed on this point.
    pub draws: usize,
}

/// A weighted subset of a [`WeightedSet`], keyed by point index.
#[derive(Debug, Clone, PartialEq)]
pub struct Coreset {
    pub entries: BTreeMap<usize, CoresetEntry>,
    pub sample_count: usize,
    pub seed: Option<u64>,
}

impl Coreset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn weight(&self, index: usize, consumer: usize) -> Option<f64> {
        self.entries.get(&index).map(|e| e.weights[consumer])
    }

    /// Approximate response `Σ_C uᵢ(q) φ(qᵀx)` for consumer `i`.
    pub fn response(&self, set: &WeightedSet, act: Activation, consumer: usize, x: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|(&j, e)| e.weights[consumer] * act.eval(set.points()[j].dot(x)))
            .sum()
    }

    /// Keeps the listed points with their original weights.
    pub fn keep(set: &WeightedSet, indices: impl IntoIterator<Item = usize>) -> Self {
        let entries: BTreeMap<_, _> = indices
            .into_iter()
            .map(|j| {
                let e = CoresetEntry {
                    weights: set.points()[j].weights().to_vec(),
                    draws: 1,
                };
                (j, e)
            })
            .collect();
        Coreset {
            sample_count: entries.len(),
            entries,
            seed: None,
        }
    }
}

/// Draws `m` points i.i.d. from `dist` and accumulates `wᵢ(q)/(m·pr(q))`.
pub fn sample_reweighted(
    set: &WeightedSet,
    dist: &SensitivityDistribution,
    m: usize,
    seed: u64,
) -> Result<Coreset> {
    if m == 0 {
        return Err(Error::invalid("sample size m must be at least 1"));
    }
    if dist.len() != set.len() {
        return Err(Error::DimensionMismatch {
            context: "distribution vs set size",
            expected: set.len(),
            got: dist.len(),
        });
    }
    let index = WeightedIndex::new(&dist.probabilities).map_err(|_| Error::AllZeroSensitivity)?;
    let mut rng = seed::rng(seed);
    let k = set.consumers();
    let mut entries: BTreeMap<usize, CoresetEntry> = BTreeMap::new();
    for _ in 0..m {
        let q = index.sample(&mut rng);
        let scale = 1.0 / (m as f64 * dist.probabilities[q]);
        let entry = entries.entry(q).or_insert_with(|| CoresetEntry {
            weights: vec![0.0; k],
            draws: 0,
        });
        entry.draws += 1;
        for (u, w) in entry.weights.iter_mut().zip(set.points()[q].weights()) {
            *u += w * scale;
        }
    }
    Ok(Coreset {
        entries,
        sample_count: m,
        seed: Some(seed),
    })
}

/// Single-consumer coreset.
pub fn coreset_single(
    set: &WeightedSet,
    m: usize,
    act: Activation,
    beta: f64,
    seed: u64,
) -> Result<Coreset> {
    if set.consumers() != 1 {
        return Err(Error::invalid(format!(
            "single-neuron coreset needs exactly one weight per point, got {}",
            set.consumers()
        )));
    }
    coreset_layer(set, m, act, beta, seed)
}

/// One shared point subset for all `k` consumers, each with its own weights.
pub fn coreset_layer(
    set: &WeightedSet,
    m: usize,
    act: Activation,
    beta: f64,
    seed: u64,
) -> Result<Coreset> {
    let dist = sensitivity_distribution(set, act, beta)?;
    sample_reweighted(set, &dist, m, seed)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("beta must be positive, got {beta}")))
    }
}
