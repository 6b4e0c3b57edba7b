//! Competing neuron selection schemes.
//!
//! `uniform` and the norm-based sparsification schemes reuse the
//! reweighting loop of the coreset sampler with a different distribution;
//! `percentile` keeps the largest-norm points verbatim.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sampler::{sample_reweighted, Coreset, SensitivityDistribution};
use crate::weighted::WeightedSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineScheme {
    Uniform,
    Percentile,
    L1,
    L2,
    L1L2,
}

impl BaselineScheme {
    pub const ALL: [BaselineScheme; 5] = [
        BaselineScheme::Uniform,
        BaselineScheme::Percentile,
        BaselineScheme::L1,
        BaselineScheme::L2,
        BaselineScheme::L1L2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaselineScheme::Uniform => "uniform",
            BaselineScheme::Percentile => "percentile",
            BaselineScheme::L1 => "l1",
            BaselineScheme::L2 => "l2",
            BaselineScheme::L1L2 => "l1l2",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, BaselineScheme::Percentile)
    }

    pub fn select(&self, set: &WeightedSet, m: usize, seed: u64) -> Result<Coreset> {
        match *self {
            BaselineScheme::Uniform => uniform_coreset(set, m, seed),
            BaselineScheme::Percentile => percentile_coreset(set, m),
            BaselineScheme::L1 => norm_sampling_coreset(set, m, NormKind::L1, seed),
            BaselineScheme::L2 => norm_sampling_coreset(set, m, NormKind::L2, seed),
            BaselineScheme::L1L2 => norm_sampling_coreset(set, m, NormKind::L1L2, seed),
        }
    }
}

impl fmt::Display for BaselineScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineScheme::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown baseline scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    L1L2,
}

impl NormKind {
    fn score(&self, weights: &[f64]) -> f64 {
        let per = |w: f64| match self {
            NormKind::L1 => w.abs(),
            NormKind::L2 => w * w,
            NormKind::L1L2 => (w.abs() + w * w) / 2.0,
        };
        weights.iter().fold(0.0, |m, &w| m.max(per(w)))
    }
}

/// Sampling with `pr ≡ 1/n`.
pub fn uniform_coreset(set: &WeightedSet, m: usize, seed: u64) -> Result<Coreset> {
    if set.is_empty() {
        return Err(Error::invalid("cannot sample from an empty set"));
    }
    let dist = SensitivityDistribution::from_scores(vec![1.0; set.len()])?;
    sample_reweighted(set, &dist, m, seed)
}

/// Keeps the `m` largest-norm points (lower index wins ties) with their
/// original, unscaled weights.
pub fn percentile_coreset(set: &WeightedSet, m: usize) -> Result<Coreset> {
    let n = set.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "percentile needs 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    let norms: Vec<f64> = set.points().iter().map(|p| p.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ascending index among equal norms.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    Ok(Coreset::keep(set, order.into_iter().take(m)))
}

pub fn norm_sampling_coreset(
    set: &WeightedSet,
    m: usize,
    kind: NormKind,
    seed: u64,
) -> Result<Coreset> {
    let dist = norm_distribution(set, kind)?;
    sample_reweighted(set, &dist, m, seed)
}

pub fn norm_distribution(set: &WeightedSet, kind: NormKind) -> Result<SensitivityDistribution> {
    let scores = set
        .points()
        .iter()
        .map(|p| kind.score(p.weights()))
        .collect();
    SensitivityDistribution::from_scores(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_set(norms: &[f64], weights: &[f64]) -> WeightedSet {
        WeightedSet::single(
            norms.iter().map(|&n| vec![0.0, n]).collect(),
            weights.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_single_point_and_draw_counts() {
        let s = line_set(&[1.0], &[3.0]);
        let c = uniform_coreset(&s, 11, 0).unwrap();
        assert!((c.entries[&0].weights[0] - 3.0).abs() < 1e-12);

        let s = line_set(&[1.0, 5.0, 2.0, 0.1], &[1.0, -2.0, 0.5, 4.0]);
        let (n, m) = (4.0, 13);
        let c = uniform_coreset(&s, m, 8).unwrap();
        for (&j, e) in &c.entries {
            let w = s.points()[j].weights()[0];
            let expect = w * n * e.draws as f64 / m as f64;
            assert!((e.weights[0] - expect).abs() < 1e-12);
        }
        assert_eq!(c, uniform_coreset(&s, m, 8).unwrap());
    }

    #[test]
    fn percentile_examples() {
        let s = line_set(&[3.0, 1.0, 2.0], &[0.5, 0.6, 0.7]);
        let c = percentile_coreset(&s, 2).unwrap();
        assert_eq!(c.indices().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(c.weight(0, 0), Some(0.5));
        assert_eq!(c.weight(2, 0), Some(0.7));

        let all = percentile_coreset(&s, 3).unwrap();
        assert_eq!(all.indices().collect::<Vec<_>>(), vec![0, 1, 2]);

        let eq = line_set(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]);
        assert_eq!(
            percentile_coreset(&eq, 1)
                .unwrap()
                .indices()
                .collect::<Vec<_>>(),
            vec![0]
        );

        assert!(percentile_coreset(&s, 4).is_err());
        assert!(percentile_coreset(&s, 0).is_err());
    }

    #[test]
    fn norm_distributions() {
        let s = line_set(&[1.0, 1.0, 1.0], &[2.0, 1.0, 1.0]);
        let d1 = norm_distribution(&s, NormKind::L1).unwrap();
        assert_eq!(d1.probabilities, vec![0.5, 0.25, 0.25]);
        let d2 = norm_distribution(&s, NormKind::L2).unwrap();
        for (a, b) in d2
            .probabilities
            .iter()
            .zip([4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0])
        {
            assert!((a - b).abs() < 1e-15);
        }
        let eq = line_set(&[1.0, 4.0, 9.0], &[-0.3, 0.3, 0.3]);
        for kind in [NormKind::L1, NormKind::L2, NormKind::L1L2] {
            let d = norm_distribution(&eq, kind).unwrap();
            assert!(d
                .probabilities
                .iter()
                .all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        }
        let zero = line_set(&[1.0, 2.0], &[0.0, 0.0]);
        assert!(matches!(
            norm_sampling_coreset(&zero, 3, NormKind::L2, 0),
            Err(Error::AllZeroSensitivity)
        ));
    }

    #[test]
    fn cardinality_bounded_by_m() {
        let s = line_set(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[1.0, -1.0, 2.0, -2.0, 3.0, 0.5],
        );
        for scheme in BaselineScheme::ALL {
            for m in 1..=6 {
                let c = scheme.select(&s, m, m as u64).unwrap();
                assert!(c.len() <= m, "{scheme} m={m}");
            }
        }
        assert_eq!(
            BaselineScheme::Percentile.select(&s, 3, 1).unwrap(),
            BaselineScheme::Percentile.select(&s, 3, 2).unwrap()
        );
    }

    #[test]
    fn parses_names() {
        for b in BaselineScheme::ALL {
            assert_eq!(b.name().parse::<BaselineScheme>().unwrap(), b);
        }
        assert!("svd".parse::<BaselineScheme>().is_err());
    }
}
