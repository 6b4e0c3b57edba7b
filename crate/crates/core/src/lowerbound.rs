//! A point set on which no proper subset, however reweighted, approximates
//! `Σ φ(pᵀx)` within any relative error below one.
//!
//! Points sit on the sphere of radius `α` with last coordinate `α/2`, so
//! their first `d − 1` coordinates lie on a circle-like sphere of radius
//! `α√3/2`. For each point there is a short query that is positive on it
//! and negative on all others.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::seed;
use crate::weighted::{dot, norm, WeightedSet};

/// Minimum `1 − cos` between sampled directions.
const MIN_SEPARATION: f64 = 1e-9;
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SphereInstance {
    points: Vec<Vec<f64>>,
    /// Unit directions of the first `d − 1` coordinates.
    directions: Vec<Vec<f64>>,
    alpha: f64,
}

impl SphereInstance {
    /// Builds an instance from explicit directions in `ℝᵈ⁻¹` (normalized here).
    pub fn from_directions(directions: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if directions.len() < 2 {
            return Err(Error::invalid("need at least two points"));
        }
        let dm1 = directions[0].len();
        if dm1 < 2 {
            return Err(Error::invalid("dimension must be at least 3"));
        }
        let radius = alpha * 3f64.sqrt() / 2.0;
        let mut units = Vec::with_capacity(directions.len());
        let mut points = Vec::with_capacity(directions.len());
        for v in directions {
            if v.len() != dm1 {
                return Err(Error::DimensionMismatch {
                    context: "sphere direction",
                    expected: dm1,
                    got: v.len(),
                });
            }
            let len = norm(&v);
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::invalid("direction must be nonzero and finite"));
            }
            let u: Vec<f64> = v.iter().map(|c| c / len).collect();
            let mut p: Vec<f64> = u.iter().map(|c| c * radius).collect();
            p.push(alpha / 2.0);
            units.push(u);
            points.push(p);
        }
        Ok(SphereInstance {
            points,
            directions: units,
            alpha,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Every point with weight one.
    pub fn to_weighted_set(&self) -> Result<WeightedSet> {
        WeightedSet::single(self.points.clone(), vec![1.0; self.n()])
    }
}

/// `n` random points on the sphere; directions are redrawn until every pair
/// is separated.
pub fn sphere_instance(n: usize, d: usize, alpha: f64, seed: u64) -> Result<SphereInstance> {
    if n < 2 {
        return Err(Error::invalid(format!("n must be at least 2, got {n}")));
    }
    if d < 3 {
        return Err(Error::invalid(format!("d must be at least 3, got {d}")));
    }
    let mut rng = seed::rng(seed);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while dirs.len() < n {
        let mut accepted = false;
        for _ in 0..MAX_RESAMPLES {
            let v: Vec<f64> = (0..d - 1).map(|_| rng.sample(StandardNormal)).collect();
            let len = norm(&v);
            if len == 0.0 {
                continue;
            }
            let u: Vec<f64> = v.iter().map(|c| c / len).collect();
            if dirs.iter().all(|w| 1.0 - dot(w, &u) >= MIN_SEPARATION) {
                dirs.push(u);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::invalid(format!(
                "could not place {n} separated points in dimension {d}"
            )));
        }
    }
    SphereInstance::from_directions(dirs, alpha)
}

/// A query `x` with `‖x‖ = β`, `xᵀpⱼ > 0` and `xᵀq < 0` for every other point.
///
/// With `c` the largest cosine between direction `j` and any other, the
/// query is `η(vⱼ, −g)` where `g·α/2 = r(1 + c)/2`; the margins are then
/// `±η r (1 − c)/2`.
pub fn separating_query(inst: &SphereInstance, j: usize, beta: f64) -> Result<Vec<f64>> {
    if j >= inst.n() {
        return Err(Error::invalid(format!(
            "index {j} out of range for {} points",
            inst.n()
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let pj = &inst.points[j];
    let vj = &inst.directions[j];
    let mut c_max = f64::NEG_INFINITY;
    for (q, p) in inst.points.iter().enumerate() {
        if q == j {
            continue;
        }
        let gap = norm(&pj.iter().zip(p).map(|(a, b)| a - b).collect::<Vec<_>>());
        if gap < 1e-12 {
            return Err(Error::DegenerateInstance {
                first: j.min(q),
                second: j.max(q),
            });
        }
        c_max = c_max.max(dot(vj, &inst.directions[q]));
    }
    let r = inst.alpha * 3f64.sqrt() / 2.0;
    let g = r * (1.0 + c_max) / inst.alpha;
    let eta = beta / (1.0 + g * g).sqrt();
    let mut x: Vec<f64> = vj.iter().map(|c| eta * c).collect();
    x.push(-eta * g);
    Ok(x)
}

/// Relative error of `Σ_C u φ(qᵀx)` against `Σ_P φ(pᵀx)` at each query.
/// A query where both sums vanish scores zero; a query where only the full
/// sum vanishes scores infinity.
pub fn relative_errors(
    inst: &SphereInstance,
    act: Activation,
    subset: &[usize],
    weights: &[f64],
    queries: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if subset.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "coreset weights",
            expected: subset.len(),
            got: weights.len(),
        });
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= inst.n()) {
        return Err(Error::invalid(format!("subset index {bad} out of range")));
    }
    queries
        .iter()
        .map(|x| {
            if x.len() != inst.dim() {
                return Err(Error::DimensionMismatch {
                    context: "query",
                    expected: inst.dim(),
                    got: x.len(),
                });
            }
            let full: f64 = inst.points.iter().map(|p| act.eval(dot(p, x))).sum();
            let approx: f64 = subset
                .iter()
                .zip(weights)
                .map(|(&i, u)| u * act.eval(dot(&inst.points[i], x)))
                .sum();
            let diff = (full - approx).abs();
            Ok(if full == 0.0 {
                if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                diff / full
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// First point left out of the subset.
    pub excluded: usize,
    /// Relative error at that point's separating query.
    pub excluded_error: f64,
    /// Largest relative error over all separating queries.
    pub worst_error: f64,
}

/// Scores a weighted proper subset on every separating query.
pub fn verify_no_multiplicative_coreset(
    inst: &SphereInstance,
    act: Activation,
    subset: &[usize],
    weights: &[f64],
    beta: f64,
) -> Result<Certificate> {
    if !act.positive_iff_positive_input() {
        return Err(Error::invalid(format!(
            "activation {act} is positive on some non-positive inputs"
        )));
    }
    let mut present = vec![false; inst.n()];
    for &i in subset {
        if i >= inst.n() {
            return Err(Error::invalid(format!("subset index {i} out of range")));
        }
        present[i] = true;
    }
    let excluded = present
        .iter()
        .position(|&p| !p)
        .ok_or_else(|| Error::invalid("subset contains every point"))?;
    let queries = (0..inst.n())
        .map(|j| separating_query(inst, j, beta))
        .collect::<Result<Vec<_>>>()?;
    let errors = relative_errors(inst, act, subset, weights, &queries)?;
    Ok(Certificate {
        excluded,
        excluded_error: errors[excluded],
        worst_error: errors.iter().copied().fold(0.0, f64::max),
    })
}
