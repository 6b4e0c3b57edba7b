//! Weighted point sets and query balls.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A point `p ∈ ℝᵈ` carrying one weight per consumer neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedPoint {
    pub fn new(coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point has no coordinates"));
        }
        if weights.is_empty() {
            return Err(Error::invalid("point has no weights"));
        }
        if coords.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "point coordinates and weights must be finite",
            ));
        }
        Ok(WeightedPoint { coords, weights })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        dot(&self.coords, x)
    }

    /// Largest weight magnitude across consumers.
    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

/// An ordered collection of points sharing dimension `d` and weight count `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSet {
    points: Vec<WeightedPoint>,
}

impl WeightedSet {
    pub fn new(points: Vec<WeightedPoint>) -> Result<Self> {
        if let Some(first) = points.first() {
            let (d, k) = (first.dim(), first.weights.len());
            for p in &points[1..] {
                if p.dim() != d {
                    return Err(Error::DimensionMismatch {
                        context: "weighted set coordinates",
                        expected: d,
                        got: p.dim(),
                    });
                }
                if p.weights.len() != k {
                    return Err(Error::DimensionMismatch {
                        context: "weighted set weight count",
                        expected: k,
                        got: p.weights.len(),
                    });
                }
            }
        }
        Ok(WeightedSet { points })
    }

    /// Single-consumer set from coordinates and one weight per point.
    pub fn single(coords: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if coords.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "points vs weights",
                expected: coords.len(),
                got: weights.len(),
            });
        }
        let points = coords
            .into_iter()
            .zip(weights)
            .map(|(c, w)| WeightedPoint::new(c, vec![w]))
            .collect::<Result<Vec<_>>>()?;
        WeightedSet::new(points)
    }

    /// Multi-consumer set where `weights[j][i]` is consumer `i`'s weight on point `j`.
    pub fn layered(coords: Vec<Vec<f64>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "points vs weights",
                expected: coords.len(),
                got: weights.len(),
            });
        }
        let points = coords
            .into_iter()
            .zip(weights)
            .map(|(c, w)| WeightedPoint::new(c, w))
            .collect::<Result<Vec<_>>>()?;
        WeightedSet::new(points)
    }

    pub fn points(&self) -> &[WeightedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, WeightedPoint::dim)
    }

    /// Number of consumers `k`.
    pub fn consumers(&self) -> usize {
        self.points.first().map_or(0, |p| p.weights.len())
    }

    /// Exact weighted response `Σ_p wᵢ(p) φ(pᵀx)` for consumer `i`.
    pub fn response(&self, act: crate::Activation, consumer: usize, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| p.weights[consumer] * act.eval(p.dot(x)))
            .sum()
    }
}

/// The query domain: a closed Euclidean ball of radius `β` centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryBall {
    radius: f64,
    dimension: usize,
}

impl QueryBall {
    pub fn new(radius: f64, dimension: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if dimension == 0 {
            return Err(Error::invalid("ball dimension must be positive"));
        }
        Ok(QueryBall { radius, dimension })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension && norm(x) <= self.radius * (1.0 + 1e-12)
    }

    /// Draws a point uniformly from the ball.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.dimension)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let n = norm(&x).max(f64::MIN_POSITIVE);
        let u: f64 = rng.random();
        let scale = self.radius * u.powf(1.0 / self.dimension as f64) / n;
        x.iter_mut().for_each(|v| *v *= scale);
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
