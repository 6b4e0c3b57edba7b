//! Catalog of monotone activation functions supported by the neuron coreset.
//!
//! Each activation can be evaluated pointwise and bounded over a Euclidean
//! query ball: for a neuron with weight vector `p` and any query `x` with
//! `‖x‖ ≤ β`, Cauchy-Schwarz gives `|pᵀx| ≤ ‖p‖β`, so for a monotone `φ`
//! the magnitude `|φ(pᵀx)|` is bounded by the larger of `|φ(±‖p‖β)|`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Activation {
    /// `max(x, 0)`
    Relu,
    /// `1 / (1 + e^{-x})`
    Sigmoid,
    /// Heaviside step: `0` for `x < 0`, `1` otherwise.
    Binary,
    /// `ln(1 + e^x)`
    Softplus,
    /// `(1/a) · ln((1 + e^{a x}) / (1 + e^{a (x - 1)}))`, a smooth clip to `[0, 1]`.
    Softclip { steepness: f64 },
    /// `e^{-x}`. Decreasing, unlike the rest of the catalog.
    Gauss,
}

impl Activation {
    pub const ALL_TAGS: [&'static str; 6] =
        ["relu", "sigmoid", "binary", "softplus", "softclip", "gauss"];

    pub fn softclip(steepness: f64) -> Result<Self> {
        if !(steepness.is_finite() && steepness > 0.0) {
            return Err(Error::invalid(format!(
                "softclip steepness must be positive and finite, got {steepness}"
            )));
        }
        Ok(Activation::Softclip { steepness })
    }

    /// Builds an activation from its tag and optional parameter. The
    /// parameter is required for `softclip` and rejected for every other tag.
    pub fn from_tag(tag: &str, param: Option<f64>) -> Result<Self> {
        let act = match (tag, param) {
            ("softclip", Some(a)) => return Activation::softclip(a),
            ("softclip", None) => {
                return Err(Error::invalid("softclip requires a steepness parameter"))
            }
            (_, Some(_)) => {
                return Err(Error::invalid(format!(
                    "activation `{tag}` takes no parameter"
                )))
            }
            ("relu", None) => Activation::Relu,
            ("sigmoid", None) => Activation::Sigmoid,
            ("binary", None) => Activation::Binary,
            ("softplus", None) => Activation::Softplus,
            ("gauss", None) => Activation::Gauss,
            (other, None) => return Err(Error::invalid(format!("unknown activation `{other}`"))),
        };
        Ok(act)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Binary => "binary",
            Activation::Softplus => "softplus",
            Activation::Softclip { .. } => "softclip",
            Activation::Gauss => "gauss",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match self {
            Activation::Softclip { steepness } => Some(*steepness),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Binary => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Activation::Softplus => softplus(x),
            Activation::Softclip { steepness: a } => softclip(a, x),
            // Saturates to +inf below about -709.
            Activation::Gauss => (-x).exp(),
        }
    }

    /// First derivative, used by backpropagation. The step function and the
    /// ReLU kink at zero get derivative 0.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Binary => 0.0,
            Activation::Softplus => sigmoid(x),
            Activation::Softclip { steepness: a } => sigmoid(a * x) - sigmoid(a * (x - 1.0)),
            Activation::Gauss => -(-x).exp(),
        }
    }

    /// Supremum of `|φ(pᵀx)|` over all `x` in the ball of radius `beta`,
    /// given `‖p‖ = point_norm`.
    pub fn ball_sup(&self, point_norm: f64, beta: f64) -> f64 {
        debug_assert!(point_norm >= 0.0 && beta > 0.0);
        let reach = point_norm * beta;
        self.eval(reach).abs().max(self.eval(-reach).abs())
    }

    /// True when `φ(b) > 0` exactly for `b > 0`.
    pub fn positive_iff_positive_input(&self) -> bool {
        matches!(self, Activation::Relu)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Softclip { steepness } => write!(f, "softclip({steepness})"),
            other => f.write_str(other.tag()),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `relu`, `sigmoid`, ... and `softclip:<steepness>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("softclip", a)) => {
                let a: f64 = a
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad softclip steepness `{a}`")))?;
                Activation::softclip(a)
            }
            Some((tag, _)) => Activation::from_tag(tag, Some(0.0)),
            None => Activation::from_tag(s, None),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softclip(a: f64, x: f64) -> f64 {
    let upper = a * x;
    let lower = a * (x - 1.0);
    if lower > 0.0 {
        // Both exponents positive: factor out e^{a x} and e^{a(x-1)} to avoid
        // cancelling two huge softplus values.
        1.0 + ((-upper).exp().ln_1p() - (-lower).exp().ln_1p()) / a
    } else {
        (softplus(upper) - softplus(lower)) / a
    }
}
