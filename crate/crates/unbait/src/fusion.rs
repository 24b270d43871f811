//! Fusion strategies combining the two branch scores into one prediction.
//!
//! A fused prediction `y = f(y_ui, y_ue)` combines the item-branch score
//! `y_ui` (user x full item) with the exposure-branch score `y_ue`
//! (user x exposure features only). Five strategies are supported; the
//! multiplicative-sigmoid form is the default.
//!
//! Each strategy also carries closed forms for the two counterfactual
//! quantities used at inference time:
//!
//! - `tie(y_ui, y_ue, c_ui) = f(y_ui, y_ue) - f(c_ui, y_ue)`
//! - `nie(y_ui, c_ui, c_e)  = f(y_ui, c_e)  - f(c_ui, c_e)`
//!
//! where `c_ui` and `c_e` are the per-user expectation constants (mean
//! branch scores over the catalog). The closed forms are what ships; the
//! defining subtractions above are kept as the test oracle.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionStrategy {
    MulSigmoid,
    MulTanh,
    SumLinear,
    SumSigmoid,
    SumTanh,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 5] = [
        FusionStrategy::MulSigmoid,
        FusionStrategy::MulTanh,
        FusionStrategy::SumLinear,
        FusionStrategy::SumSigmoid,
        FusionStrategy::SumTanh,
    ];

    /// Fused prediction `f(y_ui, y_ue)`.
    pub fn fuse(self, y_ui: f64, y_ue: f64) -> f64 {
        assert!(
            y_ui.is_finite() && y_ue.is_finite(),
            "non-finite fusion input ({y_ui}, {y_ue})"
        );
        match self {
            FusionStrategy::MulSigmoid => y_ui * sigmoid(y_ue),
            FusionStrategy::MulTanh => y_ui * y_ue.tanh(),
            FusionStrategy::SumLinear => y_ui + y_ue,
            FusionStrategy::SumSigmoid => y_ui + sigmoid(y_ue),
            FusionStrategy::SumTanh => y_ui + y_ue.tanh(),
        }
    }

    /// Total indirect effect, closed form.
    ///
    /// Equals `fuse(y_ui, y_ue) - fuse(c_ui, y_ue)`. For the SUM
    /// strategies the exposure term cancels, so TIE reduces to
    /// `y_ui - c_ui` regardless of activation.
    pub fn tie(self, y_ui: f64, y_ue: f64, c_ui: f64) -> f64 {
        assert!(
            y_ui.is_finite() && y_ue.is_finite() && c_ui.is_finite(),
            "non-finite tie input ({y_ui}, {y_ue}, {c_ui})"
        );
        match self {
            FusionStrategy::MulSigmoid => (y_ui - c_ui) * sigmoid(y_ue),
            FusionStrategy::MulTanh => (y_ui - c_ui) * y_ue.tanh(),
            FusionStrategy::SumLinear | FusionStrategy::SumSigmoid | FusionStrategy::SumTanh => {
                y_ui - c_ui
            }
        }
    }

    /// Natural indirect effect, closed form.
    ///
    /// Equals `fuse(y_ui, c_e) - fuse(c_ui, c_e)`; the reference term
    /// cancels for SUM strategies and factors out for MUL strategies.
    pub fn nie(self, y_ui: f64, c_ui: f64, c_e: f64) -> f64 {
        assert!(
            y_ui.is_finite() && c_ui.is_finite() && c_e.is_finite(),
            "non-finite nie input ({y_ui}, {c_ui}, {c_e})"
        );
        match self {
            FusionStrategy::MulSigmoid => (y_ui - c_ui) * sigmoid(c_e),
            FusionStrategy::MulTanh => (y_ui - c_ui) * c_e.tanh(),
            FusionStrategy::SumLinear | FusionStrategy::SumSigmoid | FusionStrategy::SumTanh => {
                y_ui - c_ui
            }
        }
    }

    /// Partial derivatives `(df/dy_ui, df/dy_ue)` of the fused prediction.
    pub fn fuse_grad(self, y_ui: f64, y_ue: f64) -> (f64, f64) {
        match self {
            FusionStrategy::MulSigmoid => {
                let s = sigmoid(y_ue);
                (s, y_ui * s * (1.0 - s))
            }
            FusionStrategy::MulTanh => {
                let t = y_ue.tanh();
                (t, y_ui * (1.0 - t * t))
            }
            FusionStrategy::SumLinear => (1.0, 1.0),
            FusionStrategy::SumSigmoid => {
                let s = sigmoid(y_ue);
                (1.0, s * (1.0 - s))
            }
            FusionStrategy::SumTanh => {
                let t = y_ue.tanh();
                (1.0, 1.0 - t * t)
            }
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FusionStrategy::MulSigmoid => "mul-sigmoid",
            FusionStrategy::MulTanh => "mul-tanh",
            FusionStrategy::SumLinear => "sum-linear",
            FusionStrategy::SumSigmoid => "sum-sigmoid",
            FusionStrategy::SumTanh => "sum-tanh",
        };
        f.write_str(name)
    }
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "mul-sigmoid" => Ok(FusionStrategy::MulSigmoid),
            "mul-tanh" => Ok(FusionStrategy::MulTanh),
            "sum-linear" => Ok(FusionStrategy::SumLinear),
            "sum-sigmoid" => Ok(FusionStrategy::SumSigmoid),
            "sum-tanh" => Ok(FusionStrategy::SumTanh),
            other => Err(Error::UnknownName {
                what: "fusion strategy",
                value: other.to_string(),
                expected: "mul-sigmoid, mul-tanh, sum-linear, sum-sigmoid, sum-tanh",
            }),
        }
    }
}

impl Default for FusionStrategy {
    fn default() -> Self {
        FusionStrategy::MulSigmoid
    }
}
