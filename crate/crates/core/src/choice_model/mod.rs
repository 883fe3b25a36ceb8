//! Shipper and carrier discrete-choice models.
//!
//! A load context [`LoadAttributes`] and a per-mile bid are encoded into a
//! carrier or shipper covariate vector through a [`FeatureRegistry`]; the
//! acceptance probability is the logistic of the weight/feature product.
//! Both encodings are affine in the bid, which [`utility_line`] exploits to
//! evaluate a whole price grid with two dot products per model.

mod features;
mod fit;
pub mod io;

pub use features::{
    build_feature_registry, carrier_features, features, indicator_set, shipper_features,
    utility_line, FeatureRegistry, FeatureVector, UtilityLine, MIN_DIST_MILES,
};
pub use fit::{fit_l1_logistic, fit_l1_logistic_weighted, logistic_objective, FitConfig, FitOutcome, LabeledFeatures};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Abstract region identifier (stands in for an aggregated zip-code area).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Equipment {
    DryVan,
    FlatBed,
    Refrigerated,
    Rgn,
    StepDeck,
}

impl Equipment {
    pub const ALL: [Equipment; 5] = [
        Equipment::DryVan,
        Equipment::FlatBed,
        Equipment::Refrigerated,
        Equipment::Rgn,
        Equipment::StepDeck,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Equipment::DryVan => "DryVan",
            Equipment::FlatBed => "FlatBed",
            Equipment::Refrigerated => "Refrigerated",
            Equipment::Rgn => "RGN",
            Equipment::StepDeck => "StepDeck",
        }
    }
}

impl fmt::Display for Equipment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Equipment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Equipment::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown equipment type {s:?}")))
    }
}

/// Attributes `b` of one offered load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadAttributes {
    pub origin: RegionId,
    pub destination: RegionId,
    pub equipment: Equipment,
    /// Loaded distance in miles.
    pub miles: f64,
    /// Call-in step.
    pub call_in: u32,
    /// Earliest pickup step, `>= call_in`.
    pub pickup: u32,
    /// Average loads per day on this lane.
    pub lane_daily_load: f64,
    /// Average loads per day outbound from the destination.
    pub dest_daily_demand: f64,
}

impl LoadAttributes {
    /// Checks the load invariants; `max_lag_steps` is the booking horizon.
    pub fn validate(&self, max_lag_steps: u32) -> Result<()> {
        if !(self.miles.is_finite() && self.miles > 0.0) {
            return Err(Error::invalid(format!("miles must be positive, got {}", self.miles)));
        }
        if self.pickup < self.call_in || self.pickup - self.call_in > max_lag_steps {
            return Err(Error::invalid(format!(
                "pickup lag {} outside [0, {max_lag_steps}]",
                self.pickup as i64 - self.call_in as i64
            )));
        }
        if !(self.lane_daily_load >= 0.0 && self.dest_daily_demand >= 0.0) {
            return Err(Error::invalid("daily load statistics must be nonnegative"));
        }
        Ok(())
    }

    /// Short human-readable context key, used in metric files.
    pub fn key(&self) -> String {
        format!("{}-{}-{}", self.origin, self.destination, self.equipment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Carrier,
    Shipper,
}

/// A binary accept/reject response, `y ∈ {−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    Accept,
    Reject,
}

impl Response {
    pub fn sign(self) -> f64 {
        match self {
            Response::Accept => 1.0,
            Response::Reject => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Response::Accept => 1,
            Response::Reject => -1,
        }
    }

    pub fn from_sign(y: i64) -> Result<Self> {
        match y {
            1 => Ok(Response::Accept),
            -1 => Ok(Response::Reject),
            other => Err(Error::invalid(format!("response must be -1 or +1, got {other}"))),
        }
    }

    pub fn from_bool(accepted: bool) -> Self {
        if accepted {
            Response::Accept
        } else {
            Response::Reject
        }
    }

    pub fn is_accept(self) -> bool {
        self == Response::Accept
    }
}

/// Logistic weights for one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub side: Side,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, side: Side) -> Self {
        WeightVector { weights, side }
    }

    pub fn zeros(dim: usize, side: Side) -> Self {
        WeightVector { weights: vec![0.0; dim], side }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn dot(&self, x: &FeatureVector) -> Result<f64> {
        if self.side != x.side {
            return Err(Error::SideMismatch { weights: self.side, features: x.side });
        }
        if self.weights.len() != x.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.values.len(),
                context: "weight/feature product",
            });
        }
        Ok(self.weights.iter().zip(&x.values).map(|(w, v)| w * v).sum())
    }
}

/// One sampled parameter pair `θ = (α, β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateModel {
    pub alpha: WeightVector,
    pub beta: WeightVector,
}

impl CandidateModel {
    pub fn new(alpha: WeightVector, beta: WeightVector) -> Result<Self> {
        if alpha.side != Side::Carrier || beta.side != Side::Shipper {
            return Err(Error::invalid("candidate needs carrier alpha and shipper beta"));
        }
        Ok(CandidateModel { alpha, beta })
    }

    pub fn check_against(&self, registry: &FeatureRegistry) -> Result<()> {
        for (w, side) in [(&self.alpha, Side::Carrier), (&self.beta, Side::Shipper)] {
            if w.side != side {
                return Err(Error::invalid("candidate side mismatch"));
            }
            if w.len() != registry.dim(side) {
                return Err(Error::DimensionMismatch {
                    expected: registry.dim(side),
                    got: w.len(),
                    context: "candidate against registry",
                });
            }
        }
        Ok(())
    }

    /// Carrier and shipper utility lines for context `b`.
    pub fn lines(&self, registry: &FeatureRegistry, b: &LoadAttributes) -> Result<(UtilityLine, UtilityLine)> {
        Ok((utility_line(&self.alpha, registry, b)?, utility_line(&self.beta, registry, b)?))
    }
}

/// Logistic function `1 / (1 + exp(−h))`, stable for any finite `h`.
pub fn sigmoid(h: f64) -> f64 {
    if h >= 0.0 {
        1.0 / (1.0 + (-h).exp())
    } else {
        let e = h.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(h)` without forming `σ(h)`.
pub fn log_sigmoid(h: f64) -> f64 {
    if h >= 0.0 {
        -(-h).exp().ln_1p()
    } else {
        h - h.exp().ln_1p()
    }
}

pub fn accept_prob(w: &WeightVector, x: &FeatureVector) -> Result<f64> {
    Ok(sigmoid(w.dot(x)?))
}

/// `f(b, p; θ) = f^c(b, p; α) · f^s(b, p; β)`.
pub fn joint_accept_prob(
    theta: &CandidateModel,
    registry: &FeatureRegistry,
    b: &LoadAttributes,
    p: f64,
) -> Result<f64> {
    let xc = carrier_features(registry, b, p)?;
    let xs = shipper_features(registry, b, p)?;
    Ok(accept_prob(&theta.alpha, &xc)? * accept_prob(&theta.beta, &xs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        let tiny = sigmoid(-1000.0);
        assert!(tiny >= 0.0 && tiny < 1e-300);
        assert!(sigmoid(-700.0) > 0.0);
        assert!(sigmoid(700.0) <= 1.0);
        assert!(sigmoid(800.0).is_finite());
    }

    #[test]
    fn log_sigmoid_matches_direct_form() {
        for h in [-30.0, -3.0, -0.2, 0.0, 0.7, 4.0, 25.0] {
            assert!((log_sigmoid(h) - sigmoid(h).ln()).abs() < 1e-12, "h = {h}");
        }
        assert!((log_sigmoid(-1000.0) + 1000.0).abs() < 1e-9);
        assert_eq!(log_sigmoid(0.0), -(2f64.ln()));
    }

    #[test]
    fn sigmoid_is_strictly_increasing_on_a_sweep() {
        let mut prev = sigmoid(-30.1);
        for i in -300..=300 {
            let v = sigmoid(i as f64 * 0.1);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn equipment_round_trips_through_names() {
        for e in Equipment::ALL {
            assert_eq!(e.name().parse::<Equipment>().unwrap(), e);
        }
        assert!("Tanker".parse::<Equipment>().is_err());
    }

    #[test]
    fn response_sign_parsing() {
        assert_eq!(Response::from_sign(1).unwrap(), Response::Accept);
        assert_eq!(Response::from_sign(-1).unwrap(), Response::Reject);
        assert!(Response::from_sign(0).is_err());
    }
}
