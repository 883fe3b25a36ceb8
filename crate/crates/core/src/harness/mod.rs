//! Experiment drivers: bandit mode against a simulated truth and fleet mode
//! against the carrier simulator, plus metric emission.

mod bandit;
mod bidder;
mod emit;
mod fleet;
mod truth;

pub use bandit::{context_stream, keyed_response, network_registry, run_bandit_experiment, BanditPolicyResult, BanditRep, BanditResult, BanditRunConfig, BanditStep};
pub use bidder::{Bidder, LearningParams, Snapshot};
pub use emit::{emit_bandit_metrics, emit_fleet_metrics, mean_se, SummaryRow};
pub use fleet::{
    run_fleet_experiment, warm_up_value_function, FleetPolicyResult, FleetRep, FleetResult, FleetRunConfig, FleetStep, WarmupConfig,
};
pub use truth::{candidate_set, CandidatePrior, curve_deviation, oracle_price, true_revenue, ResponsePrior};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::booking::BookingConfig;
use crate::belief::ObservationRecord;
use crate::choice_model::{sigmoid, CandidateModel, FeatureRegistry, Response};
use crate::error::{Error, Result};
use crate::policies::PriceGrid;
use crate::rng::{self, keyed_uniform, label};

/// `points` equally spaced prices ending at `upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { lower: 0.0, upper: 4.0, points: 80 }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<PriceGrid> {
        PriceGrid::uniform(self.lower, self.upper, self.points).map_err(|e| Error::Config(format!("grid: {e}")))
    }
}

/// Mean-Price takes the mean accepted price from a synthetic history of
/// quotes drawn uniformly from `price_range` and answered by the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanPriceConfig {
    pub history: usize,
    pub price_range: (f64, f64),
    /// Used when no historical quote was accepted.
    pub fallback: f64,
}

impl Default for MeanPriceConfig {
    fn default() -> Self {
        MeanPriceConfig { history: 500, price_range: (0.5, 4.5), fallback: 2.0 }
    }
}

impl MeanPriceConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.price_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) || !(self.fallback > 0.0 && self.fallback.is_finite()) {
            return Err(Error::Config("mean-price needs a positive price range and fallback".into()));
        }
        Ok(())
    }

    /// The bid and whether the fallback was used.
    pub fn price(&self, booking: &BookingConfig, truth: &CandidateModel, registry: &FeatureRegistry, seed: u64, rep: u64) -> Result<(f64, bool)> {
        let history = synthetic_history(booking, truth, registry, self.history, self.price_range, seed, rep)?;
        let accepted: Vec<f64> = history.iter().filter(|o| o.y_c.is_accept() && o.y_s.is_accept()).map(|o| o.p).collect();
        match crate::policies::mean_price_policy(&accepted) {
            Ok(p) => Ok((p, false)),
            Err(_) => Ok((self.fallback, true)),
        }
    }
}

/// `n` past quotes at prices uniform on `price_range`, answered by `truth`.
pub fn synthetic_history(
    booking: &BookingConfig,
    truth: &CandidateModel,
    registry: &FeatureRegistry,
    n: usize,
    (lo, hi): (f64, f64),
    seed: u64,
    rep: u64,
) -> Result<Vec<ObservationRecord>> {
    let contexts = bandit::context_stream(booking, n, seed, &[label::HISTORY, rep]);
    let mut g = rng::stream(seed, &[label::HISTORY, rep, 1]);
    let mut out = Vec::with_capacity(n);
    for (i, b) in contexts.into_iter().enumerate() {
        let p = if hi > lo { g.random_range(lo..hi) } else { lo };
        let (lc, ls) = truth.lines(registry, &b)?;
        let y_c = Response::from_bool(keyed_uniform(seed, &[label::HISTORY, rep, i as u64, 2]) < sigmoid(lc.at(p)));
        let y_s = Response::from_bool(keyed_uniform(seed, &[label::HISTORY, rep, i as u64, 3]) < sigmoid(ls.at(p)));
        out.push(ObservationRecord { n: i as u64, b, p, y_c, y_s });
    }
    Ok(out)
}
