//! Load acceptance by stochastic lookahead.
//!
//! From the current fleet state, each sample path accepts every offer,
//! adds sampled future demand, and rolls the dispatch policy forward with
//! the base model's frozen value function. The share of loads of each
//! `(pickup, key)` that get a driver estimates the coverage probability;
//! an offer is accepted when that estimate clears a threshold.

mod io;

pub use io::write_coverage_csv;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::booking::BookingConfig;
use crate::dispatch::{solve_dispatch, Contribution, ValueFunctionApprox};
use crate::error::{Error, Result};
use crate::fleet::{AcceptedLoad, FleetParams, FleetState, LoadKey};
use crate::par::par_map;
use crate::rng::{self, label};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookaheadConfig {
    pub n_paths: u32,
    /// Steps simulated after the current one.
    pub horizon: u32,
    pub theta_accept: f64,
    /// $ per loaded mile credited to sampled future loads.
    pub market_rate: f64,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        LookaheadConfig { n_paths: 20, horizon: 56, theta_accept: 0.8, market_rate: 2.0 }
    }
}

impl LookaheadConfig {
    /// `theta_accept > 1` is rejected here; tests that need it build the struct directly.
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.horizon == 0 {
            return Err(Error::Config("lookahead needs n_paths >= 1 and horizon >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.theta_accept) {
            return Err(Error::Config(format!("theta_accept must lie in [0, 1], got {}", self.theta_accept)));
        }
        if !(self.market_rate >= 0.0 && self.market_rate.is_finite()) {
            return Err(Error::Config("market_rate must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// `ρ̄_{t,t'b}` for the keys of the offers it was built from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageEstimate {
    pub rho_bar: BTreeMap<(u32, LoadKey), f64>,
}

impl CoverageEstimate {
    /// 0 for keys the lookahead never saw.
    pub fn get(&self, pickup: u32, key: &LoadKey) -> f64 {
        self.rho_bar.get(&(pickup, *key)).copied().unwrap_or(0.0)
    }
}

/// Everything the rollout needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct LookaheadModel<'a> {
    pub booking: &'a BookingConfig,
    pub fleet: &'a FleetParams,
    pub costs: &'a Contribution,
    pub vfa: &'a ValueFunctionApprox,
}

/// Per-key `(covered, accepted)` counts from one sample path.
pub fn rollout(
    base: &FleetState,
    offers: &[AcceptedLoad],
    keys: &BTreeSet<(u32, LoadKey)>,
    config: &LookaheadConfig,
    model: LookaheadModel<'_>,
    path_seed: u64,
) -> Result<BTreeMap<(u32, LoadKey), (u32, u32)>> {
    let mut s = base.clone();
    let t0 = s.t;
    let end = t0 + config.horizon;
    let mut rng = rng::stream(path_seed, &[]);
    for l in offers {
        s.loads.pending.entry(l.attributes.pickup).or_default().push(l.clone());
    }
    let mut counts: BTreeMap<(u32, LoadKey), (u32, u32)> = BTreeMap::new();
    let network = &model.booking.network;
    while s.t <= end {
        let t = s.t;
        let sol = solve_dispatch(&s, model.vfa, network, model.fleet, model.costs);
        let due = s.due_loads();
        let mut covered = vec![false; due.len()];
        for (_, j, _) in sol.decision.moves() {
            covered[j] = true;
        }
        for (l, c) in due.iter().zip(&covered) {
            let k = (t, LoadKey::of(&l.attributes, model.fleet.miles_bucket));
            if keys.contains(&k) {
                let e = counts.entry(k).or_default();
                e.0 += *c as u32;
                e.1 += 1;
            }
        }
        s.advance_time(&sol.decision, Vec::new(), &[], network, model.fleet)?;
        if s.t > end {
            break;
        }
        for o in model.booking.sample_offers(s.t, &mut rng) {
            if o.pickup_at <= end {
                let revenue = config.market_rate * o.attributes.miles;
                s.loads.pending.entry(o.pickup_at).or_default().push(AcceptedLoad { attributes: o.attributes, revenue });
            }
        }
    }
    Ok(counts)
}

/// Path seeds for a lookahead triggered at base step `t`.
pub fn path_seeds(seed: u64, t: u32, n_paths: u32) -> Vec<u64> {
    (0..n_paths).map(|p| rng::derive(seed, &[label::LOOKAHEAD, t as u64, p as u64])).collect()
}

/// Averages per-path coverage over the offers' keys. Keys with no accepted
/// load in a path are left out of that path's average.
pub fn run_lookahead(
    base: &FleetState,
    offers: &[AcceptedLoad],
    config: &LookaheadConfig,
    model: LookaheadModel<'_>,
    seeds: &[u64],
) -> Result<CoverageEstimate> {
    if offers.is_empty() {
        return Err(Error::invalid("lookahead needs at least one offer"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("lookahead needs at least one path"));
    }
    for l in offers {
        if l.attributes.pickup <= base.t {
            return Err(Error::invalid(format!("offer pickup {} is not after t = {}", l.attributes.pickup, base.t)));
        }
    }
    let keys: BTreeSet<(u32, LoadKey)> = offers
        .iter()
        .map(|l| (l.attributes.pickup, LoadKey::of(&l.attributes, model.fleet.miles_bucket)))
        .collect();
    let per_path = par_map(seeds.len(), |p| rollout(base, offers, &keys, config, model, seeds[p]));
    let mut samples: BTreeMap<(u32, LoadKey), Vec<f64>> = BTreeMap::new();
    for r in per_path {
        for (k, (covered, accepted)) in r? {
            if accepted > 0 {
                samples.entry(k).or_default().push(covered as f64 / accepted as f64);
            }
        }
    }
    let rho_bar = keys
        .into_iter()
        .map(|k| {
            let v = samples.remove(&k).unwrap_or_default();
            let mean = if v.is_empty() { 0.0 } else { mean_sorted(v) };
            (k, mean)
        })
        .collect();
    Ok(CoverageEstimate { rho_bar })
}

// Sorting first makes the mean independent of path order.
fn mean_sorted(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// `x^L`: accept an offer iff the coverage of its key reaches `theta`.
pub fn accept_loads(offers: &[AcceptedLoad], coverage: &CoverageEstimate, theta: f64, miles_bucket: f64) -> Vec<bool> {
    offers
        .iter()
        .map(|l| coverage.get(l.attributes.pickup, &LoadKey::of(&l.attributes, miles_bucket)) >= theta)
        .collect()
}

#[cfg(test)]
mod tests;
