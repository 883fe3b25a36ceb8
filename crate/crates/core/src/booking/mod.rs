//! Exogenous load arrivals `L̂_{tt'}`.
//!
//! Each step, every region emits a Poisson number of loads; each load picks
//! a lane out of its origin by lane weight, an equipment type, and a prebook
//! lag in days from the lag law.

pub mod io;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::choice_model::{Equipment, LoadAttributes, RegionId};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Longest prebook lag in days.
pub const MAX_LAG_DAYS: usize = 14;

/// Planar region coordinates in miles; distances are Euclidean times a
/// road circuity factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub regions: Vec<Region>,
    pub circuity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: RegionId,
    pub x: f64,
    pub y: f64,
}

impl Network {
    pub fn new(mut regions: Vec<Region>, circuity: f64) -> Result<Self> {
        regions.sort_by_key(|r| r.id);
        if regions.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::invalid("duplicate region id in network"));
        }
        if regions.is_empty() || !(circuity >= 1.0) {
            return Err(Error::invalid("network needs regions and circuity >= 1"));
        }
        Ok(Network { regions, circuity })
    }

    pub fn ids(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.regions.iter().map(|r| r.id)
    }

    pub fn index(&self, id: RegionId) -> Option<usize> {
        self.regions.binary_search_by_key(&id, |r| r.id).ok()
    }

    pub fn contains(&self, id: RegionId) -> bool {
        self.index(id).is_some()
    }

    /// Road miles between two regions (0 within a region).
    pub fn miles(&self, a: RegionId, b: RegionId) -> f64 {
        if a == b {
            return 0.0;
        }
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) => {
                let (p, q) = (self.regions[i], self.regions[j]);
                self.circuity * ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()
            }
            _ => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub origin: RegionId,
    pub destination: RegionId,
    pub weight: f64,
    pub miles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookingConfig {
    pub network: Network,
    pub lanes: Vec<Lane>,
    /// Expected loads per step out of each region (before day-of-week scaling).
    pub outbound_intensity: BTreeMap<RegionId, f64>,
    /// Probability of each prebook lag in days, `0..=14`.
    pub lag_distribution: Vec<f64>,
    pub dow_multipliers: [f64; 7],
    pub equipment_weights: [f64; 5],
    pub step_hours: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferedLoad {
    pub attributes: LoadAttributes,
    pub offered_at: u32,
    pub pickup_at: u32,
    pub lag_days: u32,
}

/// Truncated geometric law on `0..=max_days` with `P(lag ≥ tail_from) = tail`.
pub fn geometric_lag_distribution(max_days: usize, tail_from: usize, tail: f64) -> Result<Vec<f64>> {
    if !(tail > 0.0 && tail < 1.0) || tail_from == 0 || tail_from > max_days {
        return Err(Error::invalid("lag tail must be in (0,1) with 0 < tail_from <= max_days"));
    }
    let law = |rho: f64| -> Vec<f64> {
        let w: Vec<f64> = (0..=max_days).map(|d| rho.powi(d as i32)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let tail_of = |rho: f64| law(rho)[tail_from..].iter().sum::<f64>();
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-12);
    if !(tail_of(lo) < tail && tail_of(hi) > tail) {
        return Err(Error::invalid("requested lag tail is not reachable by a decreasing law"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail_of(mid) < tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(law(0.5 * (lo + hi)))
}

fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

impl BookingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_hours == 0 || 24 % self.step_hours != 0 {
            return Err(Error::Config(format!("step_hours {} must divide 24", self.step_hours)));
        }
        if self.lag_distribution.len() != MAX_LAG_DAYS + 1 {
            return Err(Error::Config(format!("lag_distribution needs {} entries", MAX_LAG_DAYS + 1)));
        }
        let s: f64 = self.lag_distribution.iter().sum();
        if self.lag_distribution.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::Config("lag_distribution must be a probability vector".into()));
        }
        if self.dow_multipliers.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::Config("dow_multipliers must be nonnegative".into()));
        }
        if self.equipment_weights.iter().any(|m| !(*m >= 0.0)) || self.equipment_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("equipment_weights need a positive entry".into()));
        }
        if !self.lanes.iter().any(|l| l.weight > 0.0) {
            return Err(Error::Config("at least one lane weight must be positive".into()));
        }
        for l in &self.lanes {
            if !(self.network.contains(l.origin) && self.network.contains(l.destination)) {
                return Err(Error::Config(format!("lane {}-{} uses an unknown region", l.origin, l.destination)));
            }
            if !(l.weight >= 0.0 && l.miles > 0.0 && l.miles.is_finite()) {
                return Err(Error::Config(format!("lane {}-{} needs weight >= 0 and miles > 0", l.origin, l.destination)));
            }
        }
        for (&r, &lam) in &self.outbound_intensity {
            if !(lam >= 0.0 && lam.is_finite()) {
                return Err(Error::Config(format!("outbound intensity of region {r} must be nonnegative")));
            }
            if lam > 0.0 && !self.lanes.iter().any(|l| l.origin == r && l.weight > 0.0) {
                return Err(Error::Config(format!("region {r} has outbound intensity but no lanes")));
            }
        }
        Ok(())
    }

    pub fn steps_per_day(&self) -> u32 {
        24 / self.step_hours
    }

    pub fn max_lag_steps(&self) -> u32 {
        MAX_LAG_DAYS as u32 * self.steps_per_day()
    }

    /// Pickup offset in steps for a lag in days. Same-day loads are due one
    /// step later, so every accepted offer lands strictly in the future.
    pub fn lag_steps(&self, lag_days: u32) -> u32 {
        (lag_days * self.steps_per_day()).max(1)
    }

    pub fn dow_multiplier(&self, t: u32) -> f64 {
        self.dow_multipliers[((t / self.steps_per_day()) % 7) as usize]
    }

    fn lanes_from(&self, origin: RegionId) -> Vec<&Lane> {
        self.lanes.iter().filter(|l| l.origin == origin && l.weight > 0.0).collect()
    }

    /// Expected loads per day on a lane.
    pub fn lane_daily_load(&self, origin: RegionId, destination: RegionId) -> f64 {
        let lanes = self.lanes_from(origin);
        let total: f64 = lanes.iter().map(|l| l.weight).sum();
        let w: f64 = lanes.iter().filter(|l| l.destination == destination).map(|l| l.weight).sum();
        if total == 0.0 {
            return 0.0;
        }
        self.outbound_intensity.get(&origin).copied().unwrap_or(0.0) * self.steps_per_day() as f64 * w / total
    }

    /// Expected loads per day out of a region.
    pub fn region_daily_demand(&self, region: RegionId) -> f64 {
        self.outbound_intensity.get(&region).copied().unwrap_or(0.0) * self.steps_per_day() as f64
    }

    /// Load attributes with lane statistics filled in from this configuration.
    pub fn attributes(&self, origin: RegionId, destination: RegionId, equipment: Equipment, miles: f64, call_in: u32, pickup: u32) -> LoadAttributes {
        LoadAttributes {
            origin,
            destination,
            equipment,
            miles,
            call_in,
            pickup,
            lane_daily_load: self.lane_daily_load(origin, destination),
            dest_daily_demand: self.region_daily_demand(destination),
        }
    }

    /// Offers called in during step `t`.
    pub fn sample_offers(&self, t: u32, rng: &mut SimRng) -> Vec<OfferedLoad> {
        let dow = self.dow_multiplier(t);
        let mut out = Vec::new();
        for (&origin, &lam) in &self.outbound_intensity {
            let mean = lam * dow;
            if mean <= 0.0 {
                continue;
            }
            let count = Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0);
            let lanes = self.lanes_from(origin);
            let weights: Vec<f64> = lanes.iter().map(|l| l.weight).collect();
            for _ in 0..count {
                let lane = lanes[pick(&weights, rng.random())];
                let equipment = Equipment::ALL[pick(&self.equipment_weights, rng.random())];
                let lag_days = pick(&self.lag_distribution, rng.random()) as u32;
                let pickup = t + self.lag_steps(lag_days);
                out.push(OfferedLoad {
                    attributes: self.attributes(origin, lane.destination, equipment, lane.miles, t, pickup),
                    offered_at: t,
                    pickup_at: pickup,
                    lag_days,
                });
            }
        }
        out
    }
}

/// Sampled against configured shares, per origin and per lane.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// `(origin, sampled share, configured share)` of total outbound volume.
    pub origin_shares: Vec<(RegionId, f64, f64)>,
    /// `(origin, destination, sampled share, configured share)` within each origin.
    pub lane_shares: Vec<(RegionId, RegionId, f64, f64)>,
    pub max_deviation: f64,
}

pub fn aggregate_consistency_report(samples: &[OfferedLoad], config: &BookingConfig) -> ConsistencyReport {
    let mut by_origin: BTreeMap<RegionId, f64> = BTreeMap::new();
    let mut by_lane: BTreeMap<(RegionId, RegionId), f64> = BTreeMap::new();
    for s in samples {
        *by_origin.entry(s.attributes.origin).or_default() += 1.0;
        *by_lane.entry((s.attributes.origin, s.attributes.destination)).or_default() += 1.0;
    }
    let n = samples.len().max(1) as f64;
    let total_lam: f64 = config.outbound_intensity.values().sum();
    let mut max_dev: f64 = 0.0;
    let mut origin_shares = Vec::new();
    let mut lane_shares = Vec::new();
    for (&o, &lam) in &config.outbound_intensity {
        if lam <= 0.0 {
            continue;
        }
        let sampled = by_origin.get(&o).copied().unwrap_or(0.0);
        let configured = lam / total_lam;
        max_dev = max_dev.max((sampled / n - configured).abs());
        origin_shares.push((o, sampled / n, configured));
        let lanes = config.lanes_from(o);
        let wsum: f64 = lanes.iter().map(|l| l.weight).sum();
        let mut dests: BTreeMap<RegionId, f64> = BTreeMap::new();
        for l in lanes {
            *dests.entry(l.destination).or_default() += l.weight / wsum;
        }
        for (d, share) in dests {
            let got = if sampled > 0.0 { by_lane.get(&(o, d)).copied().unwrap_or(0.0) / sampled } else { 0.0 };
            max_dev = max_dev.max((got - share).abs());
            lane_shares.push((o, d, got, share));
        }
    }
    ConsistencyReport { origin_shares, lane_shares, max_deviation: max_dev }
}

/// Parameters of the synthetic desk-scale network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticNetwork {
    pub regions: u32,
    pub width_miles: f64,
    pub height_miles: f64,
    pub circuity: f64,
    /// Expected loads per step across the whole network.
    pub loads_per_step: f64,
    /// Destinations per origin (nearest-biased).
    pub lanes_per_origin: usize,
    pub min_lane_miles: f64,
    pub step_hours: u32,
}

impl Default for SyntheticNetwork {
    fn default() -> Self {
        SyntheticNetwork {
            regions: 20,
            width_miles: 1400.0,
            height_miles: 900.0,
            circuity: 1.2,
            loads_per_step: 13.0,
            lanes_per_origin: 8,
            min_lane_miles: 60.0,
            step_hours: 6,
        }
    }
}

impl SyntheticNetwork {
    /// Regions scattered uniformly; lanes to the nearest destinations with
    /// random weights; uneven outbound intensity; flat day-of-week profile;
    /// geometric lag law with half the mass at four days or more.
    pub fn build(&self, rng: &mut SimRng) -> Result<BookingConfig> {
        if self.regions < 2 {
            return Err(Error::Config("a synthetic network needs at least 2 regions".into()));
        }
        let regions: Vec<Region> = (0..self.regions)
            .map(|i| Region { id: RegionId(i), x: rng.random::<f64>() * self.width_miles, y: rng.random::<f64>() * self.height_miles })
            .collect();
        let network = Network::new(regions, self.circuity)?;
        let mut lanes = Vec::new();
        let mut raw = BTreeMap::new();
        for o in network.ids() {
            let mut dests: Vec<(f64, RegionId)> = network.ids().filter(|&d| d != o).map(|d| (network.miles(o, d), d)).collect();
            dests.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(miles, d) in dests.iter().take(self.lanes_per_origin.max(1)) {
                lanes.push(Lane { origin: o, destination: d, weight: 0.2 + rng.random::<f64>(), miles: miles.max(self.min_lane_miles) });
            }
            raw.insert(o, 0.5 + rng.random::<f64>());
        }
        let total: f64 = raw.values().sum();
        let outbound_intensity = raw.into_iter().map(|(r, w)| (r, self.loads_per_step * w / total)).collect();
        let config = BookingConfig {
            network,
            lanes,
            outbound_intensity,
            lag_distribution: geometric_lag_distribution(MAX_LAG_DAYS, 4, 0.5)?,
            dow_multipliers: [1.0; 7],
            equipment_weights: [0.45, 0.2, 0.2, 0.05, 0.1],
            step_hours: self.step_hours,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn line_network(n: u32) -> Network {
        Network::new((0..n).map(|i| Region { id: RegionId(i), x: 100.0 * i as f64, y: 0.0 }).collect(), 1.0).unwrap()
    }

    fn two_lane_config() -> BookingConfig {
        BookingConfig {
            network: line_network(3),
            lanes: vec![
                Lane { origin: RegionId(0), destination: RegionId(1), weight: 3.0, miles: 100.0 },
                Lane { origin: RegionId(0), destination: RegionId(2), weight: 1.0, miles: 200.0 },
            ],
            outbound_intensity: [(RegionId(0), 2.0)].into_iter().collect(),
            lag_distribution: geometric_lag_distribution(MAX_LAG_DAYS, 4, 0.5).unwrap(),
            dow_multipliers: [1.0; 7],
            equipment_weights: [1.0, 0.0, 0.0, 0.0, 0.0],
            step_hours: 6,
        }
    }

    #[test]
    fn default_lag_law_has_half_mass_at_four_days() {
        let law = geometric_lag_distribution(MAX_LAG_DAYS, 4, 0.5).unwrap();
        assert_eq!(law.len(), 15);
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((law[4..].iter().sum::<f64>() - 0.5).abs() < 1e-12);
        assert!(law.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn lane_split_matches_weights() {
        let cfg = two_lane_config();
        cfg.validate().unwrap();
        let mut r = rng::stream(4, &[]);
        let mut samples = Vec::new();
        let mut t = 0;
        while samples.len() < 100_000 {
            samples.extend(cfg.sample_offers(t, &mut r));
            t += 1;
        }
        let rep = aggregate_consistency_report(&samples, &cfg);
        assert_eq!(rep.lane_shares.len(), 2);
        assert!((rep.lane_shares[0].2 - 0.75).abs() < 0.02);
        assert!((rep.lane_shares[1].2 - 0.25).abs() < 0.02);
        assert!(samples.iter().all(|s| s.attributes.origin == RegionId(0)));
        assert!(samples.iter().all(|s| s.pickup_at > s.offered_at && s.pickup_at - s.offered_at <= cfg.max_lag_steps()));
    }

    #[test]
    fn single_lane_has_zero_deviation() {
        let mut cfg = two_lane_config();
        cfg.lanes.truncate(1);
        let samples: Vec<_> = (0..50).flat_map(|t| cfg.sample_offers(t, &mut rng::stream(1, &[t as u64]))).collect();
        assert!(!samples.is_empty());
        assert_eq!(aggregate_consistency_report(&samples, &cfg).max_deviation, 0.0);
    }

    #[test]
    fn uniform_five_region_network_has_equal_shares() {
        let network = line_network(5);
        let lanes = (0..5)
            .map(|i| Lane { origin: RegionId(i), destination: RegionId((i + 1) % 5), weight: 1.0, miles: 100.0 })
            .collect();
        let cfg = BookingConfig {
            network,
            lanes,
            outbound_intensity: (0..5).map(|i| (RegionId(i), 1.0)).collect(),
            ..two_lane_config()
        };
        cfg.validate().unwrap();
        let mut r = rng::stream(8, &[]);
        let samples: Vec<_> = (0..20_000).flat_map(|t| cfg.sample_offers(t, &mut r)).collect();
        let rep = aggregate_consistency_report(&samples, &cfg);
        assert!(rep.origin_shares.iter().all(|(_, s, c)| (s - 0.2).abs() < 0.02 && *c == 0.2));
        assert!(rep.max_deviation < 0.02);
    }

    #[test]
    fn zero_intensity_is_quiet_and_sampling_is_reproducible() {
        let mut cfg = two_lane_config();
        let a = cfg.sample_offers(5, &mut rng::stream(3, &[5]));
        let b = cfg.sample_offers(5, &mut rng::stream(3, &[5]));
        assert_eq!(a, b);
        cfg.outbound_intensity.insert(RegionId(0), 0.0);
        assert!(cfg.sample_offers(5, &mut rng::stream(3, &[5])).is_empty());
    }

    #[test]
    fn lag_mapping_and_day_of_week() {
        let mut cfg = two_lane_config();
        assert_eq!(cfg.lag_steps(0), 1);
        assert_eq!(cfg.lag_steps(3), 12);
        assert_eq!(cfg.max_lag_steps(), 56);
        cfg.dow_multipliers = [1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 0.5];
        assert_eq!(cfg.dow_multiplier(3), 1.0);
        assert_eq!(cfg.dow_multiplier(4), 2.0);
        assert_eq!(cfg.dow_multiplier(27), 0.5);
        assert_eq!(cfg.dow_multiplier(28), 1.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = two_lane_config();
        cfg.step_hours = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = two_lane_config();
        cfg.lag_distribution[0] += 0.1;
        assert!(cfg.validate().is_err());
        let mut cfg = two_lane_config();
        cfg.outbound_intensity.insert(RegionId(2), 1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn synthetic_network_is_valid_and_deterministic() {
        let spec = SyntheticNetwork::default();
        let a = spec.build(&mut rng::stream(1, &[])).unwrap();
        let b = spec.build(&mut rng::stream(1, &[])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.network.regions.len(), 20);
        let lam: f64 = a.outbound_intensity.values().sum();
        assert!((lam - 13.0).abs() < 1e-9);
        let attrs = a.attributes(RegionId(0), a.lanes[0].destination, Equipment::FlatBed, 500.0, 0, 4);
        assert!(attrs.lane_daily_load > 0.0 && attrs.dest_daily_demand > 0.0);
    }
}
