use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{Equipment, LoadAttributes, RegionId, Side, WeightVector};
use crate::error::{Error, Result};

/// Loads at or below this distance set the `MinDist` indicator.
pub const MIN_DIST_MILES: f64 = 300.0;

const N_EQUIP: usize = 5;

/// Which regions get their own origin / destination indicator.
///
/// Carrier layout (in this order): intercept, DailyLoad, DestDailyDemand,
/// MinDist, origin indicators, destination indicators, 5 equipment
/// intercepts, 5 equipment×p terms, p·Miles·MinDist, p·DailyLoad.
///
/// Shipper layout: intercept, MinDist, origin indicators, destination
/// indicators, 5 equipment×p terms, p·Miles·MinDist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRegistry {
    origin_indicators: Vec<RegionId>,
    destination_indicators: Vec<RegionId>,
}

/// Regions whose observation count strictly exceeds `threshold`, sorted.
pub fn indicator_set(counts: &BTreeMap<RegionId, u64>, threshold: u64) -> Vec<RegionId> {
    counts
        .iter()
        .filter(|(_, &c)| c > threshold)
        .map(|(&r, _)| r)
        .collect()
}

pub fn build_feature_registry(
    origin_counts: &BTreeMap<RegionId, u64>,
    destination_counts: &BTreeMap<RegionId, u64>,
    threshold: u64,
) -> Result<FeatureRegistry> {
    if threshold < 1 {
        return Err(Error::invalid("indicator threshold must be at least 1"));
    }
    Ok(FeatureRegistry {
        origin_indicators: indicator_set(origin_counts, threshold),
        destination_indicators: indicator_set(destination_counts, threshold),
    })
}

impl FeatureRegistry {
    pub fn new(mut origins: Vec<RegionId>, mut destinations: Vec<RegionId>) -> Result<Self> {
        for list in [&mut origins, &mut destinations] {
            list.sort();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid("duplicate region in indicator list"));
            }
        }
        Ok(FeatureRegistry { origin_indicators: origins, destination_indicators: destinations })
    }

    /// A registry with no region indicators (global intercepts only).
    pub fn empty() -> Self {
        FeatureRegistry { origin_indicators: Vec::new(), destination_indicators: Vec::new() }
    }

    pub fn origin_indicators(&self) -> &[RegionId] {
        &self.origin_indicators
    }

    pub fn destination_indicators(&self) -> &[RegionId] {
        &self.destination_indicators
    }

    pub fn origin_index(&self, r: RegionId) -> Option<usize> {
        self.origin_indicators.binary_search(&r).ok()
    }

    pub fn destination_index(&self, r: RegionId) -> Option<usize> {
        self.destination_indicators.binary_search(&r).ok()
    }

    fn n_regions(&self) -> usize {
        self.origin_indicators.len() + self.destination_indicators.len()
    }

    pub fn carrier_dim(&self) -> usize {
        4 + self.n_regions() + 2 * N_EQUIP + 2
    }

    pub fn shipper_dim(&self) -> usize {
        2 + self.n_regions() + N_EQUIP + 1
    }

    pub fn dim(&self, side: Side) -> usize {
        match side {
            Side::Carrier => self.carrier_dim(),
            Side::Shipper => self.shipper_dim(),
        }
    }

    pub fn layout(&self, side: Side) -> Layout {
        let no = self.origin_indicators.len();
        let nd = self.destination_indicators.len();
        match side {
            Side::Carrier => {
                let origin = 4;
                let dest = origin + no;
                let equip = dest + nd;
                let equip_price = equip + N_EQUIP;
                Layout {
                    intercept: 0,
                    daily_load: Some(1),
                    dest_daily_demand: Some(2),
                    min_dist: 3,
                    origin,
                    dest,
                    equip: Some(equip),
                    equip_price,
                    price_miles_min_dist: equip_price + N_EQUIP,
                    price_daily_load: Some(equip_price + N_EQUIP + 1),
                    dim: self.carrier_dim(),
                }
            }
            Side::Shipper => {
                let origin = 2;
                let dest = origin + no;
                let equip_price = dest + nd;
                Layout {
                    intercept: 0,
                    daily_load: None,
                    dest_daily_demand: None,
                    min_dist: 1,
                    origin,
                    dest,
                    equip: None,
                    equip_price,
                    price_miles_min_dist: equip_price + N_EQUIP,
                    price_daily_load: None,
                    dim: self.shipper_dim(),
                }
            }
        }
    }

    /// Column names in layout order, used as CSV headers.
    pub fn column_names(&self, side: Side) -> Vec<String> {
        let l = self.layout(side);
        let mut names = vec![String::new(); l.dim];
        names[l.intercept] = "Intercept".into();
        if let Some(i) = l.daily_load {
            names[i] = "DailyLoad".into();
        }
        if let Some(i) = l.dest_daily_demand {
            names[i] = "DestDailyDemand".into();
        }
        names[l.min_dist] = "MinDist".into();
        for (k, r) in self.origin_indicators.iter().enumerate() {
            names[l.origin + k] = format!("I_O_{r}");
        }
        for (k, r) in self.destination_indicators.iter().enumerate() {
            names[l.dest + k] = format!("I_D_{r}");
        }
        for e in Equipment::ALL {
            if let Some(i) = l.equip {
                names[i + e.index()] = format!("I_T_{}", e.name());
            }
            names[l.equip_price + e.index()] = format!("p*I_T_{}", e.name());
        }
        names[l.price_miles_min_dist] = "p*Miles*MinDist".into();
        if let Some(i) = l.price_daily_load {
            names[i] = "p*DailyLoad".into();
        }
        names
    }
}

/// Column offsets of one side's covariate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub intercept: usize,
    pub daily_load: Option<usize>,
    pub dest_daily_demand: Option<usize>,
    pub min_dist: usize,
    pub origin: usize,
    pub dest: usize,
    pub equip: Option<usize>,
    pub equip_price: usize,
    pub price_miles_min_dist: usize,
    pub price_daily_load: Option<usize>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub side: Side,
}

/// The affine-in-price utility `intercept + slope · p` of one model on one context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityLine {
    pub intercept: f64,
    pub slope: f64,
}

impl UtilityLine {
    pub fn at(&self, p: f64) -> f64 {
        self.intercept + self.slope * p
    }
}

fn min_dist(b: &LoadAttributes) -> f64 {
    if b.miles <= MIN_DIST_MILES {
        1.0
    } else {
        0.0
    }
}

/// Calls `emit(index, constant_part, price_coefficient)` for every nonzero
/// entry of `x(b, p) = constant + p · price_coefficient`.
fn for_each_term(registry: &FeatureRegistry, side: Side, b: &LoadAttributes, mut emit: impl FnMut(usize, f64, f64)) {
    let l = registry.layout(side);
    let md = min_dist(b);
    emit(l.intercept, 1.0, 0.0);
    if let Some(i) = l.daily_load {
        emit(i, b.lane_daily_load, 0.0);
    }
    if let Some(i) = l.dest_daily_demand {
        emit(i, b.dest_daily_demand, 0.0);
    }
    emit(l.min_dist, md, 0.0);
    if let Some(k) = registry.origin_index(b.origin) {
        emit(l.origin + k, 1.0, 0.0);
    }
    if let Some(k) = registry.destination_index(b.destination) {
        emit(l.dest + k, 1.0, 0.0);
    }
    let e = b.equipment.index();
    if let Some(i) = l.equip {
        emit(i + e, 1.0, 0.0);
    }
    emit(l.equip_price + e, 0.0, 1.0);
    emit(l.price_miles_min_dist, 0.0, b.miles * md);
    if let Some(i) = l.price_daily_load {
        emit(i, 0.0, b.lane_daily_load);
    }
}

fn check_price(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::invalid(format!("bid must be a positive per-mile price, got {p}")));
    }
    Ok(())
}

pub fn features(registry: &FeatureRegistry, side: Side, b: &LoadAttributes, p: f64) -> Result<FeatureVector> {
    check_price(p)?;
    let mut values = vec![0.0; registry.dim(side)];
    for_each_term(registry, side, b, |i, c, s| values[i] = c + p * s);
    Ok(FeatureVector { values, side })
}

/// Carrier covariates `x^c(b, p)`. A region without an indicator contributes
/// an all-zero block, so such lanes fall back on the shared terms.
pub fn carrier_features(registry: &FeatureRegistry, b: &LoadAttributes, p: f64) -> Result<FeatureVector> {
    features(registry, Side::Carrier, b, p)
}

/// Shipper covariates `x^s(b, p)`.
pub fn shipper_features(registry: &FeatureRegistry, b: &LoadAttributes, p: f64) -> Result<FeatureVector> {
    features(registry, Side::Shipper, b, p)
}

/// `w · x(b, p)` as a line in `p`, without materialising the feature vector.
pub fn utility_line(w: &WeightVector, registry: &FeatureRegistry, b: &LoadAttributes) -> Result<UtilityLine> {
    let dim = registry.dim(w.side);
    if w.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: w.len(), context: "utility line" });
    }
    let mut line = UtilityLine { intercept: 0.0, slope: 0.0 };
    for_each_term(registry, w.side, b, |i, c, s| {
        line.intercept += w.weights[i] * c;
        line.slope += w.weights[i] * s;
    });
    Ok(line)
}
