//! Simulated truths, random candidate sets and the hindsight oracle.
//!
//! Models are drawn in weight space around a structured base: a carrier
//! who accepts above a break-even per-mile rate and a shipper who accepts
//! below a reservation rate, with lane, region and equipment effects added
//! as zero-mean noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::choice_model::{sigmoid, CandidateModel, FeatureRegistry, LoadAttributes, Side, WeightVector};
use crate::error::{Error, Result};
use crate::policies::PriceGrid;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponsePrior {
    /// Carrier break-even rate ($/mi) for a baseline lane, drawn uniformly.
    pub carrier_mid: (f64, f64),
    /// Carrier utility per $/mi.
    pub carrier_slope: (f64, f64),
    pub shipper_mid: (f64, f64),
    pub shipper_slope: (f64, f64),
    /// Extra $/mi both sides settle at on lanes of 300 miles or less.
    pub short_haul_premium: f64,
    /// Sd ($/mi) of a region's market-rate shift, shared by both sides.
    pub market_sd: f64,
    /// Sd of the remaining, side-specific region weights.
    pub region_sd: f64,
    /// Sd of equipment intercepts.
    pub equipment_sd: f64,
    /// Relative sd of the per-equipment price slopes.
    pub slope_sd: f64,
    /// Sd of the lane-volume and interaction weights.
    pub interaction_sd: f64,
}

impl Default for ResponsePrior {
    fn default() -> Self {
        ResponsePrior::truth()
    }
}

impl ResponsePrior {
    /// Narrow prior used to draw `θ*`.
    pub fn truth() -> Self {
        ResponsePrior {
            carrier_mid: (1.5, 1.9),
            carrier_slope: (2.5, 3.5),
            shipper_mid: (2.4, 2.8),
            shipper_slope: (2.5, 3.5),
            short_haul_premium: 0.3,
            market_sd: 0.5,
            region_sd: 0.3,
            equipment_sd: 0.3,
            slope_sd: 0.1,
            interaction_sd: 0.05,
        }
    }

    /// Wide prior for the learner's initial candidates.
    pub fn diffuse() -> Self {
        ResponsePrior {
            carrier_mid: (0.5, 3.0),
            carrier_slope: (1.0, 5.0),
            shipper_mid: (1.5, 3.5),
            shipper_slope: (1.0, 5.0),
            short_haul_premium: 0.3,
            market_sd: 0.3,
            region_sd: 1.0,
            equipment_sd: 0.5,
            slope_sd: 0.2,
            interaction_sd: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("carrier_mid", self.carrier_mid),
            ("carrier_slope", self.carrier_slope),
            ("shipper_mid", self.shipper_mid),
            ("shipper_slope", self.shipper_slope),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{name} must be an ordered finite range")));
            }
        }
        if self.carrier_slope.0 <= 0.0 || self.shipper_slope.0 <= 0.0 {
            return Err(Error::Config("price slopes must be positive".into()));
        }
        for (name, v) in [
            ("short_haul_premium", self.short_haul_premium),
            ("market_sd", self.market_sd),
            ("region_sd", self.region_sd),
            ("equipment_sd", self.equipment_sd),
            ("slope_sd", self.slope_sd),
            ("interaction_sd", self.interaction_sd),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    pub fn draw(&self, registry: &FeatureRegistry, rng: &mut SimRng) -> CandidateModel {
        let regions = registry.origin_indicators().len() + registry.destination_indicators().len();
        let shift: Vec<f64> = (0..regions).map(|_| normal(rng, self.market_sd)).collect();
        let alpha = self.side(registry, Side::Carrier, &shift, rng);
        let beta = self.side(registry, Side::Shipper, &shift, rng);
        CandidateModel::new(alpha, beta).expect("sides are correct by construction")
    }

    fn side(&self, registry: &FeatureRegistry, side: Side, shift: &[f64], rng: &mut SimRng) -> WeightVector {
        let l = registry.layout(side);
        let mut w = vec![0.0; l.dim];
        let (mid, slope, sign) = match side {
            Side::Carrier => (self.carrier_mid, self.carrier_slope, 1.0),
            Side::Shipper => (self.shipper_mid, self.shipper_slope, -1.0),
        };
        let m = uniform(rng, mid);
        let s = uniform(rng, slope);
        // u = sign · s · (p − m); the short-haul premium moves m.
        w[l.intercept] = -sign * s * m;
        w[l.min_dist] = -sign * s * self.short_haul_premium;
        for e in 0..5 {
            w[l.equip_price + e] = sign * s * (1.0 + normal(rng, self.slope_sd));
        }
        for (j, d) in (l.origin..l.equip.unwrap_or(l.equip_price)).zip(shift) {
            w[j] = -sign * s * d + normal(rng, self.region_sd);
        }
        if let Some(eq) = l.equip {
            for j in eq..eq + 5 {
                w[j] = normal(rng, self.equipment_sd);
            }
        }
        if let Some(j) = l.daily_load {
            w[j] = 0.3 + normal(rng, self.interaction_sd);
        }
        if let Some(j) = l.dest_daily_demand {
            w[j] = 0.1 + normal(rng, self.interaction_sd);
        }
        if let Some(j) = l.price_daily_load {
            w[j] = normal(rng, self.interaction_sd);
        }
        w[l.price_miles_min_dist] = normal(rng, self.interaction_sd * 2e-3);
        WeightVector::new(w, side)
    }
}

/// Where the learner's initial candidates come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CandidatePrior {
    /// Same shape as the truth prior.
    Structured(ResponsePrior),
    /// Every weight i.i.d. `N(0, sd²)`, with no sign or scale structure.
    Isotropic { sd: f64 },
}

impl CandidatePrior {
    pub fn validate(&self) -> Result<()> {
        match self {
            CandidatePrior::Structured(p) => p.validate(),
            CandidatePrior::Isotropic { sd } if sd.is_finite() && *sd >= 0.0 => Ok(()),
            CandidatePrior::Isotropic { .. } => Err(Error::Config("isotropic sd must be finite and nonnegative".into())),
        }
    }

    pub fn draw(&self, registry: &FeatureRegistry, rng: &mut SimRng) -> CandidateModel {
        match self {
            CandidatePrior::Structured(p) => p.draw(registry, rng),
            CandidatePrior::Isotropic { sd } => {
                let mut side = |side: Side| WeightVector::new((0..registry.dim(side)).map(|_| normal(rng, *sd)).collect(), side);
                let alpha = side(Side::Carrier);
                let beta = side(Side::Shipper);
                CandidateModel::new(alpha, beta).expect("sides are correct by construction")
            }
        }
    }
}

fn uniform(rng: &mut SimRng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn normal(rng: &mut SimRng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("positive sd").sample(rng)
    } else {
        0.0
    }
}

/// `K` draws from `prior`; with `truth = Some(θ*)` one slot (chosen at
/// random) holds the truth instead.
pub fn candidate_set(
    prior: &CandidatePrior,
    registry: &FeatureRegistry,
    k: usize,
    truth: Option<&CandidateModel>,
    rng: &mut SimRng,
) -> Result<(Vec<CandidateModel>, Option<usize>)> {
    if k == 0 {
        return Err(Error::EmptyCandidates);
    }
    let mut c: Vec<CandidateModel> = (0..k).map(|_| prior.draw(registry, rng)).collect();
    let slot = truth.map(|t| {
        let s = rng.random_range(0..k);
        c[s] = t.clone();
        s
    });
    Ok((c, slot))
}

/// `p · f(b, p; θ)` under a single model.
pub fn true_revenue(truth: &CandidateModel, registry: &FeatureRegistry, b: &LoadAttributes, p: f64) -> Result<f64> {
    let (lc, ls) = truth.lines(registry, b)?;
    Ok(p * sigmoid(lc.at(p)) * sigmoid(ls.at(p)))
}

/// Grid argmax of `p · f(b, p; θ*)` with its value.
pub fn oracle_price(truth: &CandidateModel, registry: &FeatureRegistry, b: &LoadAttributes, grid: &PriceGrid) -> Result<(f64, f64)> {
    let (lc, ls) = truth.lines(registry, b)?;
    let mut best = (grid.points()[0], f64::NEG_INFINITY);
    for &p in grid.points() {
        let v = p * sigmoid(lc.at(p)) * sigmoid(ls.at(p));
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(best)
}

/// Mean absolute gap between two models' carrier and shipper acceptance
/// curves over the grid, averaged over contexts and both sides.
pub fn curve_deviation(a: &CandidateModel, b: &CandidateModel, registry: &FeatureRegistry, contexts: &[LoadAttributes], grid: &PriceGrid) -> Result<f64> {
    if contexts.is_empty() {
        return Err(Error::invalid("curve deviation needs contexts"));
    }
    let mut total = 0.0;
    for ctx in contexts {
        let (ac, as_) = a.lines(registry, ctx)?;
        let (bc, bs) = b.lines(registry, ctx)?;
        for &p in grid.points() {
            total += (sigmoid(ac.at(p)) - sigmoid(bc.at(p))).abs() + (sigmoid(as_.at(p)) - sigmoid(bs.at(p))).abs();
        }
    }
    Ok(total / (2 * contexts.len() * grid.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice_model::{Equipment, RegionId};
    use crate::rng;

    fn registry() -> FeatureRegistry {
        FeatureRegistry::new((0..6).map(RegionId).collect(), (0..6).map(RegionId).collect()).unwrap()
    }

    fn ctx(o: u32, d: u32, miles: f64) -> LoadAttributes {
        LoadAttributes {
            origin: RegionId(o),
            destination: RegionId(d),
            equipment: Equipment::DryVan,
            miles,
            call_in: 0,
            pickup: 4,
            lane_daily_load: 0.5,
            dest_daily_demand: 2.0,
        }
    }

    #[test]
    fn truth_curves_are_monotone_and_span() {
        let reg = registry();
        let grid = PriceGrid::uniform(0.0, 4.0, 80).unwrap();
        let mut lo = 1.0f64;
        let mut hi = 0.0f64;
        for s in 0..20 {
            let t = ResponsePrior::truth().draw(&reg, &mut rng::stream(s, &[]));
            for (o, d) in [(0, 1), (2, 5), (4, 3)] {
                let (lc, ls) = t.lines(&reg, &ctx(o, d, 450.0)).unwrap();
                assert!(lc.slope > 0.0 && ls.slope < 0.0);
                let f: Vec<f64> = grid.points().iter().map(|&p| sigmoid(lc.at(p)) * sigmoid(ls.at(p))).collect();
                lo = lo.min(sigmoid(lc.at(grid.points()[0])));
                hi = hi.max(sigmoid(lc.at(4.0)));
                assert!(f.iter().any(|&v| v > 0.05));
            }
        }
        assert!(lo < 0.05 && hi > 0.95, "{lo} {hi}");
    }

    #[test]
    fn oracle_examples() {
        let reg = FeatureRegistry::empty();
        let grid = PriceGrid::uniform(0.0, 4.0, 5).unwrap();
        let dim_c = reg.carrier_dim();
        let dim_s = reg.shipper_dim();
        // Very large intercepts: f ≈ 1 everywhere, so the top price wins.
        let mut a = vec![0.0; dim_c];
        a[0] = 50.0;
        let mut b = vec![0.0; dim_s];
        b[0] = 50.0;
        let flat = CandidateModel::new(WeightVector::new(a, Side::Carrier), WeightVector::new(b, Side::Shipper)).unwrap();
        let c = ctx(u32::MAX - 1, u32::MAX, 1000.0);
        assert_eq!(oracle_price(&flat, &reg, &c, &grid).unwrap().0, 4.0);

        // Carrier σ(4(p − 1)), shipper σ(−4(p − 3)) on prices 0.8..4.
        let l = reg.layout(Side::Carrier);
        let mut a = vec![0.0; dim_c];
        a[0] = -4.0;
        a[l.equip_price] = 4.0;
        let ls = reg.layout(Side::Shipper);
        let mut b = vec![0.0; dim_s];
        b[0] = 12.0;
        b[ls.equip_price] = -4.0;
        let peak = CandidateModel::new(WeightVector::new(a, Side::Carrier), WeightVector::new(b, Side::Shipper)).unwrap();
        let vals: Vec<f64> = grid.points().iter().map(|&p| p * sigmoid(4.0 * (p - 1.0)) * sigmoid(-4.0 * (p - 3.0))).collect();
        let best = (0..5).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
        let (p, v) = oracle_price(&peak, &reg, &c, &grid).unwrap();
        assert_eq!(p, grid.points()[best]);
        assert!((v - vals[best]).abs() < 1e-12);
        assert!(p > 0.8 && p < 4.0);
    }

    #[test]
    fn truth_slot_is_recorded() {
        let reg = registry();
        let t = ResponsePrior::truth().draw(&reg, &mut rng::stream(1, &[]));
        let (c, slot) = candidate_set(&CandidatePrior::Structured(ResponsePrior::diffuse()), &reg, 5, Some(&t), &mut rng::stream(2, &[])).unwrap();
        assert_eq!(c[slot.unwrap()], t);
        assert_eq!(curve_deviation(&t, &c[slot.unwrap()], &reg, &[ctx(0, 1, 200.0)], &PriceGrid::uniform(0.0, 4.0, 8).unwrap()).unwrap(), 0.0);
    }
}
