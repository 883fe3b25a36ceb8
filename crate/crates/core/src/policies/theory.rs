//! Context-free two-candidate diagnostics: uninstructive bids, the
//! incomplete-learning set and confounding beliefs.

use serde::{Deserialize, Serialize};

use super::{kg_choice, CurveTable, PriceGrid};
use crate::choice_model::{
    sigmoid, CandidateModel, Equipment, FeatureRegistry, LoadAttributes, RegionId, Side, UtilityLine, WeightVector,
};
use crate::error::{Error, Result};

/// `f^c(p) = σ(α₀ + α₁p)`, `f^s(p) = σ(β₀ + β₁p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextFreeModel {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl ContextFreeModel {
    pub fn new(alpha0: f64, alpha1: f64, beta0: f64, beta1: f64) -> Self {
        ContextFreeModel { alpha0, alpha1, beta0, beta1 }
    }

    pub fn lines(&self) -> (UtilityLine, UtilityLine) {
        (
            UtilityLine { intercept: self.alpha0, slope: self.alpha1 },
            UtilityLine { intercept: self.beta0, slope: self.beta1 },
        )
    }

    pub fn carrier(&self, p: f64) -> f64 {
        sigmoid(self.alpha0 + self.alpha1 * p)
    }

    pub fn shipper(&self, p: f64) -> f64 {
        sigmoid(self.beta0 + self.beta1 * p)
    }

    /// `d ln f / dp = α₁(1 − f^c) + β₁(1 − f^s)`.
    pub fn log_slope(&self, p: f64) -> f64 {
        self.alpha1 * (1.0 - self.carrier(p)) + self.beta1 * (1.0 - self.shipper(p))
    }

    /// Embeds the model in a registry so that on [`context_free_load`] the
    /// candidate's utility lines are exactly this model's.
    pub fn candidate(&self, registry: &FeatureRegistry) -> CandidateModel {
        let lc = registry.layout(Side::Carrier);
        let ls = registry.layout(Side::Shipper);
        let mut a = vec![0.0; registry.carrier_dim()];
        a[lc.intercept] = self.alpha0;
        a[lc.equip_price + Equipment::DryVan.index()] = self.alpha1;
        let mut b = vec![0.0; registry.shipper_dim()];
        b[ls.intercept] = self.beta0;
        b[ls.equip_price + Equipment::DryVan.index()] = self.beta1;
        CandidateModel { alpha: WeightVector::new(a, Side::Carrier), beta: WeightVector::new(b, Side::Shipper) }
    }
}

/// A load whose only active covariates are the intercepts and the DryVan
/// price term (long haul, no lane statistics, regions without indicators).
pub fn context_free_load() -> LoadAttributes {
    LoadAttributes {
        origin: RegionId(u32::MAX - 1),
        destination: RegionId(u32::MAX),
        equipment: Equipment::DryVan,
        miles: 1000.0,
        call_in: 0,
        pickup: 0,
        lane_daily_load: 0.0,
        dest_daily_demand: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Uninstructive {
    /// No common crossing inside the range.
    None,
    /// The two models coincide; every price is uninstructive.
    Degenerate,
    At(f64),
}

/// Crossing of two lines, `Ok(None)` if parallel, `Err(())` if identical.
fn crossing(a: UtilityLine, b: UtilityLine) -> std::result::Result<Option<f64>, ()> {
    let ds = a.slope - b.slope;
    let di = b.intercept - a.intercept;
    if ds == 0.0 {
        return if di == 0.0 { Err(()) } else { Ok(None) };
    }
    Ok(Some(di / ds))
}

/// The price `p̂ ∈ [lower, upper]` at which both the carrier and the shipper
/// curves of `j` and `k` intersect, if any.
pub fn uninstructive_bid(j: &ContextFreeModel, k: &ContextFreeModel, lower: f64, upper: f64) -> Uninstructive {
    let (jc, js) = j.lines();
    let (kc, ks) = k.lines();
    let p = match (crossing(jc, kc), crossing(js, ks)) {
        (Err(()), Err(())) => return Uninstructive::Degenerate,
        (Err(()), Ok(Some(p))) | (Ok(Some(p)), Err(())) => p,
        (Ok(Some(pc)), Ok(Some(ps))) if (pc - ps).abs() <= 1e-9 => 0.5 * (pc + ps),
        _ => return Uninstructive::None,
    };
    if p >= lower && p <= upper {
        Uninstructive::At(p)
    } else {
        Uninstructive::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncompleteLearning {
    pub member: bool,
    pub p_hat: Option<f64>,
    pub m1: f64,
    pub m2: f64,
}

/// Membership of the pair in the incomplete-learning set:
/// `M₂ > 0`, `M₁ < 0` and `M₁ + M₂ ≥ −1/p̂`.
pub fn incomplete_learning_check(pair: &[ContextFreeModel; 2], lower: f64, upper: f64) -> Result<IncompleteLearning> {
    for m in pair {
        if !(m.alpha1 > 0.0 && m.beta1 < 0.0) {
            return Err(Error::Precondition(
                "context-free models need a rising carrier curve and a falling shipper curve".into(),
            ));
        }
    }
    let Uninstructive::At(p) = uninstructive_bid(&pair[0], &pair[1], lower, upper) else {
        return Ok(IncompleteLearning { member: false, p_hat: None, m1: f64::NAN, m2: f64::NAN });
    };
    let m1 = pair[0].log_slope(p);
    let m2 = pair[1].log_slope(p);
    Ok(IncompleteLearning { member: m2 > 0.0 && m1 < 0.0 && m1 + m2 >= -1.0 / p, p_hat: Some(p), m1, m2 })
}

/// Weight `q₁` making `p̂` a stationary point of the mixture revenue over a
/// continuous price range: `q₁M₁ + (1 − q₁)M₂ = −1/p̂`.
pub fn stationary_weight(check: &IncompleteLearning) -> Option<f64> {
    let p = check.p_hat?;
    let q = (check.m2 + 1.0 / p) / (check.m2 - check.m1);
    (q.is_finite() && (0.0..=1.0).contains(&q)).then_some(q)
}

fn kg_index(table: &CurveTable, q1: f64, tau: f64) -> usize {
    kg_choice(table, &[q1, 1.0 - q1], tau).index.unwrap_or(0)
}

/// A belief `q̂₁` under which the KG policy with weight `tau` bids the grid
/// point `p̂`. Bisects for the upper end of `{q₁ : argmax > p̂}` and the lower
/// end of `{q₁ : argmax < p̂}` and returns the midpoint of the gap, or `None`
/// if KG never settles on `p̂`.
pub fn locate_confounding_belief(pair: &[ContextFreeModel; 2], grid: &PriceGrid, tau: f64) -> Result<Option<f64>> {
    let check = incomplete_learning_check(pair, grid.lower(), grid.upper())?;
    let Some(p_hat) = check.p_hat else { return Ok(None) };
    let Some(target) = grid.index_of(p_hat) else {
        return Err(Error::Precondition(format!("uninstructive bid {p_hat} is not a grid point")));
    };
    let table = CurveTable::new(vec![pair[0].lines(), pair[1].lines()], grid.points());
    let bisect = |pred: &dyn Fn(usize) -> bool| -> Option<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if !pred(kg_index(&table, lo, tau)) || pred(kg_index(&table, hi, tau)) {
            return None;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if pred(kg_index(&table, mid, tau)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    };
    let Some(upper_end) = bisect(&|i| i > target) else { return Ok(None) };
    let Some(lower_end) = bisect(&|i| i >= target) else { return Ok(None) };
    let q = 0.5 * (upper_end + lower_end);
    Ok((kg_index(&table, q, tau) == target).then_some(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_example_has_shared_intersection_at_two() {
        let a = ContextFreeModel::new(0.0, 1.0, 0.0, -1.0);
        let b = ContextFreeModel::new(-2.0, 2.0, 2.0, -2.0);
        assert_eq!(uninstructive_bid(&a, &b, 0.0, 4.0), Uninstructive::At(2.0));
        assert_eq!(uninstructive_bid(&a, &b, 0.0, 1.5), Uninstructive::None);
        assert_eq!(uninstructive_bid(&a, &a, 0.0, 4.0), Uninstructive::Degenerate);
    }

    #[test]
    fn mismatched_crossings_have_no_uninstructive_bid() {
        // Carrier lines cross at p = 1, shipper lines at p = 3.
        let a = ContextFreeModel::new(0.0, 1.0, 0.0, -1.0);
        let b = ContextFreeModel::new(-1.0, 2.0, 3.0, -2.0);
        assert_eq!(uninstructive_bid(&a, &b, 0.0, 4.0), Uninstructive::None);
    }

    #[test]
    fn crossing_example_is_outside_the_set() {
        // M₁ = 1·(1 − σ(2)) − (1 − σ(−2)) and M₂ = 2(1 − σ(2)) − 2(1 − σ(−2)).
        let a = ContextFreeModel::new(0.0, 1.0, 0.0, -1.0);
        let b = ContextFreeModel::new(-2.0, 2.0, 2.0, -2.0);
        let c = incomplete_learning_check(&[a, b], 0.0, 4.0).unwrap();
        let m1 = (1.0 - sigmoid(2.0)) - (1.0 - sigmoid(-2.0));
        assert!((c.m1 - m1).abs() < 1e-15);
        assert!((c.m2 - 2.0 * m1).abs() < 1e-15);
        assert!((c.m1 + 0.7616).abs() < 1e-4);
        assert!(!c.member);
    }

    #[test]
    fn no_crossing_means_not_a_member() {
        let a = ContextFreeModel::new(0.0, 1.0, 0.0, -1.0);
        let b = ContextFreeModel::new(1.0, 1.0, 0.0, -1.0);
        let c = incomplete_learning_check(&[a, b], 0.0, 4.0).unwrap();
        assert!(!c.member && c.p_hat.is_none());
    }

    #[test]
    fn wrong_slope_signs_are_rejected() {
        let a = ContextFreeModel::new(0.0, -1.0, 0.0, -1.0);
        let b = ContextFreeModel::new(-2.0, 2.0, 2.0, -2.0);
        assert!(incomplete_learning_check(&[a, b], 0.0, 4.0).is_err());
    }

    #[test]
    fn embedded_candidate_reproduces_lines() {
        let m = ContextFreeModel::new(-1.5, 0.75, 3.0, -1.25);
        for reg in [FeatureRegistry::empty(), FeatureRegistry::new(vec![RegionId(1)], vec![RegionId(2)]).unwrap()] {
            let (lc, ls) = m.candidate(&reg).lines(&reg, &context_free_load()).unwrap();
            assert_eq!((lc, ls), m.lines());
        }
    }
}
