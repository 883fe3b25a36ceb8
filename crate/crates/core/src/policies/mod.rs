//! Bidding policies over a discrete price grid.
//!
//! Everything is computed from per-candidate utility lines, so a grid scan
//! costs `O(K·M)` and a full knowledge-gradient sweep `O(4·K·M²)`.

pub mod theory;

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::belief::BeliefState;
use crate::choice_model::{sigmoid, CandidateModel, FeatureRegistry, LoadAttributes, UtilityLine};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    lower: f64,
    upper: f64,
    points: Vec<f64>,
}

impl PriceGrid {
    pub fn new(lower: f64, upper: f64, points: Vec<f64>) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper && lower >= 0.0) {
            return Err(Error::invalid(format!("bad price range ({lower}, {upper}]")));
        }
        if points.is_empty() {
            return Err(Error::invalid("price grid is empty"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("price grid must be strictly increasing"));
        }
        if points[0] <= lower || points[points.len() - 1] > upper {
            return Err(Error::invalid("price grid must lie inside (lower, upper]"));
        }
        Ok(PriceGrid { lower, upper, points })
    }

    /// `m` evenly spaced points `l + (u − l)·i/m`, `i = 1..=m`.
    pub fn uniform(lower: f64, upper: f64, m: usize) -> Result<Self> {
        // the last point is pinned to `upper`; the formula can round past it
        let points = (1..=m).map(|i| if i == m { upper } else { lower + (upper - lower) * i as f64 / m as f64 }).collect();
        PriceGrid::new(lower, upper, points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Index of a grid point equal to `p` within `1e-12`.
    pub fn index_of(&self, p: f64) -> Option<usize> {
        self.points.iter().position(|&x| (x - p).abs() <= 1e-12)
    }
}

/// Weight `τ` on the knowledge-gradient term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "kebab-case")]
pub enum HorizonWeight {
    Constant(f64),
    /// `τ = N − n` for a declared horizon `N`.
    Remaining(u64),
}

impl HorizonWeight {
    pub fn tau(&self, n: u64) -> f64 {
        match *self {
            HorizonWeight::Constant(t) => t.max(0.0),
            HorizonWeight::Remaining(horizon) => horizon.saturating_sub(n) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceEval {
    pub price: f64,
    pub expected_revenue: f64,
    pub kg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub price: f64,
    /// Grid index of `price`; `None` for off-grid bids.
    pub index: Option<usize>,
    pub score: f64,
    pub diagnostics: Vec<PriceEval>,
}

/// Response curves of `K` candidates on a fixed context, tabulated on a grid.
#[derive(Debug, Clone)]
pub struct CurveTable {
    prices: Vec<f64>,
    lines: Vec<(UtilityLine, UtilityLine)>,
    /// `p_j · f_k(p_j)`, row-major by candidate.
    revenue: Vec<f64>,
}

impl CurveTable {
    pub fn new(lines: Vec<(UtilityLine, UtilityLine)>, prices: &[f64]) -> Self {
        let mut revenue = Vec::with_capacity(lines.len() * prices.len());
        for (lc, ls) in &lines {
            revenue.extend(prices.iter().map(|&p| p * sigmoid(lc.at(p)) * sigmoid(ls.at(p))));
        }
        CurveTable { prices: prices.to_vec(), lines, revenue }
    }

    pub fn from_belief(state: &BeliefState, registry: &FeatureRegistry, b: &LoadAttributes, grid: &PriceGrid) -> Result<Self> {
        Ok(CurveTable::new(state.lines(registry, b)?, grid.points()))
    }

    pub fn k(&self) -> usize {
        self.lines.len()
    }

    pub fn m(&self) -> usize {
        self.prices.len()
    }

    fn row(&self, k: usize) -> &[f64] {
        let m = self.m();
        &self.revenue[k * m..(k + 1) * m]
    }

    /// `p_j f_k(p_j)` for candidate `k`.
    pub fn candidate_revenue(&self, k: usize) -> &[f64] {
        self.row(k)
    }

    /// `Σ_k w_k p_j f_k(p_j)` for every `j`.
    pub fn mixture_revenue(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        for (k, &wk) in w.iter().enumerate() {
            if wk != 0.0 {
                for (o, r) in out.iter_mut().zip(self.row(k)) {
                    *o += wk * r;
                }
            }
        }
        out
    }

    fn max_mixture(&self, w: &[f64]) -> f64 {
        self.mixture_revenue(w).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Knowledge-gradient value of measuring at grid index `i` under weights `q`:
    /// the four-outcome sum of `max_{p'} p' Σ_k q_k f_k(p') L_k(y | p_i)` minus
    /// `max_p p Σ_k q_k f_k(p)`.
    pub fn kg_value(&self, q: &[f64], i: usize) -> f64 {
        self.kg_value_with_base(q, i, self.max_mixture(q))
    }

    fn kg_value_with_base(&self, q: &[f64], i: usize, base: f64) -> f64 {
        let p = self.prices[i];
        let mut w = vec![0.0; q.len()];
        let mut total = 0.0;
        for yc in [1.0, -1.0] {
            for ys in [1.0, -1.0] {
                for (k, (lc, ls)) in self.lines.iter().enumerate() {
                    w[k] = q[k] * sigmoid(yc * lc.at(p)) * sigmoid(ys * ls.at(p));
                }
                total += self.max_mixture(&w);
            }
        }
        total - base
    }

    /// Expected revenue and KG value at every grid point.
    pub fn evaluate(&self, q: &[f64], with_kg: bool) -> Vec<PriceEval> {
        let er = self.mixture_revenue(q);
        let base = er.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..self.m())
            .map(|i| PriceEval {
                price: self.prices[i],
                expected_revenue: er[i],
                kg: if with_kg && self.k() > 1 { self.kg_value_with_base(q, i, base) } else { 0.0 },
            })
            .collect()
    }
}

/// First index of the maximum (ties go to the lowest price).
pub fn argmax(scores: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.into_iter().enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

fn decide(prices: &[f64], scores: &[f64], diagnostics: Vec<PriceEval>) -> PolicyDecision {
    let (i, s) = argmax(scores.iter().copied());
    PolicyDecision { price: prices[i], index: Some(i), score: s, diagnostics }
}

/// `p · Σ_k q_k f(b, p; θ_k)`.
pub fn expected_revenue(state: &BeliefState, registry: &FeatureRegistry, b: &LoadAttributes, p: f64) -> Result<f64> {
    Ok(p * state.predictive_accept_prob(registry, b, p)?)
}

/// Knowledge-gradient value of bidding `p` (which must be on `grid`).
pub fn kg_value(state: &BeliefState, registry: &FeatureRegistry, b: &LoadAttributes, p: f64, grid: &PriceGrid) -> Result<f64> {
    let i = grid.index_of(p).ok_or_else(|| Error::invalid(format!("price {p} is not on the grid")))?;
    let table = CurveTable::from_belief(state, registry, b, grid)?;
    Ok(if state.k() == 1 { 0.0 } else { table.kg_value(state.q(), i) })
}

/// `argmax_p p Σ q_k f_k + τ ν(p)` on a tabulated context.
pub fn kg_choice(table: &CurveTable, q: &[f64], tau: f64) -> PolicyDecision {
    let evals = table.evaluate(q, tau > 0.0);
    let scores: Vec<f64> = evals.iter().map(|e| e.expected_revenue + tau * e.kg).collect();
    decide(&table.prices, &scores, evals)
}

pub fn exploit_choice(table: &CurveTable, q: &[f64]) -> PolicyDecision {
    let evals = table.evaluate(q, false);
    let scores: Vec<f64> = evals.iter().map(|e| e.expected_revenue).collect();
    decide(&table.prices, &scores, evals)
}

/// Draws `k ~ q` from one uniform.
pub fn sample_index(q: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &v) in q.iter().enumerate() {
        acc += v;
        if u < acc {
            return k;
        }
    }
    q.iter().rposition(|&v| v > 0.0).unwrap_or(q.len() - 1)
}

pub fn thompson_choice(table: &CurveTable, q: &[f64], rng: &mut SimRng) -> PolicyDecision {
    thompson_from(table, sample_index(q, rng.random::<f64>()))
}

/// Thompson decision once candidate `k` has been drawn.
pub fn thompson_from(table: &CurveTable, k: usize) -> PolicyDecision {
    decide(&table.prices, table.row(k), Vec::new())
}

pub fn opt_thompson_choice(table: &CurveTable, q: &[f64], rng: &mut SimRng) -> PolicyDecision {
    opt_thompson_from(table, q, sample_index(q, rng.random::<f64>()))
}

/// Per-price `max(sampled, mean)` once candidate `k` has been drawn.
pub fn opt_thompson_from(table: &CurveTable, q: &[f64], k: usize) -> PolicyDecision {
    let mean = table.mixture_revenue(q);
    let scores: Vec<f64> = table.row(k).iter().zip(&mean).map(|(s, m)| s.max(*m)).collect();
    decide(&table.prices, &scores, Vec::new())
}

pub fn kg_policy(state: &BeliefState, registry: &FeatureRegistry, b: &LoadAttributes, tau: HorizonWeight, grid: &PriceGrid) -> Result<PolicyDecision> {
    let table = CurveTable::from_belief(state, registry, b, grid)?;
    Ok(kg_choice(&table, state.q(), tau.tau(state.n())))
}

pub fn exploit_policy(state: &BeliefState, registry: &FeatureRegistry, b: &LoadAttributes, grid: &PriceGrid) -> Result<PolicyDecision> {
    let table = CurveTable::from_belief(state, registry, b, grid)?;
    Ok(exploit_choice(&table, state.q()))
}

pub fn thompson_policy(state: &BeliefState, registry: &FeatureRegistry, b: &LoadAttributes, grid: &PriceGrid, rng: &mut SimRng) -> Result<PolicyDecision> {
    let table = CurveTable::from_belief(state, registry, b, grid)?;
    Ok(thompson_choice(&table, state.q(), rng))
}

pub fn opt_thompson_policy(state: &BeliefState, registry: &FeatureRegistry, b: &LoadAttributes, grid: &PriceGrid, rng: &mut SimRng) -> Result<PolicyDecision> {
    let table = CurveTable::from_belief(state, registry, b, grid)?;
    Ok(opt_thompson_choice(&table, state.q(), rng))
}

/// Myopic price against a single point estimate.
pub fn est_opt_policy(fitted: &CandidateModel, registry: &FeatureRegistry, b: &LoadAttributes, grid: &PriceGrid) -> Result<PolicyDecision> {
    let table = CurveTable::new(vec![fitted.lines(registry, b)?], grid.points());
    Ok(exploit_choice(&table, &[1.0]))
}

/// Mean of previously accepted per-mile prices. Not clamped to any grid.
pub fn mean_price_policy(history_prices: &[f64]) -> Result<f64> {
    if history_prices.is_empty() {
        return Err(Error::EmptyHistory("mean price needs accepted prices or a fallback"));
    }
    Ok(history_prices.iter().sum::<f64>() / history_prices.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    Kg,
    Exploit,
    Ts,
    OptTs,
    EstOpt,
    MeanPrice,
}

impl PolicyName {
    pub const ALL: [PolicyName; 6] = [
        PolicyName::Kg,
        PolicyName::Exploit,
        PolicyName::Ts,
        PolicyName::OptTs,
        PolicyName::EstOpt,
        PolicyName::MeanPrice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Kg => "kg",
            PolicyName::Exploit => "exploit",
            PolicyName::Ts => "ts",
            PolicyName::OptTs => "opt-ts",
            PolicyName::EstOpt => "est-opt",
            PolicyName::MeanPrice => "mean-price",
        }
    }

    /// Whether the policy keeps a sampled belief with bagging.
    pub fn uses_belief(self) -> bool {
        matches!(self, PolicyName::Kg | PolicyName::Exploit | PolicyName::Ts | PolicyName::OptTs)
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyName::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown policy {s:?} (expected kg, exploit, ts, opt-ts, est-opt or mean-price)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: f64, s: f64) -> UtilityLine {
        UtilityLine { intercept: a, slope: s }
    }

    #[test]
    fn paper_grid_has_eighty_points() {
        let g = PriceGrid::uniform(0.0, 4.0, 80).unwrap();
        assert_eq!(g.len(), 80);
        assert!((g.points()[0] - 0.05).abs() < 1e-15);
        assert_eq!(g.points()[79], 4.0);
        assert_eq!(g.points()[39], 2.0);
        assert_eq!(g.index_of(2.0), Some(39));
        assert!(PriceGrid::new(1.0, 0.0, vec![0.5]).is_err());
        assert!(PriceGrid::new(0.0, 1.0, vec![0.5, 0.5]).is_err());
        assert!(PriceGrid::new(0.0, 1.0, vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn horizon_rule() {
        assert_eq!(HorizonWeight::Remaining(100).tau(40), 60.0);
        assert_eq!(HorizonWeight::Remaining(100).tau(140), 0.0);
        assert_eq!(HorizonWeight::Constant(7.5).tau(10_000), 7.5);
    }

    #[test]
    fn exploit_ties_and_monotone_revenue() {
        let prices = [1.0, 2.0, 3.0];
        // p·f constant: f = c/p is not logistic, so use a flat zero revenue instead.
        let t = CurveTable::new(vec![(line(-800.0, 0.0), line(0.0, 0.0))], &prices);
        assert_eq!(exploit_choice(&t, &[1.0]).index, Some(0));
        let t = CurveTable::new(vec![(line(800.0, 0.0), line(800.0, 0.0))], &prices);
        assert_eq!(exploit_choice(&t, &[1.0]).price, 3.0);
    }

    #[test]
    fn exploit_finds_hand_scanned_interior_peak() {
        // f(p) = σ(3 − 2p), revenue on {0.5, 1, 1.5, 2, 2.5}:
        // 0.4410, 0.7311, 0.7500, 0.5379, 0.3034 → peak at 1.5.
        let prices = [0.5, 1.0, 1.5, 2.0, 2.5];
        let t = CurveTable::new(vec![(line(3.0, -2.0), line(800.0, 0.0))], &prices);
        let d = exploit_choice(&t, &[1.0]);
        assert_eq!(d.price, 1.5);
        assert!((d.score - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_candidate_has_zero_kg() {
        let t = CurveTable::new(vec![(line(-1.0, 1.0), line(2.0, -1.0))], &[0.5, 1.0, 2.0]);
        for i in 0..3 {
            assert!(t.kg_value(&[1.0], i).abs() < 1e-15);
        }
        let kg = kg_choice(&t, &[1.0], 1e6);
        assert_eq!(kg.index, exploit_choice(&t, &[1.0]).index);
    }

    #[test]
    fn zero_tau_reduces_to_exploit() {
        let lines = vec![(line(-1.0, 1.0), line(2.0, -1.0)), (line(-3.0, 2.5), line(4.0, -1.5))];
        let t = CurveTable::new(lines, &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        let q = [0.3, 0.7];
        assert_eq!(kg_choice(&t, &q, 0.0).index, exploit_choice(&t, &q).index);
    }

    #[test]
    fn thompson_frequencies_follow_q() {
        let lines = vec![(line(0.0, 1.0), line(3.0, -2.0)), (line(-2.0, 1.0), line(6.0, -2.0))];
        let prices: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
        let t = CurveTable::new(lines, &prices);
        let a = argmax(t.row(0).iter().copied()).0;
        let b = argmax(t.row(1).iter().copied()).0;
        assert_ne!(a, b);
        let mut rng = crate::rng::stream(11, &[]);
        let hits = (0..10_000).filter(|_| thompson_choice(&t, &[0.5, 0.5], &mut rng).index == Some(a)).count();
        assert!((hits as f64 / 10_000.0 - 0.5).abs() < 0.02, "{hits}");
    }

    #[test]
    fn degenerate_belief_collapses_policies() {
        let lines = vec![(line(0.0, 1.0), line(3.0, -2.0)), (line(-2.0, 1.0), line(6.0, -2.0))];
        let prices: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
        let t = CurveTable::new(lines, &prices);
        let q = [0.0, 1.0];
        let e = exploit_choice(&t, &q).index;
        let mut rng = crate::rng::stream(1, &[]);
        assert_eq!(kg_choice(&t, &q, 50.0).index, e);
        assert_eq!(thompson_choice(&t, &q, &mut rng).index, e);
        assert_eq!(opt_thompson_choice(&t, &q, &mut rng).index, e);
    }

    fn logit(f: f64) -> f64 {
        (f / (1.0 - f)).ln()
    }

    /// Carrier curve through `f(1) = f1`, `f(2) = f2`; shipper always accepts.
    fn through(f1: f64, f2: f64) -> (UtilityLine, UtilityLine) {
        let s = logit(f2) - logit(f1);
        (line(logit(f1) - s, s), line(800.0, 0.0))
    }

    #[test]
    fn optimistic_thompson_prefers_mean_best_when_sample_undervalues_it() {
        // Revenues: A = (0.6, 0.5), B = (0.2, 1.2); the mean at q = (½, ½) is (0.4, 0.85).
        let t = CurveTable::new(vec![through(0.6, 0.25), through(0.2, 0.6)], &[1.0, 2.0]);
        let q = [0.5, 0.5];
        let mean = t.mixture_revenue(&q);
        assert!((mean[0] - 0.4).abs() < 1e-9 && (mean[1] - 0.85).abs() < 1e-9);
        assert_eq!(thompson_from(&t, 0).price, 1.0);
        assert_eq!(opt_thompson_from(&t, &q, 0).price, 2.0);
        for k in 0..2 {
            let ts = t.row(k);
            let ots: Vec<f64> = ts.iter().zip(&mean).map(|(a, b)| a.max(*b)).collect();
            assert!(ots.iter().zip(ts).all(|(o, s)| o >= s));
        }
    }

    #[test]
    fn sample_index_boundaries() {
        assert_eq!(sample_index(&[0.5, 0.5], 0.0), 0);
        assert_eq!(sample_index(&[0.5, 0.5], 0.4999), 0);
        assert_eq!(sample_index(&[0.5, 0.5], 0.5), 1);
        assert_eq!(sample_index(&[0.3, 0.7, 0.0], 0.99999999999999999), 1);
    }

    #[test]
    fn mean_price_is_unclamped() {
        assert_eq!(mean_price_policy(&[2.0, 3.0]).unwrap(), 2.5);
        assert_eq!(mean_price_policy(&[4.56]).unwrap(), 4.56);
        assert!(mean_price_policy(&[]).is_err());
    }

    #[test]
    fn policy_names_parse() {
        for p in PolicyName::ALL {
            assert_eq!(p.as_str().parse::<PolicyName>().unwrap(), p);
        }
        assert!("ucb".parse::<PolicyName>().is_err());
    }
}
