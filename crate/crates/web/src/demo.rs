use serde::Serialize;

use freightbid::harness::{run_bandit_experiment, BanditRunConfig};
use freightbid::policies::theory::{
    incomplete_learning_check, locate_confounding_belief, stationary_weight, uninstructive_bid, ContextFreeModel, Uninstructive,
};
use freightbid::policies::{exploit_choice, kg_choice, CurveTable, HorizonWeight, PolicyName, PriceGrid};
use freightbid::{Error, Result};

pub fn to_json<T: Serialize>(v: T) -> Result<String> {
    Ok(serde_json::to_string(&v)?)
}

fn model(v: &[f64]) -> Result<ContextFreeModel> {
    match v {
        &[a0, a1, b0, b1] if v.iter().all(|x| x.is_finite()) => Ok(ContextFreeModel::new(a0, a1, b0, b1)),
        _ => Err(Error::InvalidInput(format!("expected four finite coefficients, got {v:?}"))),
    }
}

fn grid(points: usize) -> Result<PriceGrid> {
    if !(2..=400).contains(&points) {
        return Err(Error::InvalidInput(format!("grid points must be in 2..=400, got {points}")));
    }
    PriceGrid::uniform(0.0, 4.0, points)
}

#[derive(Debug, Serialize)]
pub struct Curves {
    pub prices: Vec<f64>,
    /// `p f_k(p)` per candidate.
    pub candidate_revenue: [Vec<f64>; 2],
    pub expected_revenue: Vec<f64>,
    pub kg: Vec<f64>,
    pub kg_price: f64,
    pub exploit_price: f64,
}

pub fn price_curves(a: &[f64], b: &[f64], q1: f64, tau: f64, points: usize) -> Result<Curves> {
    if !(0.0..=1.0).contains(&q1) || !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput("need q1 in [0, 1] and a finite tau >= 0".into()));
    }
    let (ma, mb) = (model(a)?, model(b)?);
    let grid = grid(points)?;
    let table = CurveTable::new(vec![ma.lines(), mb.lines()], grid.points());
    let q = [q1, 1.0 - q1];
    let kg = kg_choice(&table, &q, tau);
    Ok(Curves {
        prices: grid.points().to_vec(),
        candidate_revenue: [table.candidate_revenue(0).to_vec(), table.candidate_revenue(1).to_vec()],
        expected_revenue: kg.diagnostics.iter().map(|e| e.expected_revenue).collect(),
        kg: kg.diagnostics.iter().map(|e| e.kg).collect(),
        kg_price: kg.price,
        exploit_price: exploit_choice(&table, &q).price,
    })
}

#[derive(Debug, Serialize)]
pub struct PairDiagnosis {
    /// `"none"`, `"degenerate"` or `"at"`.
    pub uninstructive: &'static str,
    pub p_hat: Option<f64>,
    pub member: bool,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub stationary_q1: Option<f64>,
    /// A belief under which KG with this `tau` bids `p̂` (needs `p̂` on the grid).
    pub confounding_q1: Option<f64>,
    pub note: Option<String>,
}

pub fn diagnose_pair(a: &[f64], b: &[f64], tau: f64, points: usize) -> Result<PairDiagnosis> {
    let pair = [model(a)?, model(b)?];
    let grid = grid(points)?;
    let (kind, p_hat) = match uninstructive_bid(&pair[0], &pair[1], grid.lower(), grid.upper()) {
        Uninstructive::None => ("none", None),
        Uninstructive::Degenerate => ("degenerate", None),
        Uninstructive::At(p) => ("at", Some(p)),
    };
    let mut d = PairDiagnosis {
        uninstructive: kind,
        p_hat,
        member: false,
        m1: None,
        m2: None,
        stationary_q1: None,
        confounding_q1: None,
        note: None,
    };
    match incomplete_learning_check(&pair, grid.lower(), grid.upper()) {
        Ok(c) => {
            d.member = c.member;
            d.m1 = c.m1.is_finite().then_some(c.m1);
            d.m2 = c.m2.is_finite().then_some(c.m2);
            d.stationary_q1 = stationary_weight(&c);
            if c.member {
                match locate_confounding_belief(&pair, &grid, tau) {
                    Ok(q) => d.confounding_q1 = q,
                    Err(e) => d.note = Some(e.to_string()),
                }
            }
        }
        Err(e) => d.note = Some(e.to_string()),
    }
    Ok(d)
}

#[derive(Debug, Serialize)]
pub struct PolicyTrace {
    pub policy: String,
    /// `(step, R(n)/n)` every `stride` steps and at the end.
    pub avg_regret: Vec<(usize, f64)>,
}

pub fn simulate_bandit(seed: u64, steps: usize, resample_base: u64, tau: f64, policies: &str) -> Result<Vec<PolicyTrace>> {
    if !(1..=5000).contains(&steps) {
        return Err(Error::InvalidInput(format!("steps must be in 1..=5000, got {steps}")));
    }
    let policies = policies
        .split(',')
        .map(|s| s.trim().parse::<PolicyName>())
        .collect::<Result<Vec<_>>>()?;
    let config = BanditRunConfig {
        seed,
        steps,
        reps: 1,
        resample_base,
        kg_tau: HorizonWeight::Constant(tau),
        policies,
        ..BanditRunConfig::default()
    };
    let result = run_bandit_experiment(&config)?;
    let stride = (steps / 100).max(1);
    Ok(result
        .policies
        .iter()
        .map(|p| {
            let s = &p.reps[0].steps;
            let avg_regret = s
                .iter()
                .enumerate()
                .filter(|(i, _)| (i + 1) % stride == 0 || i + 1 == s.len())
                .map(|(i, st)| (i + 1, st.cum_regret / (i + 1) as f64))
                .collect();
            PolicyTrace { policy: p.policy.to_string(), avg_regret }
        })
        .collect())
}
