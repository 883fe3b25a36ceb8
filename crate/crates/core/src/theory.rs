//! Numerical property suites for the KG policy.
//!
//! Each suite returns a [`CheckResult`]; `check-theory` runs them all and
//! writes the results as CSV. The suites that take a `kg` argument accept
//! any implementation with the signature of [`CurveTable::kg_value`] so
//! that a deliberately broken one can be shown to fail.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, ObservationRecord};
use crate::booking::SyntheticNetwork;
use crate::choice_model::{sigmoid, CandidateModel, Equipment, FeatureRegistry, LoadAttributes, RegionId, Response};
use crate::error::Result;
use crate::harness::{candidate_set, context_stream, network_registry, CandidatePrior, ResponsePrior};
use crate::par::par_map;
use crate::policies::theory::{context_free_load, locate_confounding_belief, uninstructive_bid, ContextFreeModel, Uninstructive};
use crate::policies::{expected_revenue, kg_policy, kg_value, CurveTable, HorizonWeight, PriceGrid};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub seed: u64,
    pub nonnegativity_draws: usize,
    /// Candidate counts drawn uniformly from this inclusive range.
    pub k_range: (usize, usize),
    pub oracle_instances: usize,
    pub nullity_pairs: usize,
    pub consistency_seeds: usize,
    pub consistency_steps: usize,
    pub consistency_contexts: usize,
    pub consistency_tau: f64,
    /// Seeds that must reach `q_truth ≥ 0.99`.
    pub consistency_required: usize,
    pub stall_steps: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            seed: 1,
            nonnegativity_draws: 10_000,
            k_range: (2, 5),
            oracle_instances: 1000,
            nullity_pairs: 100,
            consistency_seeds: 20,
            consistency_steps: 2000,
            consistency_contexts: 50,
            consistency_tau: 100.0,
            consistency_required: 19,
            stall_steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub trials: usize,
    pub failures: usize,
    /// Worst value of the checked quantity (its meaning is per suite).
    pub worst: f64,
    pub detail: String,
}

pub type KgFn = fn(&CurveTable, &[f64], usize) -> f64;

fn reference_kg(t: &CurveTable, q: &[f64], i: usize) -> f64 {
    t.kg_value(q, i)
}

const TOL: f64 = 1e-10;

fn random_q(rng: &mut SimRng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn small_registry() -> FeatureRegistry {
    FeatureRegistry::new(vec![RegionId(1), RegionId(2)], vec![RegionId(2), RegionId(3)]).expect("distinct ids")
}

fn random_load(rng: &mut SimRng) -> LoadAttributes {
    let r = |rng: &mut SimRng| RegionId(rng.random_range(1..=4));
    LoadAttributes {
        origin: r(rng),
        destination: r(rng),
        equipment: Equipment::ALL[rng.random_range(0..Equipment::ALL.len())],
        miles: rng.random_range(50.0..1500.0),
        call_in: 0,
        pickup: 4,
        lane_daily_load: rng.random_range(0.0..2.0),
        dest_daily_demand: rng.random_range(0.0..2.0),
    }
}

fn random_grid(rng: &mut SimRng, max_points: usize) -> PriceGrid {
    let m = rng.random_range(2..=max_points);
    PriceGrid::uniform(0.0, 4.0, m).expect("valid grid")
}

/// Weights of a random candidate; structured draws give realistic curves,
/// isotropic ones cover everything else.
fn random_candidate(rng: &mut SimRng, registry: &FeatureRegistry) -> CandidateModel {
    let prior = if rng.random_bool(0.5) {
        CandidatePrior::Structured(ResponsePrior::diffuse())
    } else {
        CandidatePrior::Isotropic { sd: rng.random_range(0.1..2.0) }
    };
    prior.draw(registry, rng)
}

/// KG values over random beliefs, contexts and prices are nonnegative.
pub fn kg_nonnegativity(config: &TheoryConfig, kg: KgFn) -> CheckResult {
    let registry = small_registry();
    let mut rng = rng::stream(config.seed, &[1]);
    let (mut failures, mut worst) = (0, f64::INFINITY);
    for _ in 0..config.nonnegativity_draws {
        let k = rng.random_range(config.k_range.0..=config.k_range.1);
        let b = random_load(&mut rng);
        let lines: Vec<_> = (0..k)
            .map(|_| random_candidate(&mut rng, &registry).lines(&registry, &b).expect("registry matches"))
            .collect();
        let grid = random_grid(&mut rng, 20);
        let table = CurveTable::new(lines, grid.points());
        let q = random_q(&mut rng, k);
        let i = rng.random_range(0..grid.len());
        let v = kg(&table, &q, i);
        worst = worst.min(v);
        if !(v >= -TOL) {
            failures += 1;
        }
    }
    CheckResult {
        name: "kg-nonnegative",
        passed: failures == 0,
        trials: config.nonnegativity_draws,
        failures,
        worst,
        detail: format!("min kg {worst:.3e}, tolerance -{TOL:e}"),
    }
}

/// KG by explicit transition: update the belief for each of the four
/// outcomes, take the best expected revenue under each posterior and
/// average with the predictive outcome probabilities.
pub fn transition_kg_oracle(state: &BeliefState, registry: &FeatureRegistry, b: &LoadAttributes, p: f64, grid: &PriceGrid) -> Result<f64> {
    let best = |s: &BeliefState| -> Result<f64> {
        let mut m = f64::NEG_INFINITY;
        for &x in grid.points() {
            m = m.max(expected_revenue(s, registry, b, x)?);
        }
        Ok(m)
    };
    let mut total = 0.0;
    for y_c in [Response::Accept, Response::Reject] {
        for y_s in [Response::Accept, Response::Reject] {
            let obs = ObservationRecord { n: state.n(), b: b.clone(), p, y_c, y_s };
            let mut prob = 0.0;
            for (c, q) in state.candidates().iter().zip(state.q()) {
                prob += q * obs.log_likelihood(c, registry)?.exp();
            }
            total += prob * best(&state.posterior_update(registry, obs)?)?;
        }
    }
    Ok(total - best(state)?)
}

/// Tabulated KG agrees with [`transition_kg_oracle`].
pub fn kg_oracle_equivalence(config: &TheoryConfig) -> CheckResult {
    let registry = small_registry();
    let mut rng = rng::stream(config.seed, &[2]);
    let (mut failures, mut worst) = (0, 0.0f64);
    let mut errors = 0;
    for _ in 0..config.oracle_instances {
        let k = rng.random_range(1..=4);
        let candidates: Vec<_> = (0..k).map(|_| random_candidate(&mut rng, &registry)).collect();
        let state = BeliefState::with_weights(candidates, random_q(&mut rng, k)).expect("valid weights");
        let grid = random_grid(&mut rng, 10);
        let b = random_load(&mut rng);
        let p = grid.points()[rng.random_range(0..grid.len())];
        match (kg_value(&state, &registry, &b, p, &grid), transition_kg_oracle(&state, &registry, &b, p, &grid)) {
            (Ok(a), Ok(o)) => {
                let gap = (a - o).abs();
                worst = worst.max(gap);
                if !(gap <= TOL) {
                    failures += 1;
                }
            }
            _ => errors += 1,
        }
    }
    CheckResult {
        name: "kg-oracle",
        passed: failures == 0 && errors == 0,
        trials: config.oracle_instances,
        failures: failures + errors,
        worst,
        detail: format!("max |kg - oracle| {worst:.3e}, {errors} evaluation errors"),
    }
}

/// A context-free pair whose carrier and shipper lines both cross at `p_hat`.
fn crossing_pair(rng: &mut SimRng, p_hat: f64) -> [ContextFreeModel; 2] {
    let c = rng.random_range(-2.0..2.0);
    let s = rng.random_range(-2.0..2.0);
    let mut m = || {
        let a1 = rng.random_range(0.2..3.0);
        let b1 = -rng.random_range(0.2..3.0);
        ContextFreeModel::new(c - a1 * p_hat, a1, s - b1 * p_hat, b1)
    };
    [m(), m()]
}

/// The KG value of the uninstructive bid vanishes.
pub fn uninstructive_nullity(config: &TheoryConfig) -> CheckResult {
    let registry = FeatureRegistry::empty();
    let b = context_free_load();
    let grid = PriceGrid::uniform(0.0, 4.0, 80).expect("valid grid");
    let mut rng = rng::stream(config.seed, &[3]);
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..config.nullity_pairs {
        let p_hat = grid.points()[rng.random_range(0..grid.len())];
        let pair = crossing_pair(&mut rng, p_hat);
        let located = matches!(uninstructive_bid(&pair[0], &pair[1], 0.0, 4.0), Uninstructive::At(p) if (p - p_hat).abs() <= 1e-9);
        let q1 = rng.random_range(0.01..0.99);
        let state = BeliefState::with_weights(vec![pair[0].candidate(&registry), pair[1].candidate(&registry)], vec![q1, 1.0 - q1])
            .expect("valid weights");
        let v = kg_value(&state, &registry, &b, p_hat, &grid).unwrap_or(f64::NAN);
        worst = worst.max(v.abs());
        if !(located && v.abs() <= TOL) {
            failures += 1;
        }
    }
    CheckResult {
        name: "uninstructive-nullity",
        passed: failures == 0,
        trials: config.nullity_pairs,
        failures,
        worst,
        detail: format!("max |kg(p_hat)| {worst:.3e}"),
    }
}

/// Steps until the truth's posterior weight first reaches 0.99, if it does.
fn consistency_run(config: &TheoryConfig, seed: u64) -> Result<Option<usize>> {
    let booking = SyntheticNetwork::default().build(&mut rng::stream(config.seed, &[4, 0]))?;
    let registry = network_registry(&booking)?;
    let grid = PriceGrid::uniform(0.0, 4.0, 80)?;
    let truth = ResponsePrior::truth().draw(&registry, &mut rng::stream(config.seed, &[4, 1, seed]));
    let (candidates, slot) = candidate_set(
        &CandidatePrior::Structured(ResponsePrior::diffuse()),
        &registry,
        5,
        Some(&truth),
        &mut rng::stream(config.seed, &[4, 2, seed]),
    )?;
    let slot = slot.expect("truth was inserted");
    let contexts = context_stream(&booking, config.consistency_contexts, config.seed, &[4, 3, seed]);
    let mut state = BeliefState::init_uniform(candidates)?;
    let mut rng = rng::stream(config.seed, &[4, 4, seed]);
    let tau = HorizonWeight::Constant(config.consistency_tau);
    for n in 0..config.consistency_steps {
        if state.q()[slot] >= 0.99 {
            return Ok(Some(n));
        }
        let b = &contexts[n % contexts.len()];
        let p = kg_policy(&state, &registry, b, tau, &grid)?.price;
        let (lc, ls) = truth.lines(&registry, b)?;
        let y_c = Response::from_bool(rng.random::<f64>() < sigmoid(lc.at(p)));
        let y_s = Response::from_bool(rng.random::<f64>() < sigmoid(ls.at(p)));
        state.update(&registry, ObservationRecord { n: n as u64, b: b.clone(), p, y_c, y_s })?;
    }
    Ok((state.q()[slot] >= 0.99).then_some(config.consistency_steps))
}

/// With the truth among five candidates, KG concentrates the posterior on it.
pub fn posterior_consistency(config: &TheoryConfig) -> CheckResult {
    let runs = par_map(config.consistency_seeds, |s| consistency_run(config, s as u64));
    let mut hits = 0;
    let mut slowest = 0usize;
    let mut errors = 0;
    for r in &runs {
        match r {
            Ok(Some(n)) => {
                hits += 1;
                slowest = slowest.max(*n);
            }
            Ok(None) => {}
            Err(_) => errors += 1,
        }
    }
    CheckResult {
        name: "posterior-consistency",
        passed: errors == 0 && hits >= config.consistency_required,
        trials: config.consistency_seeds,
        failures: config.consistency_seeds - hits,
        worst: slowest as f64,
        detail: format!(
            "{hits}/{} seeds reached q_truth >= 0.99 within {} steps (slowest {slowest}), {errors} errors",
            config.consistency_seeds, config.consistency_steps
        ),
    }
}

/// The context-free pair used for the stall check. Both carrier lines pass
/// through 0 at `p = 2`, as do both shipper lines, so `p̂ = 2`. The
/// log-slopes there are `M₁ = −0.9` and `M₂ = 0.5`, inside the
/// incomplete-learning set.
pub fn confounding_pair() -> [ContextFreeModel; 2] {
    [ContextFreeModel::new(-1.0, 0.5, 4.6, -2.3), ContextFreeModel::new(-3.0, 1.5, 1.0, -0.5)]
}

/// Weight on KG's information term for the stall check.
pub const STALL_TAU: f64 = 1.0;

/// Started from a confounding belief, KG bids `p̂` forever and learns nothing.
pub fn confounding_stall(config: &TheoryConfig) -> CheckResult {
    let pair = confounding_pair();
    let grid = PriceGrid::uniform(0.0, 4.0, 80).expect("valid grid");
    let fail = |detail: String| CheckResult { name: "confounding-stall", passed: false, trials: 0, failures: 1, worst: f64::NAN, detail };
    let q_hat = match locate_confounding_belief(&pair, &grid, STALL_TAU) {
        Ok(Some(q)) => q,
        Ok(None) => return fail("no confounding belief located".into()),
        Err(e) => return fail(e.to_string()),
    };
    let p_hat = match uninstructive_bid(&pair[0], &pair[1], grid.lower(), grid.upper()) {
        Uninstructive::At(p) => p,
        _ => return fail("pair has no uninstructive bid".into()),
    };
    let registry = FeatureRegistry::empty();
    let b = context_free_load();
    let mut state = BeliefState::with_weights(vec![pair[0].candidate(&registry), pair[1].candidate(&registry)], vec![q_hat, 1.0 - q_hat])
        .expect("valid weights");
    let mut rng = rng::stream(config.seed, &[5]);
    let (mut off_target, mut drift) = (0, 0.0f64);
    for n in 0..config.stall_steps {
        let p = match kg_policy(&state, &registry, &b, HorizonWeight::Constant(STALL_TAU), &grid) {
            Ok(d) => d.price,
            Err(e) => return fail(e.to_string()),
        };
        if p != p_hat {
            off_target += 1;
        }
        let y_c = Response::from_bool(rng.random::<f64>() < pair[0].carrier(p));
        let y_s = Response::from_bool(rng.random::<f64>() < pair[0].shipper(p));
        if state.update(&registry, ObservationRecord { n: n as u64, b: b.clone(), p, y_c, y_s }).is_err() {
            return fail("update failed".into());
        }
        drift = drift.max((state.q()[0] - q_hat).abs());
    }
    CheckResult {
        name: "confounding-stall",
        passed: off_target == 0 && drift <= 1e-9,
        trials: config.stall_steps,
        failures: off_target,
        worst: drift,
        detail: format!("q_hat {q_hat:.6}, p_hat {p_hat}, {off_target} bids off p_hat, max |dq| {drift:.3e}"),
    }
}

pub fn run_all(config: &TheoryConfig) -> Vec<CheckResult> {
    vec![
        kg_nonnegativity(config, reference_kg),
        kg_oracle_equivalence(config),
        uninstructive_nullity(config),
        posterior_consistency(config),
        confounding_stall(config),
    ]
}

pub fn write_report<W: Write>(results: &[CheckResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["check", "passed", "trials", "failures", "worst", "detail"])?;
    for r in results {
        out.write_record([
            r.name.to_string(),
            r.passed.to_string(),
            r.trials.to_string(),
            r.failures.to_string(),
            format!("{:e}", r.worst),
            r.detail.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::theory::incomplete_learning_check;

    fn small() -> TheoryConfig {
        TheoryConfig { nonnegativity_draws: 300, oracle_instances: 100, nullity_pairs: 20, ..TheoryConfig::default() }
    }

    #[test]
    fn stall_pair_is_in_the_set() {
        let c = incomplete_learning_check(&confounding_pair(), 0.0, 4.0).unwrap();
        assert!(c.member);
        assert_eq!(c.p_hat, Some(2.0));
        assert!((c.m1 + 0.9).abs() < 1e-12 && (c.m2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sign_flip_is_caught() {
        fn flipped(t: &CurveTable, q: &[f64], i: usize) -> f64 {
            -t.kg_value(q, i)
        }
        assert!(kg_nonnegativity(&small(), reference_kg).passed);
        assert!(!kg_nonnegativity(&small(), flipped).passed);
    }

    #[test]
    fn single_candidate_suite_passes() {
        let c = TheoryConfig { k_range: (1, 1), ..small() };
        let r = kg_nonnegativity(&c, reference_kg);
        assert!(r.passed && r.worst.abs() < 1e-12, "{}", r.worst);
    }

    #[test]
    fn small_suites_pass() {
        let c = small();
        assert!(kg_oracle_equivalence(&c).passed);
        assert!(uninstructive_nullity(&c).passed);
        let r = confounding_stall(&c);
        assert!(r.passed, "{}", r.detail);
    }

    #[test]
    fn report_has_one_row_per_check() {
        let r = vec![confounding_stall(&small())];
        let mut buf = Vec::new();
        write_report(&r, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.starts_with("check,passed,trials,failures,worst,detail"));
    }
}
