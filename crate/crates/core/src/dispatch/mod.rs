//! Value-function-augmented driver dispatch.
//!
//! Each step solves `max Σ c_{tad} x_{ad} + Σ v̄_{t+1,a'} R^x_{a'}` over the
//! current drivers and the loads due now. Driver units and loads become the
//! two sides of an assignment problem; holding is the fallback for every
//! unit. The marginal value of one more driver of each attribute is read
//! off the solved problem and smooths `v̄`.

mod io;
mod matching;

pub use io::{read_vfa_csv, write_vfa_csv};
pub use matching::{max_weight_matching, Matching};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::booking::Network;
use crate::choice_model::{Equipment, RegionId};
use crate::error::{Error, Result};
use crate::fleet::{
    driver_transition, hold_transition, move_requirements, AcceptedLoad, Decision, DispatchDecision, DriverAttributes, FleetParams, FleetState,
};

/// Cost side of `c_{tad}`. Revenue comes with the load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Contribution {
    /// $ per deadhead mile.
    pub empty_cost: f64,
    /// $ per step between pickup and the dispatch step.
    pub service_penalty: f64,
}

impl Default for Contribution {
    fn default() -> Self {
        Contribution { empty_cost: 1.5, service_penalty: 0.0 }
    }
}

impl Contribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.empty_cost >= 0.0 && self.empty_cost.is_finite()) || !(self.service_penalty >= 0.0 && self.service_penalty.is_finite()) {
            return Err(Error::Config("contribution costs must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// `c_{tad}`: zero for a hold, otherwise revenue less deadhead and timing costs.
pub fn contribution(a: &DriverAttributes, load: Option<&AcceptedLoad>, t: u32, network: &Network, params: &Contribution) -> f64 {
    match load {
        None => 0.0,
        Some(l) => {
            let deadhead = network.miles(a.location, l.attributes.origin);
            let late = (t as f64 - l.attributes.pickup as f64).abs();
            l.revenue - deadhead * params.empty_cost - late * params.service_penalty
        }
    }
}

/// Aggregation cell for `v̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VfaKey {
    pub bucket: u32,
    pub location: RegionId,
    pub equipment: Equipment,
}

/// Piecewise-constant `v̄_{ta}` over (time-of-day, location, equipment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunctionApprox {
    buckets: u32,
    theta_step: f64,
    iteration: u64,
    v_bar: BTreeMap<VfaKey, f64>,
}

impl ValueFunctionApprox {
    pub fn new(buckets: u32, theta_step: f64) -> Result<Self> {
        if buckets == 0 || !(theta_step > 0.0 && theta_step.is_finite()) {
            return Err(Error::invalid(format!("need buckets >= 1 and theta_step > 0, got {buckets}, {theta_step}")));
        }
        Ok(ValueFunctionApprox { buckets, theta_step, iteration: 0, v_bar: BTreeMap::new() })
    }

    pub fn buckets(&self) -> u32 {
        self.buckets
    }

    pub fn theta_step(&self) -> f64 {
        self.theta_step
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn entries(&self) -> &BTreeMap<VfaKey, f64> {
        &self.v_bar
    }

    pub fn key(&self, t: u32, a: &DriverAttributes) -> VfaKey {
        VfaKey { bucket: t % self.buckets, location: a.location, equipment: a.equipment }
    }

    /// `v̄_{ta}`, 0 before any update.
    pub fn value(&self, t: u32, a: &DriverAttributes) -> f64 {
        self.v_bar.get(&self.key(t, a)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, key: VfaKey, value: f64) -> Result<()> {
        if !value.is_finite() || key.bucket >= self.buckets {
            return Err(Error::invalid(format!("bad v̄ entry {key:?} = {value}")));
        }
        self.v_bar.insert(key, value);
        Ok(())
    }

    pub fn stepsize(&self) -> f64 {
        self.theta_step / (self.theta_step + self.iteration as f64)
    }

    /// Smooths every cell touched by `duals` toward the mean dual of the
    /// attributes it aggregates, then advances the iteration counter.
    pub fn update(&mut self, duals: &BTreeMap<DriverAttributes, f64>, t: u32) {
        let gamma = self.stepsize();
        let mut cells: BTreeMap<VfaKey, (f64, u32)> = BTreeMap::new();
        for (a, &d) in duals {
            let c = cells.entry(self.key(t, a)).or_default();
            c.0 += d;
            c.1 += 1;
        }
        for (k, (sum, n)) in cells {
            let v = self.v_bar.entry(k).or_insert(0.0);
            *v = (1.0 - gamma) * *v + gamma * sum / n as f64;
        }
        self.iteration += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub decision: DispatchDecision,
    /// Marginal value of one more driver of each present attribute.
    pub duals: BTreeMap<DriverAttributes, f64>,
    /// `Σ c x + Σ v̄ R^x` at the optimum.
    pub objective: f64,
}

/// Solves the step's assignment problem. Ties go to the lowest driver and
/// load indices.
pub fn solve_dispatch(
    state: &FleetState,
    vfa: &ValueFunctionApprox,
    network: &Network,
    fleet: &FleetParams,
    costs: &Contribution,
) -> DispatchSolution {
    let t = state.t;
    let due = state.due_loads();
    let attrs: Vec<(DriverAttributes, u32)> = state.drivers.counts.iter().filter(|(_, &n)| n > 0).map(|(a, &n)| (*a, n)).collect();
    let mut hold_value = Vec::with_capacity(attrs.len());
    let mut gains: Vec<Vec<(usize, f64)>> = Vec::with_capacity(attrs.len());
    for (a, _) in &attrs {
        let h = vfa.value(t + 1, &hold_transition(a, fleet));
        let mut row = Vec::new();
        for (j, l) in due.iter().enumerate() {
            if move_requirements(a, &l.attributes, network, fleet).is_err() {
                continue;
            }
            let next = driver_transition(a, &l.attributes, network, fleet).expect("feasible move");
            let w = contribution(a, Some(l), t, network, costs) + vfa.value(t + 1, &next);
            row.push((j, w - h));
        }
        hold_value.push(h);
        gains.push(row);
    }

    let mut owner = Vec::new();
    let mut first_unit = Vec::with_capacity(attrs.len());
    let mut edges = Vec::new();
    for (k, (_, n)) in attrs.iter().enumerate() {
        first_unit.push(owner.len());
        for _ in 0..*n {
            let i = owner.len();
            owner.push(k);
            edges.extend(gains[k].iter().map(|&(j, g)| (i, j, g)));
        }
    }
    let m = max_weight_matching(owner.len(), due.len(), &edges);

    let mut decision = DispatchDecision::default();
    let mut objective = m.value;
    for (i, &k) in owner.iter().enumerate() {
        let d = match m.mate[i] {
            Some(j) => Decision::Move(j),
            None => Decision::Hold,
        };
        decision.add(attrs[k].0, d, 1);
        objective += hold_value[k];
    }
    let duals = attrs
        .iter()
        .enumerate()
        .map(|(k, (a, _))| (*a, hold_value[k] + m.marginal_gain[first_unit[k]]))
        .collect();
    DispatchSolution { decision, duals, objective }
}

/// Objective of an arbitrary decision, for audits and oracles.
pub fn decision_value(
    state: &FleetState,
    x: &DispatchDecision,
    vfa: &ValueFunctionApprox,
    network: &Network,
    fleet: &FleetParams,
    costs: &Contribution,
) -> Result<f64> {
    let due = state.due_loads();
    let mut total = 0.0;
    for ((a, d), &n) in &x.assignments {
        let (c, next) = match d {
            Decision::Hold => (0.0, hold_transition(a, fleet)),
            Decision::Move(j) => {
                let l = due.get(*j).ok_or_else(|| Error::invalid(format!("no due load {j}")))?;
                (contribution(a, Some(l), state.t, network, costs), driver_transition(a, &l.attributes, network, fleet)?)
            }
        };
        total += n as f64 * (c + vfa.value(state.t + 1, &next));
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
