//! Base model: driver resource vector, committed-load ledger, decision
//! validation and the transition `S_t → S_{t+1}`.
//!
//! A move is completed within the step in which it is dispatched; its cost
//! is the driving time charged against the driver's hours budget. Holding
//! restores hours toward the cap.

pub mod io;

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::booking::{Network, OfferedLoad};
use crate::choice_model::{Equipment, LoadAttributes, RegionId};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DriverType {
    Solo,
    Team,
}

impl DriverType {
    pub fn name(self) -> &'static str {
        match self {
            DriverType::Solo => "solo",
            DriverType::Team => "team",
        }
    }
}

impl FromStr for DriverType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "solo" => Ok(DriverType::Solo),
            "team" => Ok(DriverType::Team),
            other => Err(Error::invalid(format!("unknown driver type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetParams {
    pub speed_mph: f64,
    pub solo_hours_cap: f64,
    pub team_hours_cap: f64,
    pub solo_rest_per_step: f64,
    pub team_rest_per_step: f64,
    pub max_deadhead_miles: f64,
    /// Penalty for an expired load as a multiple of its revenue.
    pub expiry_penalty_factor: f64,
    pub miles_bucket: f64,
}

impl Default for FleetParams {
    fn default() -> Self {
        FleetParams {
            speed_mph: 50.0,
            solo_hours_cap: 14.0,
            team_hours_cap: 28.0,
            solo_rest_per_step: 3.5,
            team_rest_per_step: 7.0,
            max_deadhead_miles: 300.0,
            expiry_penalty_factor: 1.2,
            miles_bucket: 50.0,
        }
    }
}

impl FleetParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.speed_mph, self.solo_hours_cap, self.team_hours_cap, self.miles_bucket];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("speed, hour caps and miles bucket must be positive".into()));
        }
        if [self.solo_rest_per_step, self.team_rest_per_step, self.max_deadhead_miles, self.expiry_penalty_factor]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::Config("rest rates, deadhead radius and penalty factor must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn hours_cap(&self, t: DriverType) -> f64 {
        match t {
            DriverType::Solo => self.solo_hours_cap,
            DriverType::Team => self.team_hours_cap,
        }
    }

    pub fn rest_per_step(&self, t: DriverType) -> f64 {
        match t {
            DriverType::Solo => self.solo_rest_per_step,
            DriverType::Team => self.team_rest_per_step,
        }
    }
}

/// Driver attribute vector `a`. Hours are finite and compared bitwise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriverAttributes {
    pub location: RegionId,
    pub domicile: RegionId,
    pub driver_type: DriverType,
    pub equipment: Equipment,
    pub hours_remaining: f64,
    pub steps_since_home: u32,
}

impl DriverAttributes {
    fn key(&self) -> (RegionId, RegionId, DriverType, Equipment, u64, u32) {
        // +0.0 for -0.0 so equal values share a key
        let h = self.hours_remaining + 0.0;
        (self.location, self.domicile, self.driver_type, self.equipment, h.to_bits(), self.steps_since_home)
    }
}

impl PartialEq for DriverAttributes {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for DriverAttributes {}

impl Hash for DriverAttributes {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for DriverAttributes {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DriverAttributes {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Ledger key `b` for a load: lane, equipment and a miles bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LoadKey {
    pub origin: RegionId,
    pub destination: RegionId,
    pub equipment: Equipment,
    pub miles_bucket: u32,
}

impl LoadKey {
    pub fn of(b: &LoadAttributes, bucket_miles: f64) -> Self {
        LoadKey {
            origin: b.origin,
            destination: b.destination,
            equipment: b.equipment,
            miles_bucket: (b.miles / bucket_miles).floor() as u32,
        }
    }
}

impl fmt::Display for LoadKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}-{}", self.origin, self.destination, self.equipment, self.miles_bucket)
    }
}

/// A committed load with its contract revenue in dollars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedLoad {
    pub attributes: LoadAttributes,
    pub revenue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    Hold,
    /// Move the load at this index of [`FleetState::due_loads`].
    Move(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DispatchDecision {
    pub assignments: BTreeMap<(DriverAttributes, Decision), u32>,
}

impl DispatchDecision {
    pub fn add(&mut self, a: DriverAttributes, d: Decision, n: u32) {
        if n > 0 {
            *self.assignments.entry((a, d)).or_default() += n;
        }
    }

    pub fn all_hold(drivers: &ResourceVector) -> Self {
        let mut x = DispatchDecision::default();
        for (a, &n) in &drivers.counts {
            x.add(*a, Decision::Hold, n);
        }
        x
    }

    pub fn moves(&self) -> impl Iterator<Item = (&DriverAttributes, usize, u32)> {
        self.assignments.iter().filter_map(|((a, d), &n)| match d {
            Decision::Move(j) => Some((a, *j, n)),
            Decision::Hold => None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceVector {
    pub counts: BTreeMap<DriverAttributes, u32>,
}

impl ResourceVector {
    pub fn add(&mut self, a: DriverAttributes, n: u32) {
        if n > 0 {
            *self.counts.entry(a).or_default() += n;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&n| n as u64).sum()
    }

    /// Every driver unit, in attribute order.
    pub fn units(&self) -> Vec<DriverAttributes> {
        self.counts.iter().flat_map(|(a, &n)| std::iter::repeat_n(*a, n as usize)).collect()
    }
}

/// Offered and accepted loads `L_{tt'b}` plus the committed loads themselves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadLedger {
    pub offered: BTreeMap<(u32, LoadKey), u32>,
    pub accepted: BTreeMap<(u32, LoadKey), u32>,
    /// Committed loads not yet served or expired, by pickup step.
    pub pending: BTreeMap<u32, Vec<AcceptedLoad>>,
}

impl LoadLedger {
    pub fn pending_count(&self) -> u64 {
        self.pending.values().map(|v| v.len() as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetState {
    pub t: u32,
    pub drivers: ResourceVector,
    pub loads: LoadLedger,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub t: u32,
    pub offered: u32,
    pub accepted: u32,
    pub served: u32,
    pub expired: u32,
    pub penalty: f64,
    pub revenue: f64,
    pub empty_miles: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Row sum differs from `R_{ta}`.
    RowTotal { attribute: DriverAttributes, assigned: u32, available: u32 },
    /// More drivers on a load type than committed loads of that type.
    LoadCapacity { key: LoadKey, assigned: u32, available: u32 },
    UnknownLoad(usize),
    Infeasible { attribute: DriverAttributes, load: usize, reason: Infeasible },
    AcceptedExceedsOffered { key: LoadKey, accepted: u32, offered: u32 },
}

/// Transition `a' = a^M(a, d)` for a hold.
pub fn hold_transition(a: &DriverAttributes, params: &FleetParams) -> DriverAttributes {
    let cap = params.hours_cap(a.driver_type);
    DriverAttributes {
        hours_remaining: (a.hours_remaining + params.rest_per_step(a.driver_type)).min(cap),
        steps_since_home: if a.location == a.domicile { 0 } else { a.steps_since_home + 1 },
        ..*a
    }
}

/// Why a driver cannot take a load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infeasible {
    Equipment { driver: Equipment, load: Equipment },
    Radius { deadhead: f64 },
    Hours { needed: f64, available: f64 },
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasible::Equipment { driver, load } => write!(f, "equipment {driver} cannot haul {load}"),
            Infeasible::Radius { deadhead } => write!(f, "deadhead {deadhead:.0} mi exceeds radius"),
            Infeasible::Hours { needed, available } => write!(f, "needs {needed:.2} h, has {available:.2} h"),
        }
    }
}

/// Deadhead miles and driving hours a move would take, or why it cannot.
pub fn move_requirements(a: &DriverAttributes, b: &LoadAttributes, network: &Network, params: &FleetParams) -> Result<(f64, f64), Infeasible> {
    if a.equipment != b.equipment {
        return Err(Infeasible::Equipment { driver: a.equipment, load: b.equipment });
    }
    let deadhead = network.miles(a.location, b.origin);
    if !(deadhead <= params.max_deadhead_miles) {
        return Err(Infeasible::Radius { deadhead });
    }
    let hours = (deadhead + b.miles) / params.speed_mph;
    if hours > a.hours_remaining + 1e-9 {
        return Err(Infeasible::Hours { needed: hours, available: a.hours_remaining });
    }
    Ok((deadhead, hours))
}

/// Transition for a move: relocate to the destination and charge the hours.
pub fn driver_transition(a: &DriverAttributes, b: &LoadAttributes, network: &Network, params: &FleetParams) -> Result<DriverAttributes> {
    let (_, hours) = move_requirements(a, b, network, params).map_err(|e| Error::Precondition(e.to_string()))?;
    Ok(DriverAttributes {
        location: b.destination,
        hours_remaining: (a.hours_remaining - hours).max(0.0),
        steps_since_home: if b.destination == a.domicile { 0 } else { a.steps_since_home + 1 },
        ..*a
    })
}

impl FleetState {
    pub fn new(drivers: ResourceVector) -> Self {
        FleetState { t: 0, drivers, loads: LoadLedger::default() }
    }

    /// Committed loads with pickup at the current step.
    pub fn due_loads(&self) -> &[AcceptedLoad] {
        self.loads.pending.get(&self.t).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Constraints: act on every driver, at most one driver per committed
    /// load (hence per-key capacity), nonnegativity by type, feasible moves.
    pub fn validate_decision(&self, x: &DispatchDecision, network: &Network, params: &FleetParams) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut rows: BTreeMap<DriverAttributes, u32> = BTreeMap::new();
        for ((a, _), &n) in &x.assignments {
            *rows.entry(*a).or_default() += n;
        }
        for (a, &avail) in &self.drivers.counts {
            let got = rows.get(a).copied().unwrap_or(0);
            if got != avail {
                v.push(Violation::RowTotal { attribute: *a, assigned: got, available: avail });
            }
        }
        for (a, &got) in &rows {
            if !self.drivers.counts.contains_key(a) {
                v.push(Violation::RowTotal { attribute: *a, assigned: got, available: 0 });
            }
        }
        let due = self.due_loads();
        let mut per_key: BTreeMap<LoadKey, (u32, u32)> = BTreeMap::new();
        for l in due {
            per_key.entry(LoadKey::of(&l.attributes, params.miles_bucket)).or_default().1 += 1;
        }
        let mut per_load: BTreeMap<usize, u32> = BTreeMap::new();
        for (a, j, n) in x.moves() {
            let Some(load) = due.get(j) else {
                v.push(Violation::UnknownLoad(j));
                continue;
            };
            *per_load.entry(j).or_default() += n;
            per_key.entry(LoadKey::of(&load.attributes, params.miles_bucket)).or_default().0 += n;
            if let Err(reason) = move_requirements(a, &load.attributes, network, params) {
                v.push(Violation::Infeasible { attribute: *a, load: j, reason });
            }
        }
        for (key, (assigned, available)) in per_key {
            if assigned > available {
                v.push(Violation::LoadCapacity { key, assigned, available });
            }
        }
        for (j, n) in per_load {
            if n > 1 {
                let key = LoadKey::of(&due[j].attributes, params.miles_bucket);
                v.push(Violation::LoadCapacity { key, assigned: n, available: 1 });
            }
        }
        v
    }

    /// `R^x_{a'} = Σ_{a,d} δ_{a'}(a,d) x_{ad}`.
    pub fn post_decision_resources(&self, x: &DispatchDecision, network: &Network, params: &FleetParams) -> Result<ResourceVector> {
        let due = self.due_loads();
        let mut r = ResourceVector::default();
        for ((a, d), &n) in &x.assignments {
            let next = match d {
                Decision::Hold => hold_transition(a, params),
                Decision::Move(j) => {
                    let load = due.get(*j).ok_or_else(|| Error::invalid(format!("no due load {j}")))?;
                    driver_transition(a, &load.attributes, network, params)?
                }
            };
            r.add(next, n);
        }
        Ok(r)
    }

    /// Applies dispatch, expires unserved due loads, commits accepted offers
    /// and advances the clock.
    pub fn advance_time(
        &mut self,
        x: &DispatchDecision,
        accepted: Vec<AcceptedLoad>,
        offered: &[OfferedLoad],
        network: &Network,
        params: &FleetParams,
    ) -> Result<StepReport> {
        let violations = self.validate_decision(x, network, params);
        if !violations.is_empty() {
            return Err(Error::Precondition(format!("infeasible dispatch: {violations:?}")));
        }
        let mut report = StepReport { t: self.t, offered: offered.len() as u32, ..StepReport::default() };
        let next = self.post_decision_resources(x, network, params)?;
        let due = self.loads.pending.remove(&self.t).unwrap_or_default();
        let mut served = vec![false; due.len()];
        for (a, j, _) in x.moves() {
            served[j] = true;
            report.served += 1;
            report.revenue += due[j].revenue;
            report.empty_miles += network.miles(a.location, due[j].attributes.origin);
        }
        for (l, s) in due.iter().zip(&served) {
            if !s {
                report.expired += 1;
                report.penalty += params.expiry_penalty_factor * l.revenue;
            }
        }
        let mut offered_keys: BTreeMap<(u32, LoadKey), u32> = BTreeMap::new();
        for o in offered {
            *offered_keys.entry((o.pickup_at, LoadKey::of(&o.attributes, params.miles_bucket))).or_default() += 1;
        }
        for l in &accepted {
            if l.attributes.pickup <= self.t {
                return Err(Error::Precondition(format!("accepted load with pickup {} not after t = {}", l.attributes.pickup, self.t)));
            }
        }
        let mut accepted_keys: BTreeMap<(u32, LoadKey), u32> = BTreeMap::new();
        for l in &accepted {
            *accepted_keys.entry((l.attributes.pickup, LoadKey::of(&l.attributes, params.miles_bucket))).or_default() += 1;
        }
        for (k, &n) in &accepted_keys {
            let o = offered_keys.get(k).copied().unwrap_or(0);
            if n > o {
                return Err(Error::Precondition(format!("accepted {n} loads of {} but only {o} offered", k.1)));
            }
        }
        for (k, n) in offered_keys {
            *self.loads.offered.entry(k).or_default() += n;
        }
        for (k, n) in accepted_keys {
            *self.loads.accepted.entry(k).or_default() += n;
        }
        report.accepted = accepted.len() as u32;
        for l in accepted {
            self.loads.pending.entry(l.attributes.pickup).or_default().push(l);
        }
        self.drivers = next;
        self.t += 1;
        Ok(report)
    }
}

/// Parameters for a random initial fleet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverScenario {
    pub drivers: u32,
    pub team_share: f64,
    pub equipment_weights: [f64; 5],
}

impl Default for DriverScenario {
    fn default() -> Self {
        DriverScenario { drivers: 50, team_share: 0.2, equipment_weights: [0.45, 0.2, 0.2, 0.05, 0.1] }
    }
}

impl DriverScenario {
    /// Drivers start rested at a uniformly drawn domicile.
    pub fn generate(&self, network: &Network, params: &FleetParams, rng: &mut SimRng) -> ResourceVector {
        let ids: Vec<RegionId> = network.ids().collect();
        let total: f64 = self.equipment_weights.iter().sum();
        let mut r = ResourceVector::default();
        for _ in 0..self.drivers {
            let home = ids[rng.random_range(0..ids.len())];
            let driver_type = if rng.random::<f64>() < self.team_share { DriverType::Team } else { DriverType::Solo };
            let mut u = rng.random::<f64>() * total;
            let mut equipment = Equipment::DryVan;
            for (e, w) in Equipment::ALL.iter().zip(&self.equipment_weights) {
                if u < *w {
                    equipment = *e;
                    break;
                }
                u -= w;
            }
            r.add(
                DriverAttributes {
                    location: home,
                    domicile: home,
                    driver_type,
                    equipment,
                    hours_remaining: params.hours_cap(driver_type),
                    steps_since_home: 0,
                },
                1,
            );
        }
        r
    }
}
