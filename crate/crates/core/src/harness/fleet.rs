//! Fleet mode: bids on each six-hour batch of offers, answered by the
//! carrier's lookahead acceptance policy and a simulated shipper.

use serde::{Deserialize, Serialize};

use super::bandit::{keyed_response, network_registry};
use super::bidder::{Bidder, LearningParams};
use super::truth::{candidate_set, CandidatePrior, ResponsePrior};
use super::GridSpec;
use crate::acceptance::{accept_loads, path_seeds, run_lookahead, LookaheadConfig, LookaheadModel};
use crate::belief::{BaggingConfig, ObservationRecord};
use crate::booking::{BookingConfig, OfferedLoad, SyntheticNetwork};
use crate::choice_model::{sigmoid, CandidateModel, Response};
use crate::dispatch::{solve_dispatch, Contribution, ValueFunctionApprox};
use crate::error::{Error, Result};
use crate::fleet::{AcceptedLoad, DriverScenario, FleetParams, FleetState, ResourceVector, StepReport};
use crate::par::par_map;
use crate::policies::{HorizonWeight, PolicyName};
use crate::rng::{self, label};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmupConfig {
    /// Passes over the horizon before the experiment starts.
    pub iterations: u32,
    /// Time-of-day buckets in `v̄`; 0 means one per step of a day.
    pub buckets: u32,
    pub theta_step: f64,
}

impl Default for WarmupConfig {
    fn default() -> Self {
        WarmupConfig { iterations: 5, buckets: 0, theta_step: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetRunConfig {
    pub seed: u64,
    /// Six-hour batches; 56 is two weeks.
    pub batches: u32,
    pub reps: usize,
    pub k: usize,
    pub resample_base: u64,
    pub grid: GridSpec,
    pub policies: Vec<PolicyName>,
    pub kg_tau: HorizonWeight,
    pub bagging: BaggingConfig,
    /// Prior for the shipper truth `β*` (the carrier half is unused).
    pub truth_prior: ResponsePrior,
    pub candidate_prior: CandidatePrior,
    pub network: SyntheticNetwork,
    pub drivers: DriverScenario,
    pub fleet: FleetParams,
    pub costs: Contribution,
    pub lookahead: LookaheadConfig,
    pub warmup: WarmupConfig,
    #[serde(skip)]
    pub shipper_truth: Option<CandidateModel>,
    /// Replayed offers; sampled from the booking process when absent.
    #[serde(skip)]
    pub trace: Option<Vec<OfferedLoad>>,
    /// Replayed starting fleet, shared by every rep; generated per rep when absent.
    #[serde(skip)]
    pub start_drivers: Option<ResourceVector>,
}

impl Default for FleetRunConfig {
    fn default() -> Self {
        FleetRunConfig {
            seed: 1,
            batches: 56,
            reps: 10,
            k: 5,
            resample_base: 100,
            grid: GridSpec::default(),
            policies: vec![PolicyName::Kg, PolicyName::Ts, PolicyName::OptTs, PolicyName::Exploit, PolicyName::EstOpt],
            kg_tau: HorizonWeight::Constant(30.0),
            bagging: BaggingConfig::default(),
            truth_prior: ResponsePrior::truth(),
            candidate_prior: CandidatePrior::Structured(ResponsePrior::diffuse()),
            network: SyntheticNetwork::default(),
            drivers: DriverScenario::default(),
            fleet: FleetParams::default(),
            costs: Contribution::default(),
            lookahead: LookaheadConfig::default(),
            warmup: WarmupConfig::default(),
            shipper_truth: None,
            trace: None,
            start_drivers: None,
        }
    }
}

impl FleetRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batches == 0 || self.reps == 0 || self.k == 0 {
            return Err(Error::Config("batches, reps and k must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies selected".into()));
        }
        if self.policies.contains(&PolicyName::MeanPrice) {
            return Err(Error::Config("mean-price has no history in fleet mode".into()));
        }
        if !(self.warmup.theta_step > 0.0) {
            return Err(Error::Config("warmup.theta_step must be positive".into()));
        }
        self.grid.build()?;
        self.truth_prior.validate()?;
        self.candidate_prior.validate()?;
        self.fleet.validate()?;
        self.costs.validate()?;
        self.lookahead.validate()
    }
}

/// One offered load in fleet mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetStep {
    pub batch: u32,
    /// Position in the run's offer sequence.
    pub index: usize,
    pub context: String,
    pub bid: f64,
    pub y_c: Response,
    pub y_s: Response,
    pub cum_revenue: f64,
    pub cum_accepts: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetRep {
    pub rep: usize,
    pub steps: Vec<FleetStep>,
    pub reports: Vec<StepReport>,
    /// Driver count after each batch.
    pub drivers: Vec<u64>,
    pub initial_drivers: u64,
    pub pending_at_end: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetPolicyResult {
    pub policy: PolicyName,
    pub reps: Vec<FleetRep>,
}

#[derive(Debug, Clone)]
pub struct FleetResult {
    pub shipper_truth: CandidateModel,
    pub policies: Vec<FleetPolicyResult>,
}

fn offers_at(config: &FleetRunConfig, booking: &BookingConfig, rep: u64, t: u32) -> Vec<OfferedLoad> {
    match &config.trace {
        Some(trace) => trace.iter().filter(|o| o.offered_at == t).cloned().collect(),
        None => booking.sample_offers(t, &mut rng::stream(config.seed, &[label::BOOKING, rep, t as u64])),
    }
}

/// Trains `v̄` on accept-all passes at the market rate, starting each pass
/// from `drivers`.
pub fn warm_up_value_function(
    drivers: &ResourceVector,
    booking: &BookingConfig,
    fleet: &FleetParams,
    costs: &Contribution,
    warmup: &WarmupConfig,
    market_rate: f64,
    batches: u32,
    seed: u64,
) -> Result<ValueFunctionApprox> {
    let buckets = if warmup.buckets == 0 { booking.steps_per_day() } else { warmup.buckets };
    let mut vfa = ValueFunctionApprox::new(buckets, warmup.theta_step)?;
    for it in 0..warmup.iterations {
        let mut s = FleetState::new(drivers.clone());
        for t in 0..batches {
            let offers = booking.sample_offers(t, &mut rng::stream(seed, &[label::WARMUP, it as u64, t as u64]));
            let accepted = offers
                .iter()
                .map(|o| AcceptedLoad { attributes: o.attributes.clone(), revenue: market_rate * o.attributes.miles })
                .collect();
            let sol = solve_dispatch(&s, &vfa, &booking.network, fleet, costs);
            vfa.update(&sol.duals, t);
            s.advance_time(&sol.decision, accepted, &offers, &booking.network, fleet)?;
        }
    }
    Ok(vfa)
}

pub fn run_fleet_experiment(config: &FleetRunConfig) -> Result<FleetResult> {
    config.validate()?;
    let grid = config.grid.build()?;
    let booking = config.network.build(&mut rng::stream(config.seed, &[label::CONTEXT]))?;
    let registry = network_registry(&booking)?;
    let shipper_truth = match &config.shipper_truth {
        Some(t) => {
            t.check_against(&registry)?;
            t.clone()
        }
        None => config.truth_prior.draw(&registry, &mut rng::stream(config.seed, &[label::TRUTH])),
    };
    if let Some(trace) = &config.trace {
        for o in trace {
            o.attributes.validate(booking.max_lag_steps())?;
        }
    }
    if let Some(d) = &config.start_drivers {
        if let Some(a) = d.counts.keys().find(|a| !booking.network.contains(a.location) || !booking.network.contains(a.domicile)) {
            return Err(Error::Config(format!("driver at {} (home {}) is outside the network", a.location, a.domicile)));
        }
    }
    let params = LearningParams { k: config.k, resample_base: config.resample_base, tau: config.kg_tau, bagging: config.bagging };
    let network = &booking.network;

    let per_rep = par_map(config.reps, |rep| -> Result<Vec<FleetRep>> {
        let r = rep as u64;
        let drivers = match &config.start_drivers {
            Some(d) => d.clone(),
            None => config.drivers.generate(network, &config.fleet, &mut rng::stream(config.seed, &[label::DRIVERS, r])),
        };
        let vfa0 = warm_up_value_function(
            &drivers,
            &booking,
            &config.fleet,
            &config.costs,
            &config.warmup,
            config.lookahead.market_rate,
            config.batches,
            rng::derive(config.seed, &[r]),
        )?;
        let (candidates, _) = candidate_set(&config.candidate_prior, &registry, config.k, None, &mut rng::stream(config.seed, &[label::CANDIDATES, r]))?;
        let lookahead_seed = rng::derive(config.seed, &[label::LOOKAHEAD, r]);

        config
            .policies
            .iter()
            .map(|&policy| {
                let mut bidder = Bidder::new(policy, params, candidates.clone(), 0.0, config.seed, r)?;
                let mut state = FleetState::new(drivers.clone());
                let mut vfa = vfa0.clone();
                let mut out = FleetRep {
                    rep,
                    steps: Vec::new(),
                    reports: Vec::new(),
                    drivers: Vec::new(),
                    initial_drivers: drivers.total(),
                    pending_at_end: 0,
                };
                let (mut revenue, mut accepts) = (0.0, 0u64);
                for t in 0..config.batches {
                    let offers = offers_at(config, &booking, r, t);
                    let first = out.steps.len();
                    let bids = offers
                        .iter()
                        .enumerate()
                        .map(|(i, o)| bidder.bid(&registry, &o.attributes, &grid, (first + i) as u64))
                        .collect::<Result<Vec<f64>>>()?;
                    let priced: Vec<AcceptedLoad> = offers
                        .iter()
                        .zip(&bids)
                        .map(|(o, &p)| AcceptedLoad { attributes: o.attributes.clone(), revenue: p * o.attributes.miles })
                        .collect();
                    let carrier = if priced.is_empty() {
                        Vec::new()
                    } else {
                        let model = LookaheadModel { booking: &booking, fleet: &config.fleet, costs: &config.costs, vfa: &vfa };
                        let seeds = path_seeds(lookahead_seed, t, config.lookahead.n_paths);
                        let cov = run_lookahead(&state, &priced, &config.lookahead, model, &seeds)?;
                        accept_loads(&priced, &cov, config.lookahead.theta_accept, config.fleet.miles_bucket)
                    };
                    let mut committed = Vec::new();
                    let mut observations = Vec::with_capacity(offers.len());
                    for (i, (l, &c_ok)) in priced.iter().zip(&carrier).enumerate() {
                        let n = (first + i) as u64;
                        let p = bids[i];
                        let ls = shipper_truth.lines(&registry, &l.attributes)?.1;
                        let y_s = keyed_response(sigmoid(ls.at(p)), config.seed, label::RESPONSE_SHIPPER, r, n, p);
                        let y_c = Response::from_bool(c_ok);
                        if c_ok && y_s.is_accept() {
                            committed.push(l.clone());
                            revenue += p;
                            accepts += 1;
                        }
                        out.steps.push(FleetStep {
                            batch: t,
                            index: first + i,
                            context: l.attributes.key(),
                            bid: p,
                            y_c,
                            y_s,
                            cum_revenue: revenue,
                            cum_accepts: accepts,
                        });
                        observations.push(ObservationRecord { n, b: l.attributes.clone(), p, y_c, y_s });
                    }
                    let sol = solve_dispatch(&state, &vfa, network, &config.fleet, &config.costs);
                    vfa.update(&sol.duals, t);
                    out.reports.push(state.advance_time(&sol.decision, committed, &offers, network, &config.fleet)?);
                    out.drivers.push(state.drivers.total());
                    for obs in observations {
                        bidder.observe(&registry, obs)?;
                    }
                }
                out.pending_at_end = state.loads.pending_count();
                Ok(out)
            })
            .collect()
    });

    let mut policies: Vec<FleetPolicyResult> = config.policies.iter().map(|&policy| FleetPolicyResult { policy, reps: Vec::new() }).collect();
    for rep in per_rep {
        for (i, r) in rep?.into_iter().enumerate() {
            policies[i].reps.push(r);
        }
    }
    Ok(FleetResult { shipper_truth, policies })
}
