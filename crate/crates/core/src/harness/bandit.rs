//! Bandit mode: bids scored against a simulated truth by expected regret.

use serde::{Deserialize, Serialize};

use super::bidder::{Bidder, LearningParams, Snapshot};
use super::truth::{candidate_set, CandidatePrior, oracle_price, true_revenue, ResponsePrior};
use super::{GridSpec, MeanPriceConfig};
use crate::belief::{BaggingConfig, ObservationRecord};
use crate::booking::{BookingConfig, SyntheticNetwork};
use crate::choice_model::{sigmoid, CandidateModel, FeatureRegistry, LoadAttributes, Response};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::policies::{HorizonWeight, PolicyName, PriceGrid};
use crate::rng::{self, keyed_uniform, label};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditRunConfig {
    pub seed: u64,
    /// `N`, decisions per repetition.
    pub steps: usize,
    pub k: usize,
    /// `C`; 0 disables resampling.
    pub resample_base: u64,
    pub grid: GridSpec,
    pub reps: usize,
    pub policies: Vec<PolicyName>,
    pub kg_tau: HorizonWeight,
    pub bagging: BaggingConfig,
    pub truth_prior: ResponsePrior,
    pub candidate_prior: CandidatePrior,
    /// Put `θ*` into the initial candidate set.
    pub truth_in_set: bool,
    pub network: SyntheticNetwork,
    /// Cycle through this many fixed contexts instead of a fresh stream.
    pub distinct_contexts: Option<usize>,
    pub heldout_contexts: usize,
    pub mean_price: MeanPriceConfig,
    /// Fixed truth; drawn from `truth_prior` when absent.
    #[serde(skip)]
    pub truth: Option<CandidateModel>,
}

impl Default for BanditRunConfig {
    fn default() -> Self {
        BanditRunConfig {
            seed: 1,
            steps: 3000,
            k: 5,
            resample_base: 300,
            grid: GridSpec::default(),
            reps: 20,
            policies: vec![PolicyName::Kg, PolicyName::Exploit, PolicyName::EstOpt, PolicyName::MeanPrice],
            kg_tau: HorizonWeight::Constant(30.0),
            bagging: BaggingConfig::default(),
            truth_prior: ResponsePrior::truth(),
            candidate_prior: CandidatePrior::Structured(ResponsePrior::diffuse()),
            truth_in_set: false,
            network: SyntheticNetwork::default(),
            distinct_contexts: None,
            heldout_contexts: 10,
            mean_price: MeanPriceConfig::default(),
            truth: None,
        }
    }
}

impl BanditRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.reps == 0 || self.k == 0 {
            return Err(Error::Config("steps, reps and k must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies selected".into()));
        }
        if self.distinct_contexts == Some(0) {
            return Err(Error::Config("distinct_contexts must be at least 1".into()));
        }
        self.grid.build()?;
        self.truth_prior.validate()?;
        self.candidate_prior.validate()?;
        self.mean_price.validate()
    }
}

/// One decision in bandit mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditStep {
    pub step: usize,
    pub context: String,
    pub bid: f64,
    pub y_c: Response,
    pub y_s: Response,
    /// `max_p p f* − p^n f*(p^n)`, the oracle max including the chosen bid.
    pub regret: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditRep {
    pub rep: usize,
    pub steps: Vec<BanditStep>,
    pub snapshots: Vec<Snapshot>,
    /// Final belief's MAP candidate, if the policy keeps a belief.
    pub final_map: Option<CandidateModel>,
    /// Posterior weight of the truth's slot after each step, when the truth is in the set and never resampled away.
    pub truth_weight: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditPolicyResult {
    pub policy: PolicyName,
    pub reps: Vec<BanditRep>,
    /// Repetitions where Mean-Price fell back to its configured price.
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct BanditResult {
    pub truth: CandidateModel,
    pub registry: FeatureRegistry,
    pub grid: PriceGrid,
    pub heldout: Vec<LoadAttributes>,
    pub policies: Vec<BanditPolicyResult>,
}

/// Context stream drawn from the booking process of `config`.
pub fn context_stream(booking: &BookingConfig, n: usize, seed: u64, path: &[u64]) -> Vec<LoadAttributes> {
    let mut g = rng::stream(seed, path);
    let mut out = Vec::with_capacity(n);
    let mut t = 0;
    while out.len() < n {
        out.extend(booking.sample_offers(t, &mut g).into_iter().map(|o| o.attributes));
        t += 1;
    }
    out.truncate(n);
    out
}

/// Registry with an indicator for every region of the network.
pub fn network_registry(booking: &BookingConfig) -> Result<FeatureRegistry> {
    let ids: Vec<_> = booking.network.ids().collect();
    FeatureRegistry::new(ids.clone(), ids)
}

/// Bernoulli draw shared by every policy that bids `p` at this step.
pub fn keyed_response(prob: f64, seed: u64, side: u64, rep: u64, step: u64, p: f64) -> Response {
    Response::from_bool(keyed_uniform(seed, &[side, rep, step, p.to_bits()]) < prob)
}

pub fn run_bandit_experiment(config: &BanditRunConfig) -> Result<BanditResult> {
    config.validate()?;
    let grid = config.grid.build()?;
    let booking = config.network.build(&mut rng::stream(config.seed, &[label::CONTEXT]))?;
    let registry = network_registry(&booking)?;
    let truth = match &config.truth {
        Some(t) => {
            t.check_against(&registry)?;
            t.clone()
        }
        None => config.truth_prior.draw(&registry, &mut rng::stream(config.seed, &[label::TRUTH])),
    };
    let heldout = context_stream(&booking, config.heldout_contexts, config.seed, &[label::HELDOUT]);
    let params = LearningParams { k: config.k, resample_base: config.resample_base, tau: config.kg_tau, bagging: config.bagging };

    let per_rep = par_map(config.reps, |rep| -> Result<Vec<(BanditRep, bool)>> {
        let r = rep as u64;
        let contexts = match config.distinct_contexts {
            None => context_stream(&booking, config.steps, config.seed, &[label::CONTEXT, r]),
            Some(m) => {
                let pool = context_stream(&booking, m, config.seed, &[label::CONTEXT, r]);
                let mut g = rng::stream(config.seed, &[label::CONTEXT, r, 1]);
                (0..config.steps).map(|_| pool[g.random_range(0..m)].clone()).collect()
            }
        };
        let (candidates, truth_slot) = candidate_set(
            &config.candidate_prior,
            &registry,
            config.k,
            config.truth_in_set.then_some(&truth),
            &mut rng::stream(config.seed, &[label::CANDIDATES, r]),
        )?;
        let (mean_price, fell_back) = config.mean_price.price(&booking, &truth, &registry, config.seed, r)?;
        config
            .policies
            .iter()
            .map(|&policy| {
                let mut bidder = Bidder::new(policy, params, candidates.clone(), mean_price, config.seed, r)?;
                let mut steps = Vec::with_capacity(config.steps);
                let mut truth_weight = Vec::new();
                let mut cum = 0.0;
                for (n, b) in contexts.iter().enumerate() {
                    let p = bidder.bid(&registry, b, &grid, n as u64)?;
                    let (lc, ls) = truth.lines(&registry, b)?;
                    let y_c = keyed_response(sigmoid(lc.at(p)), config.seed, label::RESPONSE_CARRIER, r, n as u64, p);
                    let y_s = keyed_response(sigmoid(ls.at(p)), config.seed, label::RESPONSE_SHIPPER, r, n as u64, p);
                    let got = true_revenue(&truth, &registry, b, p)?;
                    let best = oracle_price(&truth, &registry, b, &grid)?.1.max(got);
                    let regret = best - got;
                    cum += regret;
                    steps.push(BanditStep { step: n, context: b.key(), bid: p, y_c, y_s, regret, cum_regret: cum });
                    bidder.observe(&registry, ObservationRecord { n: n as u64, b: b.clone(), p, y_c, y_s })?;
                    if let (Some(slot), Some(s)) = (truth_slot, bidder.belief()) {
                        if s.resample_count() == 0 {
                            truth_weight.push(s.q()[slot]);
                        }
                    }
                }
                let final_map = bidder.belief().map(|s| s.candidates()[s.map_index()].clone());
                Ok((
                    BanditRep { rep, steps, snapshots: bidder.snapshots.clone(), final_map, truth_weight },
                    policy == PolicyName::MeanPrice && fell_back,
                ))
            })
            .collect()
    });

    let mut policies: Vec<BanditPolicyResult> = config
        .policies
        .iter()
        .map(|&policy| BanditPolicyResult { policy, reps: Vec::with_capacity(config.reps), fallbacks: 0 })
        .collect();
    for rep in per_rep {
        for (i, (r, fb)) in rep?.into_iter().enumerate() {
            policies[i].reps.push(r);
            policies[i].fallbacks += fb as usize;
        }
    }
    Ok(BanditResult { truth, registry, grid, heldout, policies })
}
