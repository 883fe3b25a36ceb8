//! One policy's bidding state across a run.

use crate::belief::{design_matrices, resample_due, BaggingConfig, BeliefState, ObservationRecord, ResampleReport};
use crate::choice_model::{fit_l1_logistic, CandidateModel, FeatureRegistry, LabeledFeatures, LoadAttributes, WeightVector};
use crate::error::Result;
use crate::policies::{
    est_opt_policy, exploit_policy, kg_policy, opt_thompson_policy, thompson_policy, HorizonWeight, PolicyName, PriceGrid,
};
use crate::rng::{self, label};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningParams {
    pub k: usize,
    /// `C`; 0 disables refreshes.
    pub resample_base: u64,
    pub tau: HorizonWeight,
    pub bagging: BaggingConfig,
}

/// Most probable candidate just before a resampling event.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub r: u32,
    pub n: u64,
    pub map: CandidateModel,
}

#[derive(Debug, Clone)]
pub struct Bidder {
    policy: PolicyName,
    params: LearningParams,
    seed: u64,
    rep: u64,
    belief: Option<BeliefState>,
    estimate: Option<CandidateModel>,
    history: Vec<ObservationRecord>,
    refreshes: u32,
    fixed_price: f64,
    pub snapshots: Vec<Snapshot>,
    pub reports: Vec<ResampleReport>,
}

impl Bidder {
    /// `candidates` seeds the belief (or, for Est-Opt, its first entry is
    /// the starting estimate); `fixed_price` is the Mean-Price bid.
    pub fn new(policy: PolicyName, params: LearningParams, candidates: Vec<CandidateModel>, fixed_price: f64, seed: u64, rep: u64) -> Result<Self> {
        let (belief, estimate) = match policy {
            PolicyName::EstOpt => (None, candidates.into_iter().next()),
            PolicyName::MeanPrice => (None, None),
            _ => (Some(BeliefState::init_uniform(candidates)?), None),
        };
        Ok(Bidder {
            policy,
            params,
            seed,
            rep,
            belief,
            estimate,
            history: Vec::new(),
            refreshes: 0,
            fixed_price,
            snapshots: Vec::new(),
            reports: Vec::new(),
        })
    }

    pub fn policy(&self) -> PolicyName {
        self.policy
    }

    pub fn belief(&self) -> Option<&BeliefState> {
        self.belief.as_ref()
    }

    /// Bid for decision number `n`.
    pub fn bid(&self, registry: &FeatureRegistry, b: &LoadAttributes, grid: &PriceGrid, n: u64) -> Result<f64> {
        let rng = || rng::stream(self.seed, &[label::POLICY, self.rep, n]);
        let d = match (self.policy, &self.belief, &self.estimate) {
            (PolicyName::MeanPrice, _, _) => return Ok(self.fixed_price),
            (PolicyName::EstOpt, _, Some(m)) => est_opt_policy(m, registry, b, grid)?,
            (PolicyName::Kg, Some(s), _) => kg_policy(s, registry, b, self.params.tau, grid)?,
            (PolicyName::Exploit, Some(s), _) => exploit_policy(s, registry, b, grid)?,
            (PolicyName::Ts, Some(s), _) => thompson_policy(s, registry, b, grid, &mut rng())?,
            (PolicyName::OptTs, Some(s), _) => opt_thompson_policy(s, registry, b, grid, &mut rng())?,
            _ => unreachable!("bidder state matches its policy"),
        };
        Ok(d.price)
    }

    /// Records an outcome and refreshes the model when the `C·2^r` schedule is due.
    pub fn observe(&mut self, registry: &FeatureRegistry, obs: ObservationRecord) -> Result<()> {
        let c = self.params.resample_base;
        match self.policy {
            PolicyName::MeanPrice => {}
            PolicyName::EstOpt => {
                self.history.push(obs);
                if resample_due(self.history.len() as u64, self.refreshes, c) {
                    self.refit(registry)?;
                    self.refreshes += 1;
                }
            }
            _ => {
                let s = self.belief.as_mut().expect("belief policies carry a belief");
                s.update(registry, obs)?;
                if resample_due(s.n(), s.resample_count(), c) {
                    self.snapshots.push(Snapshot { r: s.resample_count(), n: s.n(), map: s.candidates()[s.map_index()].clone() });
                    let mut g = rng::stream(self.seed, &[label::BAGGING, self.rep, s.resample_count() as u64]);
                    self.reports.push(s.bagging_resample(registry, self.params.k, &self.params.bagging, &mut g)?);
                }
            }
        }
        Ok(())
    }

    // Full-history L1 fit per side; a side whose labels are all one class keeps its weights.
    fn refit(&mut self, registry: &FeatureRegistry) -> Result<()> {
        let Some(current) = self.estimate.clone() else { return Ok(()) };
        let (carrier, shipper) = design_matrices(&self.history, registry)?;
        let cfg = self.params.bagging.fit_config(self.history.len());
        let side = |data: &LabeledFeatures, old: &WeightVector| -> Result<WeightVector> {
            let labels: Vec<f64> = (0..data.len()).map(|i| data.label(i)).collect();
            if labels.iter().all(|&y| y > 0.0) || labels.iter().all(|&y| y < 0.0) {
                return Ok(old.clone());
            }
            Ok(fit_l1_logistic(data, &cfg)?.weights)
        };
        let alpha = side(&carrier, &current.alpha)?;
        let beta = side(&shipper, &current.beta)?;
        self.estimate = Some(CandidateModel::new(alpha, beta)?);
        Ok(())
    }
}
