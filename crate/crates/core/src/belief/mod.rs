//! Sampled belief over `K` candidate models.
//!
//! The posterior is kept in log space; `q` is its normalised exponential.
//! [`BeliefState::bagging_resample`] replaces the candidate set by models
//! fitted on bootstrap resamples of the history and reweights them by their
//! likelihood on the full history.

pub mod io;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::choice_model::{
    carrier_features, fit_l1_logistic_weighted, log_sigmoid, shipper_features, sigmoid, CandidateModel,
    FeatureRegistry, FitConfig, LabeledFeatures, LoadAttributes, Response, Side, UtilityLine,
};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::rng::{self, SimRng};

/// Redraws allowed for a bootstrap set whose labels are all one class.
pub const MAX_BOOTSTRAP_REDRAWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub n: u64,
    pub b: LoadAttributes,
    pub p: f64,
    pub y_c: Response,
    pub y_s: Response,
}

impl ObservationRecord {
    /// `ln σ(y^c α·x^c) + ln σ(y^s β·x^s)` for one candidate.
    pub fn log_likelihood(&self, theta: &CandidateModel, registry: &FeatureRegistry) -> Result<f64> {
        let (lc, ls) = theta.lines(registry, &self.b)?;
        Ok(log_sigmoid(self.y_c.sign() * lc.at(self.p)) + log_sigmoid(self.y_s.sign() * ls.at(self.p)))
    }
}

/// How the L1 weight of a bootstrap fit depends on the history length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "kebab-case")]
pub enum LambdaRule {
    /// `λ` used as is against the mean loss.
    Fixed(f64),
    /// `λ = c / n`: the penalty `c·‖w‖₁` against the summed loss.
    PerRecord(f64),
}

impl LambdaRule {
    pub fn lambda(&self, n: usize) -> f64 {
        match *self {
            LambdaRule::Fixed(l) => l,
            LambdaRule::PerRecord(c) => c / n.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaggingConfig {
    pub lambda: LambdaRule,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for BaggingConfig {
    fn default() -> Self {
        BaggingConfig { lambda: LambdaRule::PerRecord(1.0), max_iter: 500, tol: 1e-6 }
    }
}

impl BaggingConfig {
    pub fn fit_config(&self, n: usize) -> FitConfig {
        FitConfig { lambda: self.lambda.lambda(n), max_iter: self.max_iter, tol: self.tol }
    }
}

/// What happened during one resampling event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResampleReport {
    /// Slots that kept their previous candidate after exhausting redraws.
    pub retained_slots: Vec<usize>,
    pub redraws: usize,
    /// Fits that stopped at the iteration cap.
    pub unconverged_fits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    candidates: Vec<CandidateModel>,
    log_q: Vec<f64>,
    q: Vec<f64>,
    resample_count: u32,
    history: Vec<ObservationRecord>,
    underflow_resets: u32,
}

/// `true` iff `n = C · 2^r`.
pub fn resample_due(n: u64, r: u32, base: u64) -> bool {
    if base == 0 || r >= 64 {
        return false;
    }
    base.checked_shl(r).is_some_and(|t| t >> r == base && t == n)
}

/// `Σ_i ln σ(y^c α·x^c) + ln σ(y^s β·x^s)` over `history`.
pub fn log_likelihood(theta: &CandidateModel, history: &[ObservationRecord], registry: &FeatureRegistry) -> Result<f64> {
    history.iter().map(|o| o.log_likelihood(theta, registry)).sum()
}

fn log_normalise(log_q: &mut [f64]) -> Option<Vec<f64>> {
    let m = log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let z: f64 = log_q.iter().map(|l| (l - m).exp()).sum();
    let lz = m + z.ln();
    log_q.iter_mut().for_each(|l| *l -= lz);
    let q: Vec<f64> = log_q.iter().map(|l| l.exp()).collect();
    let s: f64 = q.iter().sum();
    if !(s.is_finite() && s > 0.0) {
        return None;
    }
    Some(q.into_iter().map(|v| v / s).collect())
}

impl BeliefState {
    /// Uniform prior `q_k = 1/K`.
    pub fn init_uniform(candidates: Vec<CandidateModel>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let k = candidates.len();
        Ok(BeliefState {
            candidates,
            log_q: vec![-(k as f64).ln(); k],
            q: vec![1.0 / k as f64; k],
            resample_count: 0,
            history: Vec::new(),
            underflow_resets: 0,
        })
    }

    /// Starts from an explicit posterior `q` (used to pin confounding beliefs).
    pub fn with_weights(candidates: Vec<CandidateModel>, q: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        if q.len() != candidates.len() {
            return Err(Error::DimensionMismatch { expected: candidates.len(), got: q.len(), context: "belief weights" });
        }
        if q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("belief weights must be a probability vector"));
        }
        let s: f64 = q.iter().sum();
        let q: Vec<f64> = q.iter().map(|v| v / s).collect();
        Ok(BeliefState {
            log_q: q.iter().map(|v| v.ln()).collect(),
            q,
            candidates,
            resample_count: 0,
            history: Vec::new(),
            underflow_resets: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidates(&self) -> &[CandidateModel] {
        &self.candidates
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn log_q(&self) -> &[f64] {
        &self.log_q
    }

    pub fn resample_count(&self) -> u32 {
        self.resample_count
    }

    pub fn history(&self) -> &[ObservationRecord] {
        &self.history
    }

    /// Number of observations seen, `n`.
    pub fn n(&self) -> u64 {
        self.history.len() as u64
    }

    pub fn underflow_resets(&self) -> u32 {
        self.underflow_resets
    }

    /// Index of the most probable candidate (lowest index on ties).
    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.q.iter().enumerate() {
            if v > self.q[best] {
                best = i;
            }
        }
        best
    }

    pub fn check_against(&self, registry: &FeatureRegistry) -> Result<()> {
        self.candidates.iter().try_for_each(|c| c.check_against(registry))
    }

    /// Per-candidate carrier and shipper utility lines for context `b`.
    pub fn lines(&self, registry: &FeatureRegistry, b: &LoadAttributes) -> Result<Vec<(UtilityLine, UtilityLine)>> {
        self.candidates.iter().map(|c| c.lines(registry, b)).collect()
    }

    /// `Σ_k q_k f(b, p; θ_k)`.
    pub fn predictive_accept_prob(&self, registry: &FeatureRegistry, b: &LoadAttributes, p: f64) -> Result<f64> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::invalid(format!("bid must be positive, got {p}")));
        }
        Ok(self
            .lines(registry, b)?
            .iter()
            .zip(&self.q)
            .map(|((lc, ls), q)| q * sigmoid(lc.at(p)) * sigmoid(ls.at(p)))
            .sum())
    }

    /// Bayes update by one observation. Returns `true` if the posterior
    /// underflowed and was reset to uniform.
    pub fn update(&mut self, registry: &FeatureRegistry, obs: ObservationRecord) -> Result<bool> {
        let mut log_q = self.log_q.clone();
        for (l, c) in log_q.iter_mut().zip(&self.candidates) {
            *l += obs.log_likelihood(c, registry)?;
        }
        self.history.push(obs);
        let reset = self.set_log_weights(log_q);
        Ok(reset)
    }

    fn set_log_weights(&mut self, mut log_q: Vec<f64>) -> bool {
        match log_normalise(&mut log_q) {
            Some(q) => {
                self.log_q = log_q;
                self.q = q;
                false
            }
            None => {
                let k = self.k();
                self.log_q = vec![-(k as f64).ln(); k];
                self.q = vec![1.0 / k as f64; k];
                self.underflow_resets += 1;
                true
            }
        }
    }

    /// Value-style update: returns the posterior after `obs`.
    pub fn posterior_update(&self, registry: &FeatureRegistry, obs: ObservationRecord) -> Result<BeliefState> {
        let mut next = self.clone();
        next.update(registry, obs)?;
        Ok(next)
    }

    /// Posterior weights after a hypothetical outcome, without recording it.
    pub fn hypothetical_q(&self, registry: &FeatureRegistry, b: &LoadAttributes, p: f64, y_c: Response, y_s: Response) -> Result<Vec<f64>> {
        let obs = ObservationRecord { n: self.n(), b: b.clone(), p, y_c, y_s };
        Ok(self.posterior_update(registry, obs)?.q)
    }

    /// Replaces the candidate set by `K` bootstrap fits and reweights them
    /// by their likelihood on the whole history.
    pub fn bagging_resample(
        &mut self,
        registry: &FeatureRegistry,
        k: usize,
        config: &BaggingConfig,
        rng: &mut SimRng,
    ) -> Result<ResampleReport> {
        if k == 0 {
            return Err(Error::EmptyCandidates);
        }
        let n = self.history.len();
        if n == 0 {
            return Err(Error::EmptyHistory("bagging resample"));
        }
        let (carrier, shipper) = self.design(registry)?;
        let fit = config.fit_config(n);
        let seed: u64 = rng.random();

        let slot = |s: usize| -> Result<(CandidateModel, SlotOutcome)> {
            let mut srng = rng::stream(seed, &[s as u64]);
            let mut outcome = SlotOutcome::default();
            for attempt in 0..=MAX_BOOTSTRAP_REDRAWS {
                let counts = bootstrap_counts(n, &mut srng);
                if both_classes(&carrier, &counts) && both_classes(&shipper, &counts) {
                    let a = fit_l1_logistic_weighted(&carrier, &counts, &fit)?;
                    let b = fit_l1_logistic_weighted(&shipper, &counts, &fit)?;
                    outcome.unconverged = (!a.converged) as usize + (!b.converged) as usize;
                    return Ok((CandidateModel::new(a.weights, b.weights)?, outcome));
                }
                outcome.redraws = attempt + 1;
            }
            outcome.redraws = MAX_BOOTSTRAP_REDRAWS;
            outcome.retained = true;
            Ok((self.candidates[s % self.candidates.len()].clone(), outcome))
        };

        let results: Vec<Result<(CandidateModel, SlotOutcome)>> = par_map(k, slot);
        let mut report = ResampleReport::default();
        let mut candidates = Vec::with_capacity(k);
        for (s, r) in results.into_iter().enumerate() {
            let (c, o) = r?;
            if o.retained {
                report.retained_slots.push(s);
            }
            report.redraws += o.redraws;
            report.unconverged_fits += o.unconverged;
            candidates.push(c);
        }
        let log_q = candidates
            .iter()
            .map(|c| log_likelihood(c, &self.history, registry))
            .collect::<Result<Vec<_>>>()?;
        self.candidates = candidates;
        self.set_log_weights(log_q);
        self.resample_count += 1;
        Ok(report)
    }

    fn design(&self, registry: &FeatureRegistry) -> Result<(LabeledFeatures, LabeledFeatures)> {
        design_matrices(&self.history, registry)
    }
}

/// Carrier and shipper training sets for a history.
pub fn design_matrices(history: &[ObservationRecord], registry: &FeatureRegistry) -> Result<(LabeledFeatures, LabeledFeatures)> {
    let mut carrier = LabeledFeatures::new(Side::Carrier, registry.carrier_dim());
    let mut shipper = LabeledFeatures::new(Side::Shipper, registry.shipper_dim());
    for o in history {
        carrier.push(&carrier_features(registry, &o.b, o.p)?, o.y_c)?;
        shipper.push(&shipper_features(registry, &o.b, o.p)?, o.y_s)?;
    }
    Ok((carrier, shipper))
}

#[derive(Default)]
struct SlotOutcome {
    retained: bool,
    redraws: usize,
    unconverged: usize,
}

fn bootstrap_counts(n: usize, rng: &mut SimRng) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

fn both_classes(data: &LabeledFeatures, counts: &[u32]) -> bool {
    let mut seen = [false; 2];
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            seen[(data.label(i) > 0.0) as usize] = true;
        }
    }
    seen[0] && seen[1]
}
