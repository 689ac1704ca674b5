//! Synthetic Bayesian supervisors.
//!
//! A [`SimulatedHuman`] holds an ensemble, a personal likelihood kernel and a
//! utility profile. It updates its beliefs exactly, answers the overall-trust
//! question on a 0–10 scale with optional Gaussian report noise, and decides
//! whether to rely on the agent. Every random draw comes from a seeded stream
//! so replays are reproducible.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::belief::{posterior_update, Observation, RationalityParams};
use crate::error::{Error, Result};
use crate::reliance::{reliance_decision, RelianceDecision, UtilityProfile};
use crate::trust::{contract_probability, Contract, LikelihoodKernel, ModelEnsemble, TrustAssessment, TrustMeasureConfig};

/// Upper end of the self-report scale.
pub const REPORT_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedHuman {
    pub ensemble: ModelEnsemble,
    pub contract: Contract,
    pub kernel: LikelihoodKernel,
    pub rationality: RationalityParams,
    pub measure: TrustMeasureConfig,
    pub report_noise_sigma: f64,
    pub utilities: UtilityProfile,
    pub rng_seed: u64,
    /// Number of stimuli processed so far; indexes the noise stream.
    pub history_len: u64,
}

impl SimulatedHuman {
    pub fn validate(&self) -> Result<()> {
        self.contract.validate()?;
        self.kernel.validate()?;
        self.rationality.validate()?;
        self.measure.validate()?;
        self.utilities.validate()?;
        if !(self.report_noise_sigma.is_finite() && self.report_noise_sigma >= 0.0) {
            return Err(Error::validation("report_noise_sigma", "noise sigma must be nonnegative"));
        }
        Ok(())
    }

    pub fn assess(&self) -> Result<TrustAssessment> {
        contract_probability(&self.ensemble, &self.contract, &self.kernel, &self.measure)
    }
}

/// One answer to the overall-trust question.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustReport {
    pub value: f64,
    pub p_contract: f64,
    pub timestamp: u64,
}

/// Noise for report `index` of the human seeded with `seed`. Each index gets
/// its own ChaCha stream, so a report never depends on how often it was asked.
fn report_noise(seed: u64, index: u64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Normal::new(0.0, sigma).expect("sigma validated").sample(&mut rng)
}

/// Scaled, noisy, clamped self-report of trust.
pub fn report_trust(human: &SimulatedHuman) -> Result<TrustReport> {
    human.validate()?;
    let assessment = human.assess()?;
    let noise = report_noise(human.rng_seed, human.history_len, human.report_noise_sigma);
    let value = (REPORT_SCALE * assessment.trust + noise).clamp(0.0, REPORT_SCALE);
    Ok(TrustReport {
        value,
        p_contract: assessment.p_contract,
        timestamp: human.history_len,
    })
}

/// Observes one stimulus: updates beliefs, decides on reliance and reports
/// trust. The input human is left untouched.
pub fn step(human: &SimulatedHuman, stimulus: &Observation) -> Result<(SimulatedHuman, RelianceDecision, TrustReport)> {
    let ensemble = posterior_update(&human.ensemble, stimulus, &human.rationality, &human.kernel)?;
    let next = SimulatedHuman {
        ensemble,
        history_len: human.history_len + 1,
        ..human.clone()
    };
    let report = report_trust(&next)?;
    let decision = reliance_decision(report.p_contract, &next.utilities);
    Ok((next, decision, report))
}

/// Population heterogeneity for a simulated cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    pub n: usize,
    /// Mean of ln(beta).
    pub beta_log_mean: f64,
    /// Standard deviation of ln(beta).
    pub beta_log_sd: f64,
    /// Dirichlet concentration around the base prior.
    pub concentration: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("cohort.n", "cohort must have at least one member"));
        }
        if !(self.beta_log_mean.is_finite() && self.beta_log_sd.is_finite() && self.beta_log_sd >= 0.0) {
            return Err(Error::validation("cohort.beta_log_sd", "log-normal parameters must be finite with sd >= 0"));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::validation("cohort.concentration", "concentration must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::validation("cohort.noise_sigma", "noise sigma must be nonnegative"));
        }
        Ok(())
    }
}

/// Draws a Dirichlet(concentration * base) vector via normalized gammas.
/// Zero base weights stay zero.
fn dirichlet_around<R: Rng>(rng: &mut R, base: &[f64], concentration: f64) -> Vec<f64> {
    let draws: Vec<f64> = base
        .iter()
        .map(|&w| {
            if w > 0.0 {
                Gamma::new(concentration * w, 1.0).expect("positive shape").sample(rng)
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.into_iter().map(|d| d / total).collect()
    } else {
        base.to_vec()
    }
}

/// Samples `config.n` humans around `template`: each gets a log-normal
/// `beta`, a Dirichlet-perturbed prior and its own derived seed.
pub fn sample_cohort(template: &SimulatedHuman, config: &CohortConfig) -> Result<Vec<SimulatedHuman>> {
    config.validate()?;
    template.validate()?;
    let beta_dist = LogNormal::new(config.beta_log_mean, config.beta_log_sd)
        .map_err(|e| Error::validation("cohort", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let base = template.ensemble.weights().to_vec();
    (0..config.n)
        .map(|_| {
            let beta = beta_dist.sample(&mut rng);
            let prior = dirichlet_around(&mut rng, &base, config.concentration);
            let seed = rng.next_u64();
            let sum: f64 = prior.iter().sum();
            let prior: Vec<f64> = prior.iter().map(|w| w / sum).collect();
            Ok(SimulatedHuman {
                ensemble: template.ensemble.with_weights(prior)?,
                kernel: template.kernel.with_beta(beta),
                report_noise_sigma: config.noise_sigma,
                rng_seed: seed,
                history_len: 0,
                ..template.clone()
            })
        })
        .collect()
}
