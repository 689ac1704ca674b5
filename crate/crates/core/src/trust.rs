//! Contract-satisfaction likelihoods, the marginal belief that a contract
//! holds, and the trust measure built on top of it.

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planning::{optimal_plan, PlanResult, PlanningModel};

/// Tolerance on the sum of ensemble weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// A performance guarantee: reach `goal` with total cost at most `cost_bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub goal: BTreeSet<String>,
    #[serde(with = "crate::serde_cost")]
    pub cost_bound: f64,
}

impl Contract {
    pub fn new(goal: BTreeSet<String>, cost_bound: f64) -> Result<Self> {
        let contract = Contract { goal, cost_bound };
        contract.validate()?;
        Ok(contract)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cost_bound.is_nan() || self.cost_bound <= 0.0 {
            return Err(Error::validation(
                "contract.cost_bound",
                format!("cost bound must be positive, got {}", self.cost_bound),
            ));
        }
        Ok(())
    }

    /// Whether an optimal plan of this cost meets the bound.
    pub fn is_met_by(&self, plan: &PlanResult) -> bool {
        plan.is_solvable() && plan.cost <= self.cost_bound
    }
}

/// How an optimal plan cost maps to the probability that a model satisfies
/// the contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LikelihoodKernel {
    /// `exp(-beta * cost)`, independent of the cost bound.
    Boltzmann { beta: f64 },
    /// 1 when the optimal cost is within the bound, else 0.
    HardThreshold,
    /// Logistic in the distance to the bound.
    SoftThreshold { beta: f64 },
}

impl Default for LikelihoodKernel {
    fn default() -> Self {
        LikelihoodKernel::Boltzmann { beta: 0.1 }
    }
}

impl LikelihoodKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LikelihoodKernel::Boltzmann { beta } | LikelihoodKernel::SoftThreshold { beta } => {
                if beta.is_finite() && beta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::validation("kernel.beta", format!("beta must be positive, got {beta}")))
                }
            }
            LikelihoodKernel::HardThreshold => Ok(()),
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            LikelihoodKernel::Boltzmann { beta } | LikelihoodKernel::SoftThreshold { beta } => Some(beta),
            LikelihoodKernel::HardThreshold => None,
        }
    }

    /// Same kernel family with a different inverse temperature. Kernels
    /// without a temperature are returned unchanged.
    pub fn with_beta(self, beta: f64) -> Self {
        match self {
            LikelihoodKernel::Boltzmann { .. } => LikelihoodKernel::Boltzmann { beta },
            LikelihoodKernel::SoftThreshold { .. } => LikelihoodKernel::SoftThreshold { beta },
            LikelihoodKernel::HardThreshold => LikelihoodKernel::HardThreshold,
        }
    }
}

/// Probability that a model with this optimal plan satisfies `contract`.
pub fn kernel_probability(kernel: &LikelihoodKernel, plan: &PlanResult, contract: &Contract) -> f64 {
    if !plan.is_solvable() || !plan.cost.is_finite() {
        return 0.0;
    }
    let cost = plan.cost;
    let p = match *kernel {
        LikelihoodKernel::Boltzmann { beta } => (-beta * cost).exp(),
        LikelihoodKernel::HardThreshold => {
            if cost <= contract.cost_bound {
                1.0
            } else {
                0.0
            }
        }
        LikelihoodKernel::SoftThreshold { beta } => {
            if contract.cost_bound.is_infinite() {
                1.0
            } else {
                1.0 / (1.0 + (beta * (cost - contract.cost_bound)).exp())
            }
        }
    };
    p.clamp(0.0, 1.0)
}

/// The monotone transform from contract probability to trust.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrustMeasureConfig {
    #[default]
    Identity,
    Affine { a: f64, b: f64 },
    Power { gamma: f64 },
}

impl TrustMeasureConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TrustMeasureConfig::Identity => Ok(()),
            TrustMeasureConfig::Affine { a, b } => {
                if a.is_finite() && a > 0.0 && b.is_finite() {
                    Ok(())
                } else {
                    Err(Error::validation("measure", format!("affine transform needs a > 0 and finite b, got a={a}, b={b}")))
                }
            }
            TrustMeasureConfig::Power { gamma } => {
                if gamma.is_finite() && gamma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::validation("measure.gamma", format!("gamma must be positive, got {gamma}")))
                }
            }
        }
    }
}

/// Applies the configured transform to a probability.
pub fn trust_measure(p: f64, config: &TrustMeasureConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} is outside [0, 1]")));
    }
    Ok(match *config {
        TrustMeasureConfig::Identity => p,
        TrustMeasureConfig::Affine { a, b } => a * p + b,
        TrustMeasureConfig::Power { gamma } => p.powf(gamma),
    })
}

/// Candidate models with a probability vector over them.
///
/// Optimal plans are memoized per model and shared between an ensemble and
/// every ensemble derived from it by reweighting, so repeated belief updates
/// never re-run the planner.
#[derive(Debug, Clone)]
pub struct ModelEnsemble {
    models: Arc<[PlanningModel]>,
    weights: Vec<f64>,
    plans: Arc<[OnceLock<Result<PlanResult>>]>,
}

impl PartialEq for ModelEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.models == other.models && self.weights == other.weights
    }
}

impl ModelEnsemble {
    pub fn new(models: Vec<PlanningModel>, weights: Vec<f64>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::validation("ensemble.models", "at least one model is required"));
        }
        let mut ids = BTreeSet::new();
        for (i, model) in models.iter().enumerate() {
            model.validate()?;
            if !ids.insert(model.id.as_str()) {
                return Err(Error::validation(format!("ensemble.models[{i}].id"), format!("duplicate model id '{}'", model.id)));
            }
        }
        let plans = (0..models.len()).map(|_| OnceLock::new()).collect();
        let ensemble = ModelEnsemble {
            models: models.into(),
            weights: Vec::new(),
            plans,
        };
        ensemble.with_weights(weights)
    }

    pub fn uniform(models: Vec<PlanningModel>) -> Result<Self> {
        let n = models.len().max(1);
        ModelEnsemble::new(models, vec![1.0 / n as f64; n])
    }

    /// Same models (and plan cache) under a new weight vector.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights, self.models.len())?;
        Ok(ModelEnsemble {
            models: Arc::clone(&self.models),
            weights,
            plans: Arc::clone(&self.plans),
        })
    }

    pub fn models(&self) -> &[PlanningModel] {
        &self.models
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.models.iter().map(|m| m.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.models.iter().position(|m| m.id == id)
    }

    /// Memoized optimal plan of model `index`.
    pub fn optimal_plan(&self, index: usize) -> Result<PlanResult> {
        self.plans[index].get_or_init(|| optimal_plan(&self.models[index])).clone()
    }
}

fn validate_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::validation(
            "ensemble.weights",
            format!("expected {n} weights, got {}", weights.len()),
        ));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::validation("ensemble.weights", format!("weights must be nonnegative, got {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::validation("ensemble.weights", format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// The observer's belief that the contract will be met, per model and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustAssessment {
    pub p_contract: f64,
    pub trust: f64,
    pub per_model: Vec<f64>,
}

/// Per-model contract likelihoods for an ensemble. A model whose goal does
/// not cover the contract goal cannot satisfy it and scores 0.
pub fn per_model_probabilities(ensemble: &ModelEnsemble, contract: &Contract, kernel: &LikelihoodKernel) -> Result<Vec<f64>> {
    ensemble
        .models()
        .iter()
        .enumerate()
        .map(|(i, model)| {
            if !contract.goal.is_subset(&model.goal) {
                return Ok(0.0);
            }
            let plan = ensemble.optimal_plan(i)?;
            Ok(kernel_probability(kernel, &plan, contract))
        })
        .collect()
}

/// Weighted mixture of per-model likelihoods, clamped into the range of
/// its components to absorb rounding.
pub fn mixture(weights: &[f64], per_model: &[f64]) -> f64 {
    let p: f64 = weights.iter().zip(per_model).map(|(w, k)| w * k).sum();
    let lo = per_model.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = per_model.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    p.clamp(lo, hi)
}

/// Marginal probability that the contract holds under the ensemble, and
/// the trust it induces.
pub fn contract_probability(
    ensemble: &ModelEnsemble,
    contract: &Contract,
    kernel: &LikelihoodKernel,
    measure: &TrustMeasureConfig,
) -> Result<TrustAssessment> {
    let per_model = per_model_probabilities(ensemble, contract, kernel)?;
    let p_contract = mixture(ensemble.weights(), &per_model);
    let trust = trust_measure(p_contract, measure)?;
    Ok(TrustAssessment {
        p_contract,
        trust,
        per_model,
    })
}

/// Contract induced by the observer's own task model: its goal, with a
/// cost bound of `(1 + slack)` times its optimal cost.
pub fn derive_contract(task_model: &PlanningModel, slack: f64) -> Result<Contract> {
    if !(slack.is_finite() && slack >= 0.0) {
        return Err(Error::validation("contract.slack", format!("slack must be nonnegative, got {slack}")));
    }
    let plan = optimal_plan(task_model)?;
    if !plan.is_solvable() {
        return Err(Error::CannotDeriveContract(format!(
            "task model '{}' cannot reach its goal",
            task_model.id
        )));
    }
    if plan.cost == 0.0 {
        return Err(Error::CannotDeriveContract(format!(
            "task model '{}' already satisfies its goal, so no positive cost bound exists",
            task_model.id
        )));
    }
    Contract::new(task_model.goal.clone(), (1.0 + slack) * plan.cost)
}
