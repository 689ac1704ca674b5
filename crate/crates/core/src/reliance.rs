//! Reliance decisions and trust calibration.
//!
//! The supervisor accepts the agent's decision when the expected value of
//! relying on it beats the penalty for turning it down. Trust is calibrated
//! when the supervisor's contract probability matches the probability that
//! the agent's true model actually meets the contract.

use serde::{Deserialize, Serialize};

use crate::belief::{posterior_update, Observation, RationalityParams};
use crate::error::{Error, Result};
use crate::planning::{optimal_plan, PlanningModel};
use crate::trust::{contract_probability, kernel_probability, Contract, LikelihoodKernel, ModelEnsemble, TrustMeasureConfig};

/// Default tolerance for calling trust calibrated.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Payoffs of the reliance decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityProfile {
    pub u_success: f64,
    pub u_failure: f64,
    pub c_reject: f64,
}

impl UtilityProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.u_success.is_finite() && self.u_failure.is_finite() && self.c_reject.is_finite()) {
            return Err(Error::validation("utilities", "utilities must be finite"));
        }
        if self.u_success.is_nan() || self.u_failure.is_nan() || self.u_success <= self.u_failure {
            return Err(Error::validation("utilities", "u_success must exceed u_failure"));
        }
        if self.c_reject < 0.0 {
            return Err(Error::validation("utilities.c_reject", "rejection cost must be nonnegative"));
        }
        Ok(())
    }

    /// Contract probability above which accepting is strictly better. Not
    /// clamped: values outside [0, 1] mean the decision never depends on p.
    pub fn raw_threshold(&self) -> f64 {
        (-self.c_reject - self.u_failure) / (self.u_success - self.u_failure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelianceDecision {
    pub v_accept: f64,
    pub v_reject: f64,
    pub decision: Decision,
    /// Break-even contract probability, clamped to [0, 1].
    pub threshold: f64,
}

/// Expected-value comparison between relying on the agent and rejecting.
/// Ties go to reject.
pub fn reliance_decision(p_contract: f64, utilities: &UtilityProfile) -> RelianceDecision {
    let v_accept = p_contract * utilities.u_success + (1.0 - p_contract) * utilities.u_failure;
    let v_reject = -utilities.c_reject;
    let raw = utilities.raw_threshold();
    // Deciding on the threshold keeps the decision exact at the tie point,
    // where rounding in the two value sums could disagree by an ulp.
    let decision = if p_contract > raw { Decision::Accept } else { Decision::Reject };
    RelianceDecision {
        v_accept,
        v_reject,
        decision,
        threshold: raw.clamp(0.0, 1.0),
    }
}

/// How the agent's own probability of meeting the contract is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GroundTruthSemantics {
    /// The same kernel the observer uses, applied to the true model.
    Kernel { kernel: LikelihoodKernel },
    /// Deterministic execution: 1 iff the true optimum is within the bound.
    Indicator,
}

pub fn ground_truth_probability(true_model: &PlanningModel, contract: &Contract, semantics: &GroundTruthSemantics) -> Result<f64> {
    let plan = optimal_plan(true_model)?;
    if !contract.goal.is_subset(&true_model.goal) {
        return Ok(0.0);
    }
    Ok(match semantics {
        GroundTruthSemantics::Indicator => {
            if contract.is_met_by(&plan) {
                1.0
            } else {
                0.0
            }
        }
        GroundTruthSemantics::Kernel { kernel } => kernel_probability(kernel, &plan, contract),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Overtrust,
    Undertrust,
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub p_human: f64,
    pub p_true: f64,
    pub gap: f64,
    pub classification: Classification,
    pub epsilon: f64,
}

pub fn calibration_report(p_human: f64, p_true: f64, epsilon: f64) -> CalibrationReport {
    let gap = p_human - p_true;
    let classification = if gap > epsilon {
        Classification::Overtrust
    } else if gap < -epsilon {
        Classification::Undertrust
    } else {
        Classification::Calibrated
    };
    CalibrationReport {
        p_human,
        p_true,
        gap,
        classification,
        epsilon,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationChoice {
    /// Index into the candidate list, or `None` when nothing helps.
    pub chosen: Option<usize>,
    /// Calibration after the chosen explanation (status quo when none).
    pub projected: CalibrationReport,
}

/// Greedy one-step choice of the explanation whose posterior brings the
/// observer's contract probability closest to `p_true`.
pub fn select_explanation(
    ensemble: &ModelEnsemble,
    candidates: &[Observation],
    contract: &Contract,
    kernel: &LikelihoodKernel,
    p_true: f64,
    epsilon: f64,
) -> Result<ExplanationChoice> {
    if candidates.is_empty() {
        return Err(Error::validation("candidates", "at least one candidate explanation is required"));
    }
    let measure = TrustMeasureConfig::Identity;
    let params = RationalityParams::default();
    let current = contract_probability(ensemble, contract, kernel, &measure)?;
    let mut best = calibration_report(current.p_contract, p_true, epsilon);
    let mut chosen = None;
    for (i, candidate) in candidates.iter().enumerate() {
        if !matches!(candidate, Observation::Explanation { .. }) {
            return Err(Error::validation(format!("candidates[{i}]"), "only explanations can be selected"));
        }
        let posterior = match posterior_update(ensemble, candidate, &params, kernel) {
            Ok(e) => e,
            Err(Error::Contradiction) => continue,
            Err(e) => return Err(e),
        };
        let p = contract_probability(&posterior, contract, kernel, &measure)?.p_contract;
        let report = calibration_report(p, p_true, epsilon);
        if report.gap.abs() < best.gap.abs() {
            best = report;
            chosen = Some(i);
        }
    }
    Ok(ExplanationChoice { chosen, projected: best })
}
