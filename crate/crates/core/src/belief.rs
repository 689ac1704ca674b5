//! Bayesian reweighting of a model ensemble.
//!
//! The observer is treated as a Bayesian reasoner: each observation has a
//! likelihood under every candidate model and the weights are multiplied by
//! it and renormalized. Three kinds of evidence are supported:
//!
//! - behavior: a trace the agent executed, scored by cost regret against the
//!   model's own optimum (noisy-rational with temperature `alpha`);
//! - explanation: information that rules models out (likelihood 0 or 1);
//! - outcome: whether an execution met a contract, scored by the kernel.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planning::{evaluate_trace, optimal_plan, PlanResult, PlanningModel};
use crate::trust::{kernel_probability, Contract, LikelihoodKernel, ModelEnsemble};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observation {
    Behavior { trace: Vec<String> },
    Explanation { eliminate: BTreeSet<String> },
    Outcome { success: bool, contract: Contract },
}

impl Observation {
    pub fn eliminate<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Observation::Explanation {
            eliminate: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn behavior<I, S>(trace: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Observation::Behavior {
            trace: trace.into_iter().map(Into::into).collect(),
        }
    }

    /// Checks the observation against an ensemble's model ids.
    pub fn validate_for(&self, ensemble: &ModelEnsemble) -> Result<()> {
        match self {
            Observation::Behavior { trace } if trace.is_empty() => {
                Err(Error::validation("observation.trace", "behavior trace must be nonempty"))
            }
            Observation::Explanation { eliminate } => {
                if eliminate.is_empty() {
                    return Err(Error::validation("observation.eliminate", "elimination set must be nonempty"));
                }
                match eliminate.iter().find(|id| ensemble.index_of(id).is_none()) {
                    Some(id) => Err(Error::validation("observation.eliminate", format!("unknown model id '{id}'"))),
                    None => Ok(()),
                }
            }
            Observation::Outcome { contract, .. } => contract.validate(),
            Observation::Behavior { .. } => Ok(()),
        }
    }
}

/// Temperature of the noisy-rational behavior likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalityParams {
    pub alpha: f64,
}

impl Default for RationalityParams {
    fn default() -> Self {
        RationalityParams { alpha: 1.0 }
    }
}

impl RationalityParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_finite() && self.alpha > 0.0 {
            Ok(())
        } else {
            Err(Error::validation("rationality.alpha", format!("alpha must be positive, got {}", self.alpha)))
        }
    }
}

/// Likelihood of `obs` if `model` were the agent's true model.
pub fn observation_likelihood(
    model: &PlanningModel,
    obs: &Observation,
    params: &RationalityParams,
    kernel: &LikelihoodKernel,
) -> Result<f64> {
    let plan = optimal_plan(model)?;
    likelihood_given_plan(model, &plan, obs, params, kernel)
}

fn likelihood_given_plan(
    model: &PlanningModel,
    plan: &PlanResult,
    obs: &Observation,
    params: &RationalityParams,
    kernel: &LikelihoodKernel,
) -> Result<f64> {
    Ok(match obs {
        Observation::Behavior { trace } => {
            let eval = evaluate_trace(model, trace)?;
            if !eval.executable || !eval.achieves_goal || !plan.is_solvable() {
                0.0
            } else {
                let regret = (eval.cost - plan.cost).max(0.0);
                (-params.alpha * regret).exp()
            }
        }
        Observation::Explanation { eliminate } => {
            if eliminate.contains(&model.id) {
                0.0
            } else {
                1.0
            }
        }
        Observation::Outcome { success, contract } => {
            let p = if contract.goal.is_subset(&model.goal) {
                kernel_probability(kernel, plan, contract)
            } else {
                0.0
            };
            if *success {
                p
            } else {
                1.0 - p
            }
        }
    })
}

/// Likelihood of `obs` under every model of the ensemble, reusing the
/// ensemble's memoized plans.
pub fn likelihoods(
    ensemble: &ModelEnsemble,
    obs: &Observation,
    params: &RationalityParams,
    kernel: &LikelihoodKernel,
) -> Result<Vec<f64>> {
    obs.validate_for(ensemble)?;
    ensemble
        .models()
        .iter()
        .enumerate()
        .map(|(i, model)| {
            let plan = match obs {
                // Explanations never consult the planner.
                Observation::Explanation { .. } => PlanResult::unsolvable(),
                _ => ensemble.optimal_plan(i)?,
            };
            likelihood_given_plan(model, &plan, obs, params, kernel)
        })
        .collect()
}

/// Posterior ensemble after observing `obs`. Fails with
/// [`Error::Contradiction`] when no model with positive weight explains it.
pub fn posterior_update(
    ensemble: &ModelEnsemble,
    obs: &Observation,
    params: &RationalityParams,
    kernel: &LikelihoodKernel,
) -> Result<ModelEnsemble> {
    params.validate()?;
    let likelihood = likelihoods(ensemble, obs, params, kernel)?;
    let joint: Vec<f64> = ensemble.weights().iter().zip(&likelihood).map(|(w, l)| w * l).collect();
    let evidence: f64 = joint.iter().sum();
    if evidence.is_nan() || evidence <= 0.0 {
        return Err(Error::Contradiction);
    }
    ensemble.with_weights(joint.into_iter().map(|j| j / evidence).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planning::Action;

    fn model(id: &str, with_shortcut: bool) -> PlanningModel {
        let mut actions = vec![
            Action::new("walk", ["start"], ["mid"], ["start"], 2.0),
            Action::new("finish", ["mid"], ["done"], [], 1.0),
        ];
        if with_shortcut {
            actions.push(Action::new("jump", ["start"], ["done"], [], 1.0));
        }
        PlanningModel {
            id: id.into(),
            facts: ["start", "mid", "done"].iter().map(|s| s.to_string()).collect(),
            init: BTreeSet::from(["start".to_string()]),
            goal: BTreeSet::from(["done".to_string()]),
            actions,
        }
    }

    fn ensemble() -> ModelEnsemble {
        ModelEnsemble::uniform(vec![model("a", true), model("b", false)]).unwrap()
    }

    #[test]
    fn behavior_likelihood_uses_regret() {
        let params = RationalityParams { alpha: 0.5 };
        let k = LikelihoodKernel::default();
        let walk = Observation::behavior(["walk", "finish"]);
        // Optimal in b (cost 3), regret 2 in a (optimum 1).
        assert_eq!(observation_likelihood(&model("b", false), &walk, &params, &k).unwrap(), 1.0);
        let la = observation_likelihood(&model("a", true), &walk, &params, &k).unwrap();
        assert!((la - (-1.0f64).exp()).abs() < 1e-15);
        let jump = Observation::behavior(["jump"]);
        assert_eq!(observation_likelihood(&model("b", false), &jump, &params, &k).unwrap(), 0.0);
        // Executable but goal not reached.
        let partial = Observation::behavior(["walk"]);
        assert_eq!(observation_likelihood(&model("b", false), &partial, &params, &k).unwrap(), 0.0);
    }

    #[test]
    fn feasible_only_in_one_model_collapses_posterior() {
        let post = posterior_update(&ensemble(), &Observation::behavior(["jump"]), &RationalityParams { alpha: 7.0 }, &LikelihoodKernel::default()).unwrap();
        assert_eq!(post.weights(), &[1.0, 0.0]);
    }

    #[test]
    fn contradiction_is_reported() {
        let e = ensemble().with_weights(vec![0.0, 1.0]).unwrap();
        let err = posterior_update(&e, &Observation::behavior(["jump"]), &RationalityParams::default(), &LikelihoodKernel::default());
        assert_eq!(err.unwrap_err(), Error::Contradiction);
        let err = posterior_update(&ensemble(), &Observation::eliminate(["a", "b"]), &RationalityParams::default(), &LikelihoodKernel::default());
        assert_eq!(err.unwrap_err(), Error::Contradiction);
    }

    #[test]
    fn invalid_observations_are_rejected() {
        let e = ensemble();
        let p = RationalityParams::default();
        let k = LikelihoodKernel::default();
        assert!(matches!(posterior_update(&e, &Observation::eliminate(["zz"]), &p, &k), Err(Error::Validation { .. })));
        assert!(matches!(posterior_update(&e, &Observation::eliminate(Vec::<String>::new()), &p, &k), Err(Error::Validation { .. })));
        assert!(matches!(posterior_update(&e, &Observation::behavior(Vec::<String>::new()), &p, &k), Err(Error::Validation { .. })));
        assert!(matches!(posterior_update(&e, &Observation::eliminate(["a"]), &RationalityParams { alpha: 0.0 }, &k), Err(Error::Validation { .. })));
    }

    #[test]
    fn outcome_likelihood_uses_kernel() {
        let k = LikelihoodKernel::Boltzmann { beta: 0.1 };
        let contract = Contract::new(BTreeSet::from(["done".to_string()]), 10.0).unwrap();
        let ok = Observation::Outcome { success: true, contract: contract.clone() };
        let fail = Observation::Outcome { success: false, contract };
        let m = model("b", false);
        let p = RationalityParams::default();
        let s = observation_likelihood(&m, &ok, &p, &k).unwrap();
        let f = observation_likelihood(&m, &fail, &p, &k).unwrap();
        assert!((s - (-0.3f64).exp()).abs() < 1e-15);
        assert!((s + f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn observation_json_shape() {
        let obs: Observation = serde_json::from_str(r#"{"type":"explanation","eliminate":["M2"]}"#).unwrap();
        assert_eq!(obs, Observation::eliminate(["M2"]));
        let obs: Observation = serde_json::from_str(r#"{"type":"outcome","success":false,"contract":{"goal":["g"],"cost_bound":"inf"}}"#).unwrap();
        assert!(matches!(obs, Observation::Outcome { success: false, .. }));
    }
}
