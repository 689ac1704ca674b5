//! Scenario documents.
//!
//! A scenario is a JSON document holding the shared fact vocabulary and goal,
//! the candidate models with their prior weights, the observer's own task
//! model, the agent's true model (when known), the contract, the kernel, the
//! trust transform, the reliance payoffs and console narrative text.
//!
//! Every key is required; `true_model` may be `null`. Errors carry the JSON
//! path of the offending field.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Deserializer, Serialize};

use crate::belief::RationalityParams;
use crate::error::{Error, Result};
use crate::human::SimulatedHuman;
use crate::planning::{Action, PlanningModel};
use crate::reliance::{ground_truth_probability, GroundTruthSemantics, UtilityProfile};
use crate::trust::{contract_probability, derive_contract, Contract, LikelihoodKernel, ModelEnsemble, TrustAssessment, TrustMeasureConfig};

/// Tolerance on the declared prior weights before they are renormalized.
pub const DOCUMENT_WEIGHT_TOLERANCE: f64 = 1e-6;

/// Fixtures bundled with the crate, by name.
pub const SHIPPED_SCENARIOS: &[(&str, &str)] = &[
    ("coffee", include_str!("../scenarios/coffee.json")),
    ("door", include_str!("../scenarios/door.json")),
    ("box", include_str!("../scenarios/box.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDoc {
    pub name: String,
    pub pre: Vec<String>,
    pub add: Vec<String>,
    pub del: Vec<String>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateDoc {
    pub id: String,
    pub description: String,
    pub weight: f64,
    pub init: Vec<String>,
    pub actions: Vec<ActionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub id: String,
    pub description: String,
    pub init: Vec<String>,
    pub actions: Vec<ActionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrueModelDoc {
    /// Id of one of the candidate models.
    Reference(String),
    /// A model outside the candidate set.
    Model(ModelDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractDoc {
    #[serde(default, skip_serializing_if = "Option::is_none", with = "optional_cost")]
    pub cost_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthKind {
    Kernel,
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub name: String,
    pub narrative: String,
    pub facts: Vec<String>,
    pub goal: Vec<String>,
    pub models: Vec<CandidateDoc>,
    pub task_model: ModelDoc,
    #[serde(deserialize_with = "required_nullable")]
    pub true_model: Option<TrueModelDoc>,
    pub contract: ContractDoc,
    pub kernel: LikelihoodKernel,
    pub measure: TrustMeasureConfig,
    pub utilities: UtilityProfile,
    pub ground_truth: GroundTruthKind,
    pub rationality: RationalityParams,
}

// A plain `Option` field may be omitted; this one must be present, possibly as null.
fn required_nullable<'de, D, T>(deserializer: D) -> std::result::Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(deserializer)
}

mod optional_cost {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<f64>, serializer: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => crate::serde_cost::serialize(v, serializer),
            None => serializer.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrapper(#[serde(with = "crate::serde_cost")] f64);
        Ok(Some(Wrapper::deserialize(deserializer)?.0))
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub narrative: String,
    /// Candidate models with their (renormalized) prior.
    pub ensemble: ModelEnsemble,
    /// Console text per candidate, aligned with the ensemble.
    pub descriptions: Vec<String>,
    pub task_model: PlanningModel,
    pub true_model: Option<PlanningModel>,
    /// Candidate id the true model refers to, when it is one of them.
    pub true_model_ref: Option<String>,
    pub contract: Contract,
    pub kernel: LikelihoodKernel,
    pub measure: TrustMeasureConfig,
    pub utilities: UtilityProfile,
    pub ground_truth: GroundTruthSemantics,
    pub rationality: RationalityParams,
    /// Non-fatal findings, e.g. no candidate can meet the contract.
    pub warnings: Vec<String>,
    pub document: ScenarioDocument,
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let mut de = serde_json::Deserializer::from_str(text);
    let document: ScenarioDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::validation(if path.is_empty() { "$".to_string() } else { path }, e.inner().to_string())
    })?;
    de.end().map_err(|e| Error::validation("$", e.to_string()))?;
    Scenario::from_document(document)
}

/// One of the bundled fixtures, by name.
pub fn shipped_scenario(name: &str) -> Option<Result<Scenario>> {
    SHIPPED_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, text)| load_scenario(text))
}

fn check_atoms(facts: &BTreeSet<String>, atoms: &[String], path: &str) -> Result<()> {
    for (i, atom) in atoms.iter().enumerate() {
        if !facts.contains(atom) {
            return Err(Error::validation(format!("{path}[{i}]"), format!("unknown atom '{atom}'")));
        }
    }
    Ok(())
}

fn build_model(facts: &BTreeSet<String>, goal: &BTreeSet<String>, id: &str, init: &[String], actions: &[ActionDoc], path: &str) -> Result<PlanningModel> {
    if id.is_empty() {
        return Err(Error::validation(format!("{path}.id"), "model id must be nonempty"));
    }
    check_atoms(facts, init, &format!("{path}.init"))?;
    let mut built = Vec::with_capacity(actions.len());
    for (j, a) in actions.iter().enumerate() {
        let apath = format!("{path}.actions[{j}]");
        check_atoms(facts, &a.pre, &format!("{apath}.pre"))?;
        check_atoms(facts, &a.add, &format!("{apath}.add"))?;
        check_atoms(facts, &a.del, &format!("{apath}.del"))?;
        built.push(Action::new(a.name.clone(), a.pre.clone(), a.add.clone(), a.del.clone(), a.cost));
    }
    let model = PlanningModel {
        id: id.to_string(),
        facts: facts.clone(),
        init: init.iter().cloned().collect(),
        goal: goal.clone(),
        actions: built,
    };
    model.validate().map_err(|e| match e {
        Error::Validation { message, .. } => Error::validation(path, message),
        other => Error::validation(path, other.to_string()),
    })?;
    Ok(model)
}

impl Scenario {
    pub fn from_document(document: ScenarioDocument) -> Result<Scenario> {
        let doc = &document;
        if doc.name.trim().is_empty() {
            return Err(Error::validation("name", "scenario name must be nonempty"));
        }
        let facts: BTreeSet<String> = doc.facts.iter().cloned().collect();
        check_atoms(&facts, &doc.goal, "goal")?;
        let goal: BTreeSet<String> = doc.goal.iter().cloned().collect();

        if doc.models.is_empty() {
            return Err(Error::validation("models", "at least one candidate model is required"));
        }
        let mut ids = HashSet::new();
        let mut models = Vec::new();
        let mut weights = Vec::new();
        for (i, c) in doc.models.iter().enumerate() {
            let path = format!("models[{i}]");
            if !ids.insert(c.id.clone()) {
                return Err(Error::validation(format!("{path}.id"), format!("duplicate model id '{}'", c.id)));
            }
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return Err(Error::validation(format!("{path}.weight"), "weight must be nonnegative"));
            }
            models.push(build_model(&facts, &goal, &c.id, &c.init, &c.actions, &path)?);
            weights.push(c.weight);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > DOCUMENT_WEIGHT_TOLERANCE {
            return Err(Error::validation("models", format!("weights sum to {total}, expected 1")));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();

        let task = &doc.task_model;
        if !ids.insert(task.id.clone()) {
            return Err(Error::validation("task_model.id", format!("model id '{}' is already used", task.id)));
        }
        let task_model = build_model(&facts, &goal, &task.id, &task.init, &task.actions, "task_model")?;

        let (true_model, true_model_ref) = match &doc.true_model {
            None => (None, None),
            Some(TrueModelDoc::Reference(id)) => {
                let i = doc
                    .models
                    .iter()
                    .position(|m| &m.id == id)
                    .ok_or_else(|| Error::validation("true_model", format!("unknown model id '{id}'")))?;
                (Some(models[i].clone()), Some(id.clone()))
            }
            Some(TrueModelDoc::Model(m)) => {
                if !ids.insert(m.id.clone()) {
                    return Err(Error::validation("true_model.id", format!("model id '{}' is already used", m.id)));
                }
                (Some(build_model(&facts, &goal, &m.id, &m.init, &m.actions, "true_model")?), None)
            }
        };

        let contract = match (doc.contract.cost_bound, doc.contract.slack) {
            (Some(bound), None) => Contract::new(goal.clone(), bound).map_err(|e| Error::validation("contract.cost_bound", e.to_string()))?,
            (None, Some(slack)) => derive_contract(&task_model, slack).map_err(|e| Error::validation("contract.slack", e.to_string()))?,
            _ => return Err(Error::validation("contract", "exactly one of cost_bound or slack is required")),
        };

        doc.kernel.validate().map_err(|e| Error::validation("kernel", e.to_string()))?;
        doc.measure.validate().map_err(|e| Error::validation("measure", e.to_string()))?;
        doc.utilities.validate().map_err(|e| Error::validation("utilities", e.to_string()))?;
        doc.rationality.validate().map_err(|e| Error::validation("rationality", e.to_string()))?;

        let ground_truth = match doc.ground_truth {
            GroundTruthKind::Kernel => GroundTruthSemantics::Kernel { kernel: doc.kernel },
            GroundTruthKind::Indicator => GroundTruthSemantics::Indicator,
        };

        let ensemble = ModelEnsemble::new(models, weights)?;
        let mut warnings = Vec::new();
        let mut any_meets = false;
        for i in 0..ensemble.len() {
            if contract.is_met_by(&ensemble.optimal_plan(i)?) {
                any_meets = true;
            }
        }
        if !any_meets {
            let msg = format!("scenario '{}': no candidate model can meet the contract", doc.name);
            tracing::warn!("{msg}");
            warnings.push(msg);
        }

        Ok(Scenario {
            name: doc.name.clone(),
            narrative: doc.narrative.clone(),
            descriptions: doc.models.iter().map(|m| m.description.clone()).collect(),
            ensemble,
            task_model,
            true_model,
            true_model_ref,
            contract,
            kernel: doc.kernel,
            measure: doc.measure,
            utilities: doc.utilities,
            ground_truth,
            rationality: doc.rationality,
            warnings,
            document,
        })
    }

    /// Prior assessment of the contract.
    pub fn assess(&self) -> Result<TrustAssessment> {
        contract_probability(&self.ensemble, &self.contract, &self.kernel, &self.measure)
    }

    /// Probability that the agent's true model meets the contract.
    pub fn p_true(&self) -> Result<Option<f64>> {
        self.true_model
            .as_ref()
            .map(|m| ground_truth_probability(m, &self.contract, &self.ground_truth))
            .transpose()
    }

    /// Indices of candidates whose optimal plan meets the contract bound.
    pub fn contract_meeting_models(&self) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for i in 0..self.ensemble.len() {
            if self.contract.is_met_by(&self.ensemble.optimal_plan(i)?) {
                out.insert(i);
            }
        }
        Ok(out)
    }

    /// A noiseless synthetic supervisor holding this scenario's prior.
    pub fn human(&self, report_noise_sigma: f64, rng_seed: u64) -> SimulatedHuman {
        SimulatedHuman {
            ensemble: self.ensemble.clone(),
            contract: self.contract.clone(),
            kernel: self.kernel,
            rationality: self.rationality,
            measure: self.measure,
            report_noise_sigma,
            utilities: self.utilities,
            rng_seed,
            history_len: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coffee_doc() -> serde_json::Value {
        serde_json::from_str(SHIPPED_SCENARIOS[0].1).unwrap()
    }

    fn load_value(v: &serde_json::Value) -> Result<Scenario> {
        load_scenario(&v.to_string())
    }

    #[test]
    fn errors_carry_paths() {
        let mut v = coffee_doc();
        v["models"][2]["actions"][0]["pre"][0] = "teleporter".into();
        match load_value(&v) {
            Err(Error::Validation { path, message }) => {
                assert_eq!(path, "models[2].actions[0].pre[0]");
                assert!(message.contains("teleporter"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut v = coffee_doc();
        v["kernel"]["beta"] = "hot".into();
        match load_value(&v) {
            Err(Error::Validation { path, .. }) => assert!(path.starts_with("kernel"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weight_sum_is_checked() {
        let mut v = coffee_doc();
        v["models"][0]["weight"] = 0.2500001.into();
        assert!(load_value(&v).is_ok());
        v["models"][0]["weight"] = 0.26.into();
        assert!(matches!(load_value(&v), Err(Error::Validation { path, .. }) if path == "models"));
    }

    #[test]
    fn true_model_forms() {
        let mut v = coffee_doc();
        v["true_model"] = serde_json::Value::Null;
        let s = load_value(&v).unwrap();
        assert!(s.true_model.is_none());
        assert_eq!(s.p_true().unwrap(), None);

        v["true_model"] = "M9".into();
        assert!(matches!(load_value(&v), Err(Error::Validation { path, .. }) if path == "true_model"));

        let mut inline = v["task_model"].clone();
        inline["id"] = "actual".into();
        v["true_model"] = inline;
        let s = load_value(&v).unwrap();
        assert_eq!(s.true_model.unwrap().id, "actual");
        assert!(s.true_model_ref.is_none());
    }

    #[test]
    fn explicit_bound_and_contract_exclusivity() {
        let mut v = coffee_doc();
        v["contract"] = serde_json::json!({"cost_bound": 9.0});
        assert_eq!(load_value(&v).unwrap().contract.cost_bound, 9.0);
        v["contract"] = serde_json::json!({"cost_bound": "inf"});
        assert!(load_value(&v).unwrap().contract.cost_bound.is_infinite());
        v["contract"] = serde_json::json!({"cost_bound": 9.0, "slack": 0.5});
        assert!(load_value(&v).is_err());
        v["contract"] = serde_json::json!({});
        assert!(load_value(&v).is_err());
    }

    #[test]
    fn infeasible_contract_warns() {
        let mut v = coffee_doc();
        v["contract"] = serde_json::json!({"cost_bound": 1.0});
        let s = load_value(&v).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(load_value(&coffee_doc()).unwrap().warnings.is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut v = coffee_doc();
        v["task_model"]["id"] = "M1".into();
        assert!(matches!(load_value(&v), Err(Error::Validation { path, .. }) if path == "task_model.id"));
        let mut v = coffee_doc();
        v["models"][1]["id"] = "M1".into();
        assert!(load_value(&v).is_err());
    }

    #[test]
    fn document_round_trips() {
        let s = load_value(&coffee_doc()).unwrap();
        let text = serde_json::to_string(&s.document).unwrap();
        let again = load_scenario(&text).unwrap();
        assert_eq!(again.document, s.document);
    }
}
