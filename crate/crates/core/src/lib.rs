//! Trust inference grounded in the observer's mental models of an agent.
//!
//! A human supervisor holds a weighted set of candidate task models for an
//! agent. Each model is a grounded planning problem whose optimal plan cost
//! determines how likely that model is to satisfy a contract (reach the goal
//! within a cost bound). The weighted mixture of those likelihoods is the
//! supervisor's belief that the contract will be met; trust is a monotone
//! transform of that belief.
//!
//! Modules, bottom-up:
//!
//! - [`planning`]: grounded STRIPS models, uniform-cost search, trace replay.
//! - [`trust`]: likelihood kernels, ensembles, contract probability and trust.
//! - [`belief`]: Bayesian reweighting from behavior, explanations and outcomes.
//! - [`reliance`]: accept/reject decisions, ground truth and calibration.
//! - [`human`]: seeded synthetic supervisors and cohorts.
//! - [`stats`]: Student-t machinery, Welch and paired t-tests.
//! - [`study`]: positive/negative update experiments and their CSV output.
//! - [`scenario`]: JSON scenario documents and the shipped fixtures.
//! - [`session`]: interactive sessions as append-only observation logs.

pub mod belief;
pub mod error;
pub mod human;
pub mod planning;
pub mod reliance;
pub mod scenario;
mod serde_cost;
pub mod session;
pub mod stats;
pub mod study;
pub mod trust;

pub use belief::{observation_likelihood, posterior_update, Observation, RationalityParams};
pub use error::{Error, Result};
pub use human::{report_trust, sample_cohort, step, CohortConfig, SimulatedHuman, TrustReport};
pub use planning::{evaluate_trace, optimal_plan, Action, PlanResult, PlanStatus, Planner, PlanningModel, TraceEvaluation};
pub use reliance::{
    calibration_report, ground_truth_probability, reliance_decision, select_explanation, CalibrationReport,
    Classification, Decision, ExplanationChoice, GroundTruthSemantics, RelianceDecision, UtilityProfile,
};
pub use scenario::{load_scenario, Scenario};
pub use session::{replay, session_step, LogEntry, MuirResponses, Session, SessionRequest, SessionResponse, SessionState};
pub use stats::{paired_t, welch_t, Alternative, TestResult};
pub use study::{run_study, StudyConfig, SubjectRecord};
pub use trust::{
    contract_probability, derive_contract, kernel_probability, trust_measure, Contract, LikelihoodKernel,
    ModelEnsemble, TrustAssessment, TrustMeasureConfig,
};
