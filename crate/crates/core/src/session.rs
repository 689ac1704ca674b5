//! Interactive trust sessions backed by an append-only log.
//!
//! A session starts from a scenario prior. Every committed request is one
//! [`LogEntry`]; the session state is, by construction, the fold of its log
//! over the prior, so persisting the log is enough to reconstruct a session
//! bit-for-bit. What-if requests and reads never produce log entries.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::{posterior_update, Observation};
use crate::error::{Error, Result};
use crate::human::REPORT_SCALE;
use crate::reliance::{calibration_report, reliance_decision, CalibrationReport, Decision, RelianceDecision, DEFAULT_EPSILON};
use crate::scenario::{Scenario, ScenarioDocument};
use crate::trust::{contract_probability, ModelEnsemble, TrustAssessment};

/// Five-component self-report, each on a 0–10 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuirResponses {
    pub competence: f64,
    pub predictability: f64,
    pub reliability: f64,
    pub faith: f64,
    pub overall: f64,
}

impl MuirResponses {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.components() {
            if !(0.0..=REPORT_SCALE).contains(&v) {
                return Err(Error::validation(name, format!("response must be within [0, {REPORT_SCALE}], got {v}")));
            }
        }
        Ok(())
    }

    pub fn components(&self) -> [(&'static str, f64); 5] {
        [
            ("competence", self.competence),
            ("predictability", self.predictability),
            ("reliability", self.reliability),
            ("faith", self.faith),
            ("overall", self.overall),
        ]
    }

    /// Total trust: the mean of the five components.
    pub fn mean(&self) -> f64 {
        (self.competence + self.predictability + self.reliability + self.faith + self.overall) / 5.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    /// Number of observations committed before this report.
    pub after_observations: usize,
    pub responses: MuirResponses,
    pub reported_mean: f64,
    /// Engine trust on the report scale.
    pub predicted_trust: f64,
    pub p_contract: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEntry {
    pub after_observations: usize,
    pub choice: Decision,
    pub recommended: Decision,
    pub agrees: bool,
    pub p_contract: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub scenario_name: String,
    pub model_ids: Vec<String>,
    pub weights: Vec<f64>,
    pub assessment: TrustAssessment,
    pub reliance: RelianceDecision,
    pub calibration: Option<CalibrationReport>,
    pub observations: Vec<Observation>,
    pub reports: Vec<ReportEntry>,
    pub decisions: Vec<DecisionEntry>,
}

/// Outcome of a hypothetical observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub weights: Vec<f64>,
    pub assessment: TrustAssessment,
    pub reliance: RelianceDecision,
    pub calibration: Option<CalibrationReport>,
}

/// One committed mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Open {
        session_id: String,
        scenario: Box<ScenarioDocument>,
    },
    Observe {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action_id: Option<String>,
        observation: Observation,
    },
    Report {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action_id: Option<String>,
        responses: MuirResponses,
    },
    Decision {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action_id: Option<String>,
        choice: Decision,
    },
}

impl LogEntry {
    fn action_id(&self) -> Option<&str> {
        match self {
            LogEntry::Open { .. } => None,
            LogEntry::Observe { action_id, .. } | LogEntry::Report { action_id, .. } | LogEntry::Decision { action_id, .. } => action_id.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionRequest {
    Observe { observation: Observation, action_id: Option<String> },
    WhatIf { observation: Observation },
    Report { responses: MuirResponses, action_id: Option<String> },
    Decide { choice: Decision, action_id: Option<String> },
    Read,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SessionResponse {
    State(SessionState),
    Projection(Projection),
    Report { entry: ReportEntry, state: SessionState },
}

#[derive(Debug, Clone)]
pub struct Session {
    scenario: Arc<Scenario>,
    ensemble: ModelEnsemble,
    p_true: Option<f64>,
    action_ids: HashSet<String>,
    state: SessionState,
}

struct Evaluation {
    assessment: TrustAssessment,
    reliance: RelianceDecision,
    calibration: Option<CalibrationReport>,
}

impl Session {
    pub fn open(session_id: impl Into<String>, scenario: Arc<Scenario>) -> Result<Session> {
        let ensemble = scenario.ensemble.clone();
        let p_true = scenario.p_true()?;
        let eval = evaluate(&scenario, &ensemble, p_true)?;
        let state = SessionState {
            session_id: session_id.into(),
            scenario_name: scenario.name.clone(),
            model_ids: ensemble.ids().map(String::from).collect(),
            weights: ensemble.weights().to_vec(),
            assessment: eval.assessment,
            reliance: eval.reliance,
            calibration: eval.calibration,
            observations: Vec::new(),
            reports: Vec::new(),
            decisions: Vec::new(),
        };
        Ok(Session {
            scenario,
            ensemble,
            p_true,
            action_ids: HashSet::new(),
            state,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    /// The entry that opens this session's log.
    pub fn open_entry(&self) -> LogEntry {
        LogEntry::Open {
            session_id: self.state.session_id.clone(),
            scenario: Box::new(self.scenario.document.clone()),
        }
    }

    /// Applies one committed log entry, returning the new session.
    pub fn apply(&self, entry: &LogEntry) -> Result<Session> {
        let mut next = self.clone();
        match entry {
            LogEntry::Open { .. } => return Err(Error::validation("log", "open entry inside a session log")),
            LogEntry::Observe { observation, .. } => {
                let ensemble = posterior_update(&self.ensemble, observation, &self.scenario.rationality, &self.scenario.kernel)?;
                let eval = evaluate(&self.scenario, &ensemble, self.p_true)?;
                next.state.weights = ensemble.weights().to_vec();
                next.state.assessment = eval.assessment;
                next.state.reliance = eval.reliance;
                next.state.calibration = eval.calibration;
                next.state.observations.push(observation.clone());
                next.ensemble = ensemble;
            }
            LogEntry::Report { responses, .. } => {
                responses.validate()?;
                next.state.reports.push(ReportEntry {
                    after_observations: self.state.observations.len(),
                    responses: *responses,
                    reported_mean: responses.mean(),
                    predicted_trust: (REPORT_SCALE * self.state.assessment.trust).clamp(0.0, REPORT_SCALE),
                    p_contract: self.state.assessment.p_contract,
                });
            }
            LogEntry::Decision { choice, .. } => {
                let recommended = self.state.reliance.decision;
                next.state.decisions.push(DecisionEntry {
                    after_observations: self.state.observations.len(),
                    choice: *choice,
                    recommended,
                    agrees: *choice == recommended,
                    p_contract: self.state.assessment.p_contract,
                });
            }
        }
        if let Some(id) = entry.action_id() {
            next.action_ids.insert(id.to_string());
        }
        Ok(next)
    }

    fn already_applied(&self, action_id: &Option<String>) -> bool {
        action_id.as_ref().is_some_and(|id| self.action_ids.contains(id))
    }
}

fn evaluate(scenario: &Scenario, ensemble: &ModelEnsemble, p_true: Option<f64>) -> Result<Evaluation> {
    let assessment = contract_probability(ensemble, &scenario.contract, &scenario.kernel, &scenario.measure)?;
    let reliance = reliance_decision(assessment.p_contract, &scenario.utilities);
    let calibration = p_true.map(|p| calibration_report(assessment.p_contract, p, DEFAULT_EPSILON));
    Ok(Evaluation {
        assessment,
        reliance,
        calibration,
    })
}

/// Handles one request. Returns the (possibly unchanged) session, the
/// response document and the log entry to persist when something was
/// committed. A repeated `action_id` is acknowledged without re-applying.
pub fn session_step(session: &Session, request: SessionRequest) -> Result<(Session, SessionResponse, Option<LogEntry>)> {
    let entry = match request {
        SessionRequest::Read => return Ok((session.clone(), SessionResponse::State(session.state.clone()), None)),
        SessionRequest::WhatIf { observation } => {
            let ensemble = posterior_update(&session.ensemble, &observation, &session.scenario.rationality, &session.scenario.kernel)?;
            let eval = evaluate(&session.scenario, &ensemble, session.p_true)?;
            let projection = Projection {
                weights: ensemble.weights().to_vec(),
                assessment: eval.assessment,
                reliance: eval.reliance,
                calibration: eval.calibration,
            };
            return Ok((session.clone(), SessionResponse::Projection(projection), None));
        }
        SessionRequest::Observe { observation, action_id } => LogEntry::Observe { action_id, observation },
        SessionRequest::Report { responses, action_id } => LogEntry::Report { action_id, responses },
        SessionRequest::Decide { choice, action_id } => LogEntry::Decision { action_id, choice },
    };
    let is_report = matches!(entry, LogEntry::Report { .. });
    let (next, committed) = if session.already_applied(&entry.action_id().map(String::from)) {
        (session.clone(), None)
    } else {
        (session.apply(&entry)?, Some(entry))
    };
    let response = match (is_report, next.state.reports.last()) {
        (true, Some(last)) => SessionResponse::Report {
            entry: last.clone(),
            state: next.state.clone(),
        },
        _ => SessionResponse::State(next.state.clone()),
    };
    Ok((next, response, committed))
}

/// Rebuilds a session from its complete log.
pub fn replay(entries: &[LogEntry]) -> Result<Session> {
    let Some((LogEntry::Open { session_id, scenario }, rest)) = entries.split_first() else {
        return Err(Error::validation("log[0]", "a session log must start with an open entry"));
    };
    let scenario = Scenario::from_document((**scenario).clone())?;
    let mut session = Session::open(session_id.clone(), Arc::new(scenario))?;
    for (i, entry) in rest.iter().enumerate() {
        session = session.apply(entry).map_err(|e| match e {
            Error::Contradiction => Error::validation(format!("log[{}]", i + 1), "observation contradicts every model"),
            other => other,
        })?;
    }
    Ok(session)
}

pub fn append_log(path: &Path, entry: &LogEntry) -> Result<()> {
    let mut line = serde_json::to_string(entry).map_err(|e| Error::Io(e.to_string()))?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(line.as_bytes())?;
    file.sync_data()?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>> {
    let file = std::fs::File::open(path)?;
    BufReader::new(file)
        .lines()
        .enumerate()
        .filter(|(_, line)| line.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, line)| {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
