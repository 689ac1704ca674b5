//! Positive/negative belief-update experiments over simulated cohorts.
//!
//! Each subject reports trust, reads its group's elimination messages in
//! order, then reports again. Positive-group messages keep every model that
//! can meet the contract; negative-group messages rule all of them out. The
//! summary tests whether the two groups change differently (two-tailed
//! Welch), whether the positive group increases (one-tailed paired) and
//! whether the negative group decreases (one-tailed paired).

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::Observation;
use crate::error::{Error, Result};
use crate::human::{report_trust, sample_cohort, step, CohortConfig};
use crate::scenario::Scenario;
use crate::stats::{paired_t, welch_t, Alternative, TestResult};

/// Significance level used for the summary flags.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

pub const CSV_HEADER: [&str; 7] = ["subject_id", "group", "trust_before", "trust_after", "delta", "p_before", "p_after"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Positive,
    Negative,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Positive => "positive",
            Group::Negative => "negative",
        }
    }
}

/// Cohort parameters of one study arm; the seed is derived from the study seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub n: usize,
    pub beta_log_mean: f64,
    pub beta_log_sd: f64,
    pub concentration: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub group: Group,
    pub cohort: CohortSpec,
    pub messages: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Path to a scenario document or the name of a shipped fixture.
    pub scenario: String,
    pub seed: u64,
    pub groups: Vec<GroupConfig>,
    #[serde(default)]
    pub output: Option<String>,
}

impl StudyConfig {
    pub fn group(&self, group: Group) -> Option<&GroupConfig> {
        self.groups.iter().find(|g| g.group == group)
    }

    /// Checks structure and the message design against the scenario.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        for group in [Group::Positive, Group::Negative] {
            let count = self.groups.iter().filter(|g| g.group == group).count();
            if count != 1 {
                return Err(Error::validation("groups", format!("expected exactly one {} group, found {count}", group.as_str())));
            }
        }
        let meeting = scenario.contract_meeting_models()?;
        let meeting_ids: Vec<&str> = meeting.iter().map(|&i| scenario.ensemble.models()[i].id.as_str()).collect();
        for (g, config) in self.groups.iter().enumerate() {
            let path = format!("groups[{g}]");
            if config.cohort.n == 0 {
                return Err(Error::validation(format!("{path}.cohort.n"), "cohort must have at least one member"));
            }
            if !config.messages.is_empty() && meeting_ids.is_empty() {
                return Err(Error::validation(path, "no candidate model meets the contract, so update groups are undefined"));
            }
            for (m, message) in config.messages.iter().enumerate() {
                let mpath = format!("{path}.messages[{m}]");
                let Observation::Explanation { eliminate } = message else {
                    return Err(Error::validation(mpath, "study messages must be explanations"));
                };
                message.validate_for(&scenario.ensemble).map_err(|e| Error::validation(&mpath, e.to_string()))?;
                match config.group {
                    Group::Positive => {
                        if let Some(id) = meeting_ids.iter().find(|id| eliminate.contains(**id)) {
                            return Err(Error::validation(mpath, format!("positive message eliminates '{id}', which meets the contract")));
                        }
                    }
                    Group::Negative => {
                        if let Some(id) = meeting_ids.iter().find(|id| !eliminate.contains(**id)) {
                            return Err(Error::validation(mpath, format!("negative message keeps '{id}', which meets the contract")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Study configurations bundled with the crate, by scenario name.
pub const SHIPPED_STUDIES: &[(&str, &str)] = &[
    ("coffee", include_str!("../studies/coffee.json")),
    ("door", include_str!("../studies/door.json")),
    ("box", include_str!("../studies/box.json")),
];

/// Parses a study configuration, reporting the JSON path of any error.
pub fn load_study_config(text: &str) -> Result<StudyConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::validation(if path.is_empty() { "$".to_string() } else { path }, e.inner().to_string())
    })
}

pub fn shipped_study(name: &str) -> Option<Result<StudyConfig>> {
    SHIPPED_STUDIES.iter().find(|(n, _)| *n == name).map(|(_, text)| load_study_config(text))
}

/// Before/after measurements of one subject, at 6-decimal resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: u32,
    pub group: Group,
    pub trust_before: f64,
    pub trust_after: f64,
    pub delta: f64,
    pub p_before: f64,
    pub p_after: f64,
}

fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl SubjectRecord {
    pub fn new(subject_id: u32, group: Group, trust_before: f64, trust_after: f64, p_before: f64, p_after: f64) -> Self {
        let trust_before = quantize(trust_before);
        let trust_after = quantize(trust_after);
        SubjectRecord {
            subject_id,
            group,
            trust_before,
            trust_after,
            delta: quantize(trust_after - trust_before),
            p_before: quantize(p_before),
            p_after: quantize(p_after),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: Group,
    pub n: usize,
    pub increased: usize,
    pub decreased: usize,
    pub unchanged: usize,
    pub mean_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HypothesisOutcome {
    Tested { result: TestResult, significant: bool },
    NotApplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub id: String,
    pub statement: String,
    pub outcome: HypothesisOutcome,
}

impl HypothesisResult {
    fn from_test(id: &str, statement: &str, test: Result<TestResult>) -> Result<Self> {
        let outcome = match test {
            Ok(result) => HypothesisOutcome::Tested {
                significant: result.p_value < SIGNIFICANCE_LEVEL,
                result,
            },
            Err(Error::DegenerateTest(reason)) => HypothesisOutcome::NotApplicable { reason },
            Err(e) => return Err(e),
        };
        Ok(HypothesisResult {
            id: id.into(),
            statement: statement.into(),
            outcome,
        })
    }

    pub fn test_result(&self) -> Option<&TestResult> {
        match &self.outcome {
            HypothesisOutcome::Tested { result, .. } => Some(result),
            HypothesisOutcome::NotApplicable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub groups: Vec<GroupSummary>,
    pub h1: HypothesisResult,
    pub h2: HypothesisResult,
    pub h3: HypothesisResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub records: Vec<SubjectRecord>,
    pub summary: StudySummary,
}

/// Runs every subject of every group and analyses the trust changes.
pub fn run_study(config: &StudyConfig, scenario: &Scenario) -> Result<StudyOutcome> {
    config.validate(scenario)?;
    let template = scenario.human(0.0, 0);
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();
    let mut next_id = 1u32;
    for group_config in &config.groups {
        let spec = group_config.cohort;
        let cohort = sample_cohort(
            &template,
            &CohortConfig {
                n: spec.n,
                beta_log_mean: spec.beta_log_mean,
                beta_log_sd: spec.beta_log_sd,
                concentration: spec.concentration,
                noise_sigma: spec.noise_sigma,
                seed: seeds.next_u64(),
            },
        )?;
        for human in cohort {
            let subject_id = next_id;
            next_id += 1;
            let before = report_trust(&human)?;
            let mut current = human;
            let mut after = before;
            for (message_index, message) in group_config.messages.iter().enumerate() {
                let (next, _, report) = step(&current, message).map_err(|source| Error::StudyAborted {
                    subject_id,
                    message_index,
                    source: Box::new(source),
                })?;
                current = next;
                after = report;
            }
            records.push(SubjectRecord::new(subject_id, group_config.group, before.value, after.value, before.p_contract, after.p_contract));
        }
    }
    let summary = summarize(&records)?;
    Ok(StudyOutcome { records, summary })
}

fn summarize(records: &[SubjectRecord]) -> Result<StudySummary> {
    let of = |g: Group| records.iter().filter(move |r| r.group == g);
    let groups = [Group::Positive, Group::Negative]
        .into_iter()
        .map(|g| {
            let deltas: Vec<f64> = of(g).map(|r| r.delta).collect();
            GroupSummary {
                group: g,
                n: deltas.len(),
                increased: deltas.iter().filter(|d| **d > 0.0).count(),
                decreased: deltas.iter().filter(|d| **d < 0.0).count(),
                unchanged: deltas.iter().filter(|d| **d == 0.0).count(),
                mean_delta: if deltas.is_empty() { 0.0 } else { deltas.iter().sum::<f64>() / deltas.len() as f64 },
            }
        })
        .collect();

    let pos_delta: Vec<f64> = of(Group::Positive).map(|r| r.delta).collect();
    let neg_delta: Vec<f64> = of(Group::Negative).map(|r| r.delta).collect();
    let pos_before: Vec<f64> = of(Group::Positive).map(|r| r.trust_before).collect();
    let pos_after: Vec<f64> = of(Group::Positive).map(|r| r.trust_after).collect();
    let neg_before: Vec<f64> = of(Group::Negative).map(|r| r.trust_before).collect();
    let neg_after: Vec<f64> = of(Group::Negative).map(|r| r.trust_after).collect();

    Ok(StudySummary {
        groups,
        h1: HypothesisResult::from_test(
            "H1",
            "trust changes differ between the positive and negative update groups (two-tailed Welch)",
            welch_t(&pos_delta, &neg_delta, Alternative::TwoSided),
        )?,
        h2: HypothesisResult::from_test(
            "H2",
            "the positive update group reports higher trust after the update (one-tailed paired)",
            paired_t(&pos_before, &pos_after, Alternative::Greater),
        )?,
        h3: HypothesisResult::from_test(
            "H3",
            "the negative update group reports lower trust after the update (one-tailed paired)",
            paired_t(&neg_before, &neg_after, Alternative::Less),
        )?,
    })
}

/// Serializes records with the fixed header and six fractional digits.
pub fn records_to_csv(records: &[SubjectRecord]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    writer.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        writer
            .write_record([
                r.subject_id.to_string(),
                r.group.as_str().to_string(),
                format!("{:.6}", r.trust_before),
                format!("{:.6}", r.trust_after),
                format!("{:.6}", r.delta),
                format!("{:.6}", r.p_before),
                format!("{:.6}", r.p_after),
            ])
            .map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn parse_records_csv(text: &str) -> Result<Vec<SubjectRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")));
    reader
        .records()
        .map(|row| {
            let row = row.map_err(|e| Error::Parse(e.to_string()))?;
            let group = match &row[1] {
                "positive" => Group::Positive,
                "negative" => Group::Negative,
                other => return Err(Error::Parse(format!("unknown group '{other}'"))),
            };
            Ok(SubjectRecord {
                subject_id: row[0].parse().map_err(|e| Error::Parse(format!("subject_id: {e}")))?,
                group,
                trust_before: num(&row[2])?,
                trust_after: num(&row[3])?,
                delta: num(&row[4])?,
                p_before: num(&row[5])?,
                p_after: num(&row[6])?,
            })
        })
        .collect()
}

pub fn write_records_csv(path: &Path, records: &[SubjectRecord]) -> Result<()> {
    std::fs::write(path, records_to_csv(records)?)?;
    Ok(())
}
