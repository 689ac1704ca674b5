//! Command-line surface.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mmtrust_core::belief::posterior_update;
use mmtrust_core::reliance::{calibration_report, reliance_decision, select_explanation, DEFAULT_EPSILON};
use mmtrust_core::session::{read_log, replay};
use mmtrust_core::study::{load_study_config, records_to_csv, run_study, shipped_study, StudyConfig};
use mmtrust_core::trust::contract_probability;
use mmtrust_core::{Observation, Scenario};
use serde_json::json;

use crate::service::{resolve_scenario, router, AppState};

#[derive(Debug, Parser)]
#[command(name = "mmtrust", version, about = "Trust inference over an observer's mental models of an agent")]
pub struct Cli {
    /// Scenario document path, or the name of a shipped fixture (coffee, door, box).
    #[arg(long, global = true, default_value = "coffee")]
    pub scenario: String,
    /// Overrides the study seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal plan of every candidate model (and the task model).
    Plan,
    /// Contract probability and trust under the scenario prior.
    Trust(Evidence),
    /// Posterior weights after each observation.
    Update(Evidence),
    /// Accept/reject decision after the observations.
    Rely(Evidence),
    /// Calibration of the observer against the agent's true model.
    Calibrate(Evidence),
    /// Pick the explanation that best calibrates the observer.
    ExplainSelect {
        #[command(flatten)]
        evidence: Evidence,
        /// JSON array of candidate explanations; defaults to every
        /// single-model elimination.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Run an in-silico update study.
    Study {
        /// Study configuration path or shipped name; defaults to the
        /// configuration shipped for --scenario.
        #[arg(long)]
        config: Option<String>,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value_t = 8473)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Directory holding one append-only log per session.
        #[arg(long, default_value = "mmtrust-sessions")]
        data_dir: PathBuf,
        /// Static bundle served at the root (the study console).
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Rebuild a session from its log and print the final state.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Evidence {
    /// JSON array of observations applied in order.
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Comma-separated model ids, one elimination per flag.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Append)]
    pub eliminate: Vec<String>,
    /// Override the prior weights (comma-separated, in model order).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

impl Evidence {
    fn observations(&self) -> Result<Vec<Observation>> {
        let mut out = match &self.observations {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Vec::new(),
        };
        if !self.eliminate.is_empty() {
            out.push(Observation::eliminate(self.eliminate.iter().cloned()));
        }
        Ok(out)
    }
}

struct Output {
    json: serde_json::Value,
    text: String,
    csv: Option<String>,
}

fn emit(cli: &Cli, out: Output) -> Result<()> {
    let rendered = match cli.format {
        Format::Json => serde_json::to_string_pretty(&out.json)? + "\n",
        Format::Text => out.text,
        Format::Csv => match out.csv {
            Some(csv) => csv,
            None => bail!("csv output is only available for the study command"),
        },
    };
    match &cli.out {
        Some(path) => std::fs::write(path, rendered).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(rendered.as_bytes())?,
    }
    Ok(())
}

fn prior(scenario: &Scenario, evidence: &Evidence) -> Result<mmtrust_core::ModelEnsemble> {
    Ok(match &evidence.weights {
        Some(w) => scenario.ensemble.with_weights(w.clone())?,
        None => scenario.ensemble.clone(),
    })
}

/// Prior followed by the posterior after each observation.
fn trajectory(scenario: &Scenario, evidence: &Evidence) -> Result<Vec<mmtrust_core::ModelEnsemble>> {
    let mut steps = vec![prior(scenario, evidence)?];
    for (i, obs) in evidence.observations()?.iter().enumerate() {
        let next = posterior_update(steps.last().expect("prior"), obs, &scenario.rationality, &scenario.kernel)
            .with_context(|| format!("observation {i}"))?;
        steps.push(next);
    }
    Ok(steps)
}

fn fmt_weights(ids: &[String], w: &[f64]) -> String {
    ids.iter().zip(w).map(|(id, w)| format!("{id}={w:.6}")).collect::<Vec<_>>().join(" ")
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Serve {
            port,
            bind,
            data_dir,
            static_dir,
        } => return serve(bind, *port, data_dir.clone(), static_dir.clone()),
        Command::Replay { log } => {
            let session = replay(&read_log(log)?)?;
            let state = session.state();
            let text = format!(
                "session {} ({}): {} observations, p_contract {:.6}\n",
                state.session_id,
                state.scenario_name,
                state.observations.len(),
                state.assessment.p_contract
            );
            return emit(
                &cli,
                Output {
                    json: serde_json::to_value(state)?,
                    text,
                    csv: None,
                },
            );
        }
        _ => {}
    }

    let scenario = resolve_scenario(&cli.scenario).with_context(|| format!("loading scenario '{}'", cli.scenario))?;
    for warning in &scenario.warnings {
        tracing::warn!("{warning}");
    }
    let ids: Vec<String> = scenario.ensemble.ids().map(String::from).collect();

    let output = match &cli.command {
        Command::Plan => {
            let mut rows = Vec::new();
            let mut text = String::new();
            let task = mmtrust_core::optimal_plan(&scenario.task_model)?;
            for (i, id) in ids.iter().enumerate() {
                let plan = scenario.ensemble.optimal_plan(i)?;
                text += &format!("{id}: cost {} plan [{}]\n", plan.cost, plan.plan.join(", "));
                rows.push(json!({ "model": id, "plan": plan }));
            }
            text += &format!("{} (task): cost {} plan [{}]\n", scenario.task_model.id, task.cost, task.plan.join(", "));
            Output {
                json: json!({ "models": rows, "task_model": { "model": scenario.task_model.id, "plan": task } }),
                text,
                csv: None,
            }
        }
        Command::Trust(evidence) => {
            let e = trajectory(&scenario, evidence)?.pop().expect("prior");
            let a = contract_probability(&e, &scenario.contract, &scenario.kernel, &scenario.measure)?;
            let text = format!(
                "p_contract {:.6} trust {:.6}\nper model: {}\n",
                a.p_contract,
                a.trust,
                fmt_weights(&ids, &a.per_model)
            );
            Output {
                json: json!({ "contract": scenario.contract, "weights": e.weights(), "assessment": a }),
                text,
                csv: None,
            }
        }
        Command::Update(evidence) => {
            let steps = trajectory(&scenario, evidence)?;
            let mut rows = Vec::new();
            let mut text = String::new();
            for (i, e) in steps.iter().enumerate() {
                let a = contract_probability(e, &scenario.contract, &scenario.kernel, &scenario.measure)?;
                text += &format!("step {i}: {} p_contract {:.6}\n", fmt_weights(&ids, e.weights()), a.p_contract);
                rows.push(json!({ "step": i, "weights": e.weights(), "p_contract": a.p_contract, "trust": a.trust }));
            }
            Output {
                json: json!({ "models": ids, "steps": rows }),
                text,
                csv: None,
            }
        }
        Command::Rely(evidence) => {
            let e = trajectory(&scenario, evidence)?.pop().expect("prior");
            let a = contract_probability(&e, &scenario.contract, &scenario.kernel, &scenario.measure)?;
            let d = reliance_decision(a.p_contract, &scenario.utilities);
            let text = format!(
                "p_contract {:.6} V(accept) {:.6} V(reject) {:.6} threshold {:.6} -> {:?}\n",
                a.p_contract, d.v_accept, d.v_reject, d.threshold, d.decision
            );
            Output {
                json: json!({ "p_contract": a.p_contract, "utilities": scenario.utilities, "reliance": d }),
                text,
                csv: None,
            }
        }
        Command::Calibrate(evidence) => {
            let Some(p_true) = scenario.p_true()? else {
                bail!("scenario '{}' has no true model", scenario.name);
            };
            let e = trajectory(&scenario, evidence)?.pop().expect("prior");
            let a = contract_probability(&e, &scenario.contract, &scenario.kernel, &scenario.measure)?;
            let r = calibration_report(a.p_contract, p_true, DEFAULT_EPSILON);
            let text = format!(
                "p_human {:.6} p_true {:.6} gap {:+.6} -> {:?}\n",
                r.p_human, r.p_true, r.gap, r.classification
            );
            Output {
                json: serde_json::to_value(r)?,
                text,
                csv: None,
            }
        }
        Command::ExplainSelect {
            evidence,
            candidates,
            epsilon,
        } => {
            let Some(p_true) = scenario.p_true()? else {
                bail!("scenario '{}' has no true model", scenario.name);
            };
            let e = trajectory(&scenario, evidence)?.pop().expect("prior");
            let candidates: Vec<Observation> = match candidates {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => ids.iter().map(|id| Observation::eliminate([id.clone()])).collect(),
            };
            let choice = select_explanation(&e, &candidates, &scenario.contract, &scenario.kernel, p_true, *epsilon)?;
            let text = match choice.chosen {
                Some(i) => format!(
                    "choose candidate {i}: {} -> p_human {:.6} gap {:+.6}\n",
                    serde_json::to_string(&candidates[i])?,
                    choice.projected.p_human,
                    choice.projected.gap
                ),
                None => format!("no candidate improves calibration (gap {:+.6})\n", choice.projected.gap),
            };
            Output {
                json: json!({ "candidates": candidates, "choice": choice }),
                text,
                csv: None,
            }
        }
        Command::Study { config } => {
            let mut study = load_study(config.as_deref().unwrap_or(&cli.scenario))?;
            if let Some(seed) = cli.seed {
                study.seed = seed;
            }
            let study_scenario = if config.is_some() { resolve_scenario(&study.scenario)? } else { scenario };
            let outcome = run_study(&study, &study_scenario)?;
            let csv = records_to_csv(&outcome.records)?;
            if let Some(path) = &study.output {
                std::fs::write(path, &csv).with_context(|| format!("writing {path}"))?;
            }
            let mut text = String::new();
            for g in &outcome.summary.groups {
                text += &format!(
                    "{:?}: n {} increased {} decreased {} unchanged {} mean delta {:+.6}\n",
                    g.group, g.n, g.increased, g.decreased, g.unchanged, g.mean_delta
                );
            }
            for h in [&outcome.summary.h1, &outcome.summary.h2, &outcome.summary.h3] {
                text += &match h.test_result() {
                    Some(r) => format!("{}: t {:.4} df {:.2} p {:.3e}\n", h.id, r.t, r.df, r.p_value),
                    None => format!("{}: not applicable\n", h.id),
                };
            }
            Output {
                json: serde_json::to_value(&outcome.summary)?,
                text,
                csv: Some(csv),
            }
        }
        Command::Serve { .. } | Command::Replay { .. } => unreachable!("handled above"),
    };
    emit(&cli, output)
}

fn load_study(spec: &str) -> Result<StudyConfig> {
    if let Some(found) = shipped_study(spec) {
        return Ok(found?);
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading study config {spec}"))?;
    Ok(load_study_config(&text)?)
}

fn serve(bind: &str, port: u16, data_dir: PathBuf, static_dir: Option<PathBuf>) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let state = AppState::with_data_dir(&data_dir)?;
        tracing::info!(sessions = state.session_count(), dir = %data_dir.display(), "session store ready");
        let app = router(Arc::new(state), static_dir);
        let addr: SocketAddr = format!("{bind}:{port}").parse().context("invalid bind address")?;
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, "listening");
        axum::serve(listener, app).await?;
        Ok(())
    })
}
