#![allow(dead_code)]

use std::collections::BTreeSet;

use mmtrust_core::planning::{Action, PlanningModel};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn atom(i: usize) -> String {
    format!("f{i}")
}

fn subset<R: Rng>(rng: &mut R, n: usize, p: f64) -> BTreeSet<String> {
    (0..n).filter(|_| rng.random_bool(p)).map(atom).collect()
}

/// Random grounded model with at most `max_facts` facts and `max_actions`
/// actions. Costs are small integers so optimal costs compare exactly.
pub fn random_model<R: Rng>(rng: &mut R, id: &str, max_facts: usize, max_actions: usize) -> PlanningModel {
    let n_facts = rng.random_range(1..=max_facts);
    let n_actions = rng.random_range(0..=max_actions);
    let actions = (0..n_actions)
        .map(|i| {
            let pre = subset(rng, n_facts, 0.2);
            let add = subset(rng, n_facts, 0.25);
            let del: BTreeSet<String> = subset(rng, n_facts, 0.15).difference(&add).cloned().collect();
            Action::new(format!("a{i}"), pre, add, del, rng.random_range(1..=5) as f64)
        })
        .collect();
    let init = subset(rng, n_facts, 0.4);
    let mut goal: BTreeSet<String> = subset(rng, n_facts, 0.25).difference(&init).cloned().collect();
    if goal.is_empty() {
        goal.insert(atom(rng.random_range(0..n_facts)));
    }
    PlanningModel {
        id: id.to_string(),
        facts: (0..n_facts).map(atom).collect(),
        init,
        goal,
        actions,
    }
}

/// Random model over a fixed fact set and goal, for ensembles whose members
/// must share a contract goal.
pub fn random_member<R: Rng>(rng: &mut R, id: &str, n_facts: usize, goal: &BTreeSet<String>, max_actions: usize) -> PlanningModel {
    let mut m = random_model(rng, id, n_facts, max_actions);
    m.facts = (0..n_facts).map(atom).collect();
    m.goal = goal.clone();
    m
}

pub fn random_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn encode(state: &BTreeSet<String>, facts: &[String]) -> usize {
    facts.iter().enumerate().filter(|(_, f)| state.contains(*f)).map(|(i, _)| 1 << i).sum()
}

/// Exhaustive optimal cost: Bellman–Ford over every one of the 2^n states.
pub fn brute_force_cost(model: &PlanningModel) -> f64 {
    let facts: Vec<String> = model.facts.iter().cloned().collect();
    let n_states = 1usize << facts.len();
    let mask = |set: &BTreeSet<String>| encode(set, &facts);
    let actions: Vec<(usize, usize, usize, f64)> = model
        .actions
        .iter()
        .map(|a| (mask(&a.preconditions), mask(&a.add), mask(&a.delete), a.cost))
        .collect();
    let goal = mask(&model.goal);
    let mut dist = vec![f64::INFINITY; n_states];
    dist[mask(&model.init)] = 0.0;
    loop {
        let mut changed = false;
        for s in 0..n_states {
            if dist[s].is_infinite() {
                continue;
            }
            for &(pre, add, del, cost) in &actions {
                if s & pre == pre {
                    let t = (s & !del) | add;
                    if dist[s] + cost < dist[t] {
                        dist[t] = dist[s] + cost;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..n_states).filter(|s| s & goal == goal).map(|s| dist[s]).fold(f64::INFINITY, f64::min)
}

/// Random action-name trace drawn from a model's actions.
pub fn random_trace<R: Rng>(rng: &mut R, model: &PlanningModel, max_len: usize) -> Vec<String> {
    let names: Vec<&String> = model.actions.iter().map(|a| &a.name).collect();
    let len = rng.random_range(1..=max_len);
    (0..len)
        .map(|_| names.choose(rng).map(|s| s.to_string()).unwrap_or_else(|| "a0".into()))
        .collect()
}

/// Independent trace simulation: (executable, cost, achieves goal).
pub fn simulate_trace(model: &PlanningModel, trace: &[String]) -> (bool, f64, bool) {
    let mut state = model.init.clone();
    let mut cost = 0.0;
    for name in trace {
        let Some(action) = model.actions.iter().find(|a| &a.name == name) else {
            return (false, f64::INFINITY, false);
        };
        if !action.preconditions.is_subset(&state) {
            return (false, f64::INFINITY, false);
        }
        for d in &action.delete {
            state.remove(d);
        }
        state.extend(action.add.iter().cloned());
        cost += action.cost;
    }
    (true, cost, model.goal.is_subset(&state))
}

/// Model whose goal `g` is reachable by one action of the given cost, or
/// not at all when `cost` is `None`.
pub fn chain_model(id: &str, cost: Option<f64>) -> PlanningModel {
    let actions = match cost {
        Some(c) => vec![Action::new("reach", ["s"], ["g"], [], c)],
        None => vec![Action::new("stall", ["s"], ["s2"], [], 1.0)],
    };
    PlanningModel {
        id: id.to_string(),
        facts: ["s", "s2", "g"].iter().map(|s| s.to_string()).collect(),
        init: ["s".to_string()].into(),
        goal: ["g".to_string()].into(),
        actions,
    }
}

/// Ensemble of 2..=max_models chain models with random costs (about one in
/// five unsolvable) and random positive weights.
pub fn random_chain_ensemble<R: Rng>(rng: &mut R, max_models: usize) -> mmtrust_core::trust::ModelEnsemble {
    let n = rng.random_range(2..=max_models);
    let models = (0..n)
        .map(|i| {
            let cost = if rng.random_bool(0.2) { None } else { Some(rng.random_range(1..=30) as f64) };
            chain_model(&format!("m{i}"), cost)
        })
        .collect();
    let weights = random_weights(rng, n);
    mmtrust_core::trust::ModelEnsemble::new(models, weights).unwrap()
}

pub fn goal_contract(bound: f64) -> mmtrust_core::trust::Contract {
    mmtrust_core::trust::Contract::new(["g".to_string()].into(), bound).unwrap()
}
