//! Grounded STRIPS planning models and an exact uniform-cost planner.
//!
//! Semantics are sequential and deterministic: an action is applicable when
//! its preconditions are a subset of the state, and the successor state is
//! `(state \ delete) ∪ add`. Every likelihood in the trust engine is a
//! function of the optimal plan cost computed here.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the number of states the planner will expand.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// A grounded action with STRIPS preconditions and effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    pub preconditions: BTreeSet<String>,
    pub add: BTreeSet<String>,
    pub delete: BTreeSet<String>,
    pub cost: f64,
}

impl Action {
    pub fn new<P, A, D, S>(name: impl Into<String>, preconditions: P, add: A, delete: D, cost: f64) -> Self
    where
        P: IntoIterator<Item = S>,
        A: IntoIterator<Item = S>,
        D: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Action {
            name: name.into(),
            preconditions: preconditions.into_iter().map(Into::into).collect(),
            add: add.into_iter().map(Into::into).collect(),
            delete: delete.into_iter().map(Into::into).collect(),
            cost,
        }
    }
}

/// One candidate task model: the agent's own model, one the human ascribes
/// to it, or the human's idealized task model all share this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningModel {
    pub id: String,
    pub facts: BTreeSet<String>,
    pub init: BTreeSet<String>,
    pub goal: BTreeSet<String>,
    pub actions: Vec<Action>,
}

impl PlanningModel {
    /// Checks that every referenced atom is declared, costs are strictly
    /// positive and finite, no action both adds and deletes an atom, and
    /// action names are unique.
    pub fn validate(&self) -> Result<()> {
        let check = |atoms: &BTreeSet<String>, context: &str| -> Result<()> {
            match atoms.iter().find(|a| !self.facts.contains(*a)) {
                Some(atom) => Err(Error::UnknownAtom {
                    model: self.id.clone(),
                    atom: atom.clone(),
                    context: context.to_string(),
                }),
                None => Ok(()),
            }
        };
        check(&self.init, "init")?;
        check(&self.goal, "goal")?;
        let mut names = HashSet::new();
        for action in &self.actions {
            check(&action.preconditions, &format!("preconditions of '{}'", action.name))?;
            check(&action.add, &format!("add effects of '{}'", action.name))?;
            check(&action.delete, &format!("delete effects of '{}'", action.name))?;
            if !(action.cost.is_finite() && action.cost > 0.0) {
                return Err(Error::validation(
                    format!("{}.actions.{}.cost", self.id, action.name),
                    format!("action cost must be strictly positive and finite, got {}", action.cost),
                ));
            }
            if let Some(atom) = action.add.intersection(&action.delete).next() {
                return Err(Error::validation(
                    format!("{}.actions.{}", self.id, action.name),
                    format!("atom '{atom}' is both added and deleted"),
                ));
            }
            if !names.insert(action.name.as_str()) {
                return Err(Error::validation(
                    format!("{}.actions.{}", self.id, action.name),
                    "duplicate action name",
                ));
            }
        }
        Ok(())
    }

    pub fn action(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Solvable,
    Unsolvable,
}

/// Outcome of optimal planning. `cost` is `+inf` exactly when unsolvable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub status: PlanStatus,
    #[serde(with = "crate::serde_cost")]
    pub cost: f64,
    pub plan: Vec<String>,
}

impl PlanResult {
    pub fn unsolvable() -> Self {
        PlanResult {
            status: PlanStatus::Unsolvable,
            cost: f64::INFINITY,
            plan: Vec::new(),
        }
    }

    pub fn is_solvable(&self) -> bool {
        self.status == PlanStatus::Solvable
    }
}

/// Result of replaying an action sequence from a model's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvaluation {
    pub executable: bool,
    #[serde(with = "crate::serde_cost")]
    pub cost: f64,
    pub achieves_goal: bool,
}

/// Uniform-cost search with a bound on expanded states.
#[derive(Debug, Clone, Copy)]
pub struct Planner {
    pub state_cap: usize,
}

impl Default for Planner {
    fn default() -> Self {
        Planner {
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

/// Minimum-cost plan under the default planner configuration.
pub fn optimal_plan(model: &PlanningModel) -> Result<PlanResult> {
    Planner::default().solve(model)
}

/// Replays `trace` from `model.init`. Unknown action names make the trace
/// non-executable rather than raising an error.
pub fn evaluate_trace<S: AsRef<str>>(model: &PlanningModel, trace: &[S]) -> Result<TraceEvaluation> {
    model.validate()?;
    let mut state: BTreeSet<&str> = model.init.iter().map(String::as_str).collect();
    let mut cost = 0.0;
    for step in trace {
        let Some(action) = model.action(step.as_ref()) else {
            return Ok(not_executable());
        };
        if !action.preconditions.iter().all(|p| state.contains(p.as_str())) {
            return Ok(not_executable());
        }
        for atom in &action.delete {
            state.remove(atom.as_str());
        }
        state.extend(action.add.iter().map(String::as_str));
        cost += action.cost;
    }
    let achieves_goal = model.goal.iter().all(|g| state.contains(g.as_str()));
    Ok(TraceEvaluation {
        executable: true,
        cost,
        achieves_goal,
    })
}

fn not_executable() -> TraceEvaluation {
    TraceEvaluation {
        executable: false,
        cost: f64::INFINITY,
        achieves_goal: false,
    }
}

/// Fixed-width bitset over a model's fact indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Bits(Box<[u64]>);

impl Bits {
    fn from_atoms(index: &HashMap<&str, usize>, words: usize, atoms: &BTreeSet<String>) -> Self {
        let mut bits = vec![0u64; words];
        for atom in atoms {
            let i = index[atom.as_str()];
            bits[i / 64] |= 1 << (i % 64);
        }
        Bits(bits.into_boxed_slice())
    }

    fn is_subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a & !b == 0)
    }

    fn apply(&self, add: &Bits, delete: &Bits) -> Bits {
        Bits(
            self.0
                .iter()
                .zip(add.0.iter())
                .zip(delete.0.iter())
                .map(|((s, a), d)| (s & !d) | a)
                .collect(),
        )
    }
}

struct GroundAction {
    pre: Bits,
    add: Bits,
    delete: Bits,
    cost: f64,
}

struct Frontier {
    cost: f64,
    // Indices into the name-sorted action list, so index order is name order.
    plan: Vec<u32>,
    state: Bits,
}

impl Frontier {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| self.plan.cmp(&other.plan))
    }
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for cheapest-first.
        other.key_cmp(self)
    }
}

impl Planner {
    /// Returns a minimum-cost plan. Among equal-cost plans the
    /// lexicographically smallest sequence of action names is returned.
    pub fn solve(&self, model: &PlanningModel) -> Result<PlanResult> {
        model.validate()?;
        let index: HashMap<&str, usize> = model.facts.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
        let words = model.facts.len().div_ceil(64).max(1);

        let mut sorted: Vec<&Action> = model.actions.iter().collect();
        sorted.sort_by(|a, b| a.name.cmp(&b.name));
        let ground: Vec<GroundAction> = sorted
            .iter()
            .map(|a| GroundAction {
                pre: Bits::from_atoms(&index, words, &a.preconditions),
                add: Bits::from_atoms(&index, words, &a.add),
                delete: Bits::from_atoms(&index, words, &a.delete),
                cost: a.cost,
            })
            .collect();

        let init = Bits::from_atoms(&index, words, &model.init);
        let goal = Bits::from_atoms(&index, words, &model.goal);

        let mut closed: HashSet<Bits> = HashSet::new();
        let mut open = BinaryHeap::new();
        open.push(Frontier {
            cost: 0.0,
            plan: Vec::new(),
            state: init,
        });

        while let Some(node) = open.pop() {
            if closed.contains(&node.state) {
                continue;
            }
            if goal.is_subset_of(&node.state) {
                return Ok(PlanResult {
                    status: PlanStatus::Solvable,
                    cost: node.cost,
                    plan: node.plan.iter().map(|&i| sorted[i as usize].name.clone()).collect(),
                });
            }
            if closed.len() >= self.state_cap {
                return Err(Error::ResourceExhausted {
                    model: model.id.clone(),
                    cap: self.state_cap,
                });
            }
            for (i, action) in ground.iter().enumerate() {
                if !action.pre.is_subset_of(&node.state) {
                    continue;
                }
                let next = node.state.apply(&action.add, &action.delete);
                if closed.contains(&next) {
                    continue;
                }
                let mut plan = node.plan.clone();
                plan.push(i as u32);
                open.push(Frontier {
                    cost: node.cost + action.cost,
                    plan,
                    state: next,
                });
            }
            closed.insert(node.state);
        }
        Ok(PlanResult::unsolvable())
    }
}
