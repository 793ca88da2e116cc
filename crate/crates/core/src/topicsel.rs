//! Topic selection: how many decoy links to add per topic.
//!
//! [`greedy_topic_selection`] is a local search over the integer lattice of addition vectors.
//! Starting from the zero plan it repeatedly applies the best single-topic increment, or failing
//! that the best single-topic decrement, as long as the move multiplies the shifted objective
//! `G + 0.5` by more than `1 + epsilon / n^2`. Shifting keeps the multiplicative test meaningful
//! although `G` itself can be negative; the argmax is unchanged.
//!
//! [`brute_force_topic_selection`] enumerates every plan within a total-addition budget and is
//! only usable on tiny instances. It exists as an oracle for the greedy search.

use serde::{Deserialize, Serialize};

use crate::domain::TopicFrequencyVector;
use crate::error::{Error, Result};
use crate::metrics::{ObjectiveConfig, ObjectiveEvaluator, OBJECTIVE_SHIFT};

/// Largest topic count accepted by the exhaustive search.
pub const BRUTE_FORCE_MAX_TOPICS: usize = 6;
/// Largest addition budget accepted by the exhaustive search.
pub const BRUTE_FORCE_MAX_BUDGET: u64 = 15;

/// Number of decoy links to add for each topic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdditionPlan {
    additions: Vec<u64>,
}

impl AdditionPlan {
    pub fn zeros(m: usize) -> Self {
        Self {
            additions: vec![0; m],
        }
    }

    pub fn from_vec(additions: Vec<u64>) -> Self {
        Self { additions }
    }

    pub fn additions(&self) -> &[u64] {
        &self.additions
    }

    pub fn total(&self) -> u64 {
        self.additions.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Unit updates in topic order, e.g. `(0, 2, 1)` yields topics `1, 1, 2`.
    pub fn unit_updates(&self) -> impl Iterator<Item = usize> + '_ {
        self.additions
            .iter()
            .enumerate()
            .flat_map(|(t, &n)| std::iter::repeat_n(t, n as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub epsilon: f64,
    pub max_steps: usize,
    /// `n` in the `1 + epsilon / n^2` acceptance factor; `None` means the number of topics.
    pub n_threshold: Option<usize>,
    /// Optional cap on the total number of additions.
    pub max_additions: Option<u64>,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_steps: 10_000,
            n_threshold: None,
            max_additions: None,
        }
    }
}

impl GreedyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be >= 1".into()));
        }
        if self.n_threshold == Some(0) {
            return Err(Error::Config("n_threshold must be >= 1".into()));
        }
        Ok(())
    }

    pub fn acceptance_factor(&self, m: usize) -> f64 {
        let n = self.n_threshold.unwrap_or(m) as f64;
        1.0 + self.epsilon / (n * n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    Add(usize),
    Remove(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOutcome {
    pub plan: AdditionPlan,
    /// Objective `G` of the returned plan (unshifted).
    pub value: f64,
    /// Accepted moves with the unshifted objective after each one.
    pub trajectory: Vec<(Move, f64)>,
    /// True when `max_steps` ran out before a local optimum was reached.
    pub truncated: bool,
}

pub fn greedy_topic_selection(
    c: &TopicFrequencyVector,
    objective: &ObjectiveConfig,
    cfg: &GreedyConfig,
) -> Result<GreedyOutcome> {
    cfg.validate()?;
    let m = c.m();
    let mut eval = ObjectiveEvaluator::new(c, objective)?;
    let factor = cfg.acceptance_factor(m);
    let cap = cfg.max_additions.unwrap_or(u64::MAX);

    let mut plan = vec![0u64; m];
    let mut total = 0u64;
    let mut val = eval.value(&plan) + OBJECTIVE_SHIFT;
    let mut trajectory = Vec::new();
    let mut truncated = false;

    loop {
        if trajectory.len() >= cfg.max_steps {
            truncated = true;
            break;
        }
        let threshold = factor * val;

        let mut best: Option<(usize, f64)> = None;
        if total < cap {
            for j in 0..m {
                plan[j] += 1;
                let v = eval.value(&plan) + OBJECTIVE_SHIFT;
                plan[j] -= 1;
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
        }
        if let Some((j, v)) = best.filter(|&(_, v)| v > threshold) {
            plan[j] += 1;
            total += 1;
            val = v;
            trajectory.push((Move::Add(j), v - OBJECTIVE_SHIFT));
            continue;
        }

        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if plan[j] == 0 {
                continue;
            }
            plan[j] -= 1;
            let v = eval.value(&plan) + OBJECTIVE_SHIFT;
            plan[j] += 1;
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((j, v));
            }
        }
        if let Some((j, v)) = best.filter(|&(_, v)| v > threshold) {
            plan[j] -= 1;
            total -= 1;
            val = v;
            trajectory.push((Move::Remove(j), v - OBJECTIVE_SHIFT));
            continue;
        }
        break;
    }

    Ok(GreedyOutcome {
        plan: AdditionPlan::from_vec(plan),
        value: val - OBJECTIVE_SHIFT,
        trajectory,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOutcome {
    pub plan: AdditionPlan,
    pub value: f64,
    /// Number of plans evaluated.
    pub evaluated: usize,
}

/// Exhaustively finds the best plan with total additions at most `budget`.
///
/// Ties are broken by smaller total, then lexicographically smaller plan.
pub fn brute_force_topic_selection(
    c: &TopicFrequencyVector,
    objective: &ObjectiveConfig,
    budget: u64,
) -> Result<BruteForceOutcome> {
    let m = c.m();
    if m > BRUTE_FORCE_MAX_TOPICS || budget > BRUTE_FORCE_MAX_BUDGET {
        return Err(Error::InstanceTooLarge(format!(
            "m = {m}, budget = {budget} (limits: m <= {BRUTE_FORCE_MAX_TOPICS}, budget <= {BRUTE_FORCE_MAX_BUDGET})"
        )));
    }
    let mut eval = ObjectiveEvaluator::new(c, objective)?;
    let mut plan = vec![0u64; m];
    let mut best_plan = plan.clone();
    let mut best_value = eval.value(&plan);
    let mut best_total = 0u64;
    let mut evaluated = 1usize;

    // Odometer over all vectors with sum <= budget, in lexicographic order.
    loop {
        let mut pos = m;
        let mut total: u64 = plan.iter().sum();
        loop {
            if pos == 0 {
                return Ok(BruteForceOutcome {
                    plan: AdditionPlan::from_vec(best_plan),
                    value: best_value,
                    evaluated,
                });
            }
            pos -= 1;
            if total < budget {
                plan[pos] += 1;
                break;
            }
            total -= plan[pos];
            plan[pos] = 0;
        }
        let total: u64 = plan.iter().sum();
        let v = eval.value(&plan);
        evaluated += 1;
        let better = v > best_value
            || (v == best_value
                && (total < best_total || (total == best_total && plan < best_plan)));
        if better {
            best_value = v;
            best_total = total;
            best_plan.clone_from(&plan);
        }
    }
}
