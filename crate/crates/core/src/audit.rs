//! Fairness auditing and pseudo-regret against ground truth.
//!
//! A round is unfair when some arm is played with strictly higher
//! probability than another arm whose expected payoff is at least as high.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BanditInstance, RoundTrace};

/// Probability gap that counts as a strict preference.
pub const PROB_TOL: f64 = 1e-12;

/// Arm `favoured` was more likely than arm `other` despite a payoff no higher.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    pub favoured: usize,
    pub other: usize,
    pub prob_favoured: f64,
    pub prob_other: f64,
    pub value_favoured: f64,
    pub value_other: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Sorted by round, then by the arm pair.
    pub entries: Vec<Violation>,
}

impl ViolationReport {
    pub fn violated(&self) -> bool {
        !self.entries.is_empty()
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn first_violation_round(&self) -> Option<usize> {
        self.entries.first().map(|v| v.t)
    }

    pub fn summary(&self, run_id: impl Into<String>) -> AuditSummary {
        AuditSummary {
            run_id: run_id.into(),
            violated: self.violated(),
            first_violation_round: self.first_violation_round(),
            count: self.count(),
        }
    }
}

/// Per-run audit result as exported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub run_id: String,
    pub violated: bool,
    pub first_violation_round: Option<usize>,
    pub count: usize,
}

fn round_values(row: &RoundTrace, instance: &BanditInstance) -> Result<Vec<f64>> {
    if row.distribution.k() != instance.k() {
        return Err(Error::ArityMismatch(format!(
            "round {}: distribution over {} arms for a {}-arm instance",
            row.t,
            row.distribution.k(),
            instance.k()
        )));
    }
    instance.expected_all(&row.contexts)
}

/// Every unfair (round, arm pair) of `trace`.
pub fn audit_fairness(trace: &[RoundTrace], instance: &BanditInstance) -> Result<ViolationReport> {
    let mut entries = Vec::new();
    for row in trace {
        let values = round_values(row, instance)?;
        let probs = row.distribution.probs();
        // Walk arms by increasing payoff; every arm at or after position i
        // has payoff >= values[order[i]], so only those can be wronged by it.
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut found = Vec::new();
        for (pos, &j) in order.iter().enumerate() {
            // equal payoffs sit on both sides of j in the order
            let tie_start = order[..pos]
                .iter()
                .rposition(|&i| values[i] < values[j])
                .map_or(0, |p| p + 1);
            for &other in order[tie_start..].iter().filter(|&&o| o != j) {
                if probs[j] > probs[other] + PROB_TOL {
                    found.push(Violation {
                        t: row.t,
                        favoured: j,
                        other,
                        prob_favoured: probs[j],
                        prob_other: probs[other],
                        value_favoured: values[j],
                        value_other: values[other],
                    });
                }
            }
        }
        found.sort_by_key(|v| (v.favoured, v.other));
        entries.extend(found);
    }
    Ok(ViolationReport { entries })
}

/// Expected regret of each round under its recorded distribution:
/// `max_j f_j - sum_j pi_j f_j`, floored at zero.
pub fn per_round_regret(trace: &[RoundTrace], instance: &BanditInstance) -> Result<Vec<f64>> {
    trace
        .iter()
        .map(|row| {
            let values = round_values(row, instance)?;
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let played: f64 = row
                .distribution
                .probs()
                .iter()
                .zip(&values)
                .map(|(p, f)| p * f)
                .sum();
            Ok((best - played).max(0.0))
        })
        .collect()
}

/// Running sums of [`per_round_regret`].
pub fn cumulative_pseudo_regret(
    trace: &[RoundTrace],
    instance: &BanditInstance,
) -> Result<Vec<f64>> {
    let mut total = 0.0;
    Ok(per_round_regret(trace, instance)?
        .into_iter()
        .map(|r| {
            total += r;
            total
        })
        .collect())
}
