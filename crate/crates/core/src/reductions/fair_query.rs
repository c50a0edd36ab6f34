//! Fair algorithms viewed as pure functions of their history.
//!
//! A [`FairPolicy`] exposes its arm distribution for a round without
//! committing to it, so a caller can ask "what would you do on these
//! contexts?" any number of times and then commit only the rounds it wants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair_bandits::{
    chained_set, check_delta, confidence_radius, top_arm, ArmEstimate, ConfidenceInterval,
    FairBandits, Overlap,
};
use crate::model::{ArmDistribution, Context, ContextKey};

pub trait FairPolicy: Clone {
    fn num_arms(&self) -> usize;

    /// Distribution over arms for `contexts`. Must not depend on anything
    /// but the committed history and `contexts`.
    fn query(&self, contexts: &[Context]) -> Result<ArmDistribution>;

    /// Appends one played round to the history.
    fn commit(&mut self, contexts: &[Context], arm: usize, reward: f64) -> Result<()>;
}

/// One committed round of a policy's history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRound {
    pub contexts: Vec<Context>,
    pub arm: usize,
    pub reward: f64,
}

/// Replays `history` on a copy of `fresh` and queries the result.
pub fn fair_query<P: FairPolicy>(
    fresh: &P,
    history: &[HistoryRound],
    contexts: &[Context],
) -> Result<ArmDistribution> {
    let mut policy = fresh.clone();
    for round in history {
        policy.commit(&round.contexts, round.arm, round.reward)?;
    }
    policy.query(contexts)
}

fn check_arity(k: usize, contexts: &[Context]) -> Result<()> {
    if contexts.len() == k {
        Ok(())
    } else {
        Err(Error::ContextMismatch(format!(
            "expected {k} contexts, got {}",
            contexts.len()
        )))
    }
}

impl FairPolicy for FairBandits {
    fn num_arms(&self) -> usize {
        self.k()
    }

    fn query(&self, contexts: &[Context]) -> Result<ArmDistribution> {
        check_arity(self.k(), contexts)?;
        ArmDistribution::uniform_over(self.k(), &self.next_active())
    }

    fn commit(&mut self, contexts: &[Context], arm: usize, reward: f64) -> Result<()> {
        check_arity(self.k(), contexts)?;
        self.advance_active();
        self.update(arm, reward)
    }
}

/// The chaining algorithm run separately for every distinct (arm, context)
/// pair, for contextual instances whose contexts come from a finite pool.
///
/// Each cell keeps the running mean and confidence interval of one arm on one
/// context; a round chains the intervals of the cells its contexts select.
/// There is no persistent active set, since the contexts change between rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextualFairBandits {
    k: usize,
    delta: f64,
    t: u64,
    cells: BTreeMap<(usize, ContextKey), ArmEstimate>,
}

impl ContextualFairBandits {
    pub fn new(k: usize, delta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one arm".into()));
        }
        check_delta(delta)?;
        Ok(Self {
            k,
            delta,
            t: 1,
            cells: BTreeMap::new(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    /// Statistics of `arm` on context `x`; unseen cells are at their initial state.
    pub fn cell(&self, arm: usize, x: &Context) -> ArmEstimate {
        self.cells.get(&(arm, x.key())).cloned().unwrap_or_default()
    }

    pub fn intervals(&self, contexts: &[Context]) -> Result<Vec<(usize, ConfidenceInterval)>> {
        check_arity(self.k, contexts)?;
        Ok(contexts
            .iter()
            .enumerate()
            .map(|(j, x)| (j, self.cell(j, x).interval))
            .collect())
    }
}

impl FairPolicy for ContextualFairBandits {
    fn num_arms(&self) -> usize {
        self.k
    }

    fn query(&self, contexts: &[Context]) -> Result<ArmDistribution> {
        let intervals = self.intervals(contexts)?;
        let top = top_arm(&intervals)?;
        let chained = chained_set(&intervals, top, Overlap::Closed)?;
        ArmDistribution::uniform_over(self.k, &chained)
    }

    fn commit(&mut self, contexts: &[Context], arm: usize, reward: f64) -> Result<()> {
        check_arity(self.k, contexts)?;
        if arm >= self.k {
            return Err(Error::ArmOutOfRange { arm, k: self.k });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::InvalidParameter(format!(
                "reward {reward} outside [0, 1]"
            )));
        }
        let radius_round = self.t + 1;
        let est = self.cells.entry((arm, contexts[arm].key())).or_default();
        let n_old = est.pulls as f64;
        est.pulls += 1;
        est.mean = (est.mean * n_old + reward) / est.pulls as f64;
        let radius = confidence_radius(radius_round, est.pulls, self.delta)?;
        est.interval = ConfidenceInterval::centered(est.mean, radius);
        self.t += 1;
        Ok(())
    }
}
