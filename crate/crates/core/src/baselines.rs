//! Unfair comparison policies: UCB, uniform play, and the conjunction bandit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArmDistribution, Context};
use crate::rng::SimRng;

/// Upper-confidence-bound policy with a Hoeffding bonus `sqrt(ln t / (2 n))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ucb {
    means: Vec<f64>,
    pulls: Vec<u64>,
    /// Round about to be played (1-based).
    t: u64,
}

impl Ucb {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one arm".into()));
        }
        Ok(Self {
            means: vec![0.0; k],
            pulls: vec![0; k],
            t: 1,
        })
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn index(&self, arm: usize) -> f64 {
        let n = self.pulls[arm] as f64;
        self.means[arm] + ((self.t as f64).ln() / (2.0 * n)).sqrt()
    }

    /// Point mass on the arm to pull: round-robin until every arm has one
    /// sample, then the highest index (lowest arm on ties).
    pub fn step(&self) -> (ArmDistribution, usize) {
        let arm = match self.pulls.iter().position(|&n| n == 0) {
            Some(j) => j,
            None => (0..self.k()).fold(0, |best, j| {
                if self.index(j) > self.index(best) {
                    j
                } else {
                    best
                }
            }),
        };
        (
            ArmDistribution::point_mass(self.k(), arm).expect("arm in range"),
            arm,
        )
    }

    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.k() {
            return Err(Error::ArmOutOfRange { arm, k: self.k() });
        }
        let n = self.pulls[arm] as f64;
        self.means[arm] = (self.means[arm] * n + reward) / (n + 1.0);
        self.pulls[arm] += 1;
        self.t += 1;
        Ok(())
    }
}

/// Uniformly random play over all `k` arms.
pub fn uniform_step(k: usize, rng: &mut SimRng) -> Result<(ArmDistribution, usize)> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one arm".into()));
    }
    Ok((ArmDistribution::uniform(k), rng.index(k)))
}

/// Outcome of [`ConjunctionBandit::select`], needed to apply the reward.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjunctionChoice {
    pub distribution: ArmDistribution,
    pub chosen: usize,
    /// Arms whose candidate conjunction is satisfied by their context.
    pub active: Vec<usize>,
    chosen_mask: u64,
}

/// Unfair learner for conjunction payoffs with regret at most `k^2 d`.
///
/// Tracks for every arm a superset of the variables its conjunction uses. An
/// arm whose candidate conjunction is satisfied pays 1 for sure, so such arms
/// are played exclusively; otherwise a random pull that pays 1 prunes every
/// variable that was 0 in the pulled arm's context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjunctionBandit {
    d: usize,
    /// Bit `m` of `candidates[j]` set iff variable `m` may still belong to arm `j`'s conjunction.
    candidates: Vec<u64>,
}

impl ConjunctionBandit {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one arm".into()));
        }
        if d == 0 || d > 64 {
            return Err(Error::DimensionOutOfRange { d, min: 1, max: 64 });
        }
        let full = if d == 64 { u64::MAX } else { (1u64 << d) - 1 };
        Ok(Self {
            d,
            candidates: vec![full; k],
        })
    }

    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Candidate variable set of `arm`, as sorted 0-based indices.
    pub fn candidates(&self, arm: usize) -> Vec<usize> {
        (0..self.d)
            .filter(|m| self.candidates[arm] & (1 << m) != 0)
            .collect()
    }

    pub fn select(&self, contexts: &[Context], rng: &mut SimRng) -> Result<ConjunctionChoice> {
        if contexts.len() != self.k() {
            return Err(Error::ArityMismatch(format!(
                "{} contexts for {} arms",
                contexts.len(),
                self.k()
            )));
        }
        let masks = contexts
            .iter()
            .map(|c| {
                let m = c.bool_mask()?;
                if c.dim() != self.d {
                    return Err(Error::ContextMismatch(format!(
                        "expected dimension {}, got {}",
                        self.d,
                        c.dim()
                    )));
                }
                Ok(m)
            })
            .collect::<Result<Vec<u64>>>()?;
        let active: Vec<usize> = (0..self.k())
            .filter(|&j| masks[j] & self.candidates[j] == self.candidates[j])
            .collect();
        let (distribution, chosen) = if active.is_empty() {
            (ArmDistribution::uniform(self.k()), rng.index(self.k()))
        } else {
            (
                ArmDistribution::uniform_over(self.k(), &active)?,
                active[rng.index(active.len())],
            )
        };
        Ok(ConjunctionChoice {
            distribution,
            chosen,
            chosen_mask: masks[chosen],
            active,
        })
    }

    /// Applies the pruning rule for the reward observed on `choice.chosen`.
    pub fn observe(&mut self, choice: &ConjunctionChoice, reward: f64) {
        if choice.active.is_empty() && reward == 1.0 {
            self.candidates[choice.chosen] &= choice.chosen_mask;
        }
    }
}
