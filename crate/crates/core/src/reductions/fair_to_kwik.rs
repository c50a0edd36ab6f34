//! KWIK learning from a fair two-arm contextual bandit algorithm.
//!
//! Arm 0 carries the unknown target; arm 1 carries a dial whose payoff is
//! set through its context to any multiple of `epsilon_star`. For each query
//! the wrapped algorithm is asked, without committing, how it would play
//! against every dial level. Fairness forces it to prefer arm 0 below the
//! target and arm 1 above it, so the switch point brackets the target. When
//! two or more levels leave the algorithm indifferent the learner abstains
//! and plays one of those levels for real, which costs the algorithm regret.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair_bandits::check_delta;
use crate::kwik::Prediction;
use crate::model::{ArmDistribution, Context};
use crate::reductions::fair_query::{FairPolicy, HistoryRound};
use crate::rng::SimRng;

/// Probability gap below which the two arms count as equally likely.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairToKwikParams {
    pub epsilon: f64,
    pub epsilon_star: f64,
    /// Confidence handed to the wrapped algorithm.
    pub delta_star: f64,
    /// Highest dial level; levels run `0..=max_level`.
    pub max_level: usize,
    /// Targets are known to be 0/1 valued.
    pub boolean: bool,
}

impl FairToKwikParams {
    /// `epsilon_star = epsilon / 2`, `delta_star = delta epsilon_star / T`.
    pub fn new(epsilon: f64, delta: f64, horizon: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {epsilon} outside (0, 1]"
            )));
        }
        check_delta(delta)?;
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let epsilon_star = epsilon / 2.0;
        Ok(Self {
            epsilon,
            epsilon_star,
            delta_star: delta * epsilon_star / horizon as f64,
            max_level: (1.0 / epsilon_star - 1e-9).ceil() as usize,
            boolean: false,
        })
    }

    /// Exact variant for 0/1 targets: `epsilon = 0`, `epsilon_star = 1`,
    /// `delta_star = delta / (2T)`, dial levels `{0, 1}`.
    pub fn boolean(delta: f64, horizon: u64) -> Result<Self> {
        check_delta(delta)?;
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        Ok(Self {
            epsilon: 0.0,
            epsilon_star: 1.0,
            delta_star: delta / (2.0 * horizon as f64),
            max_level: 1,
            boolean: true,
        })
    }

    pub fn dial_value(&self, level: usize) -> f64 {
        (level as f64 * self.epsilon_star).min(1.0)
    }

    /// Context that sets the dial arm's payoff to `dial_value(level)`.
    pub fn dial_context(&self, level: usize) -> Context {
        Context::Real(vec![self.dial_value(level)])
    }
}

/// A round actually played by the wrapped algorithm after an abstention.
#[derive(Clone, Debug, PartialEq)]
pub struct CommittedRound {
    pub level: usize,
    pub dial_value: f64,
    pub contexts: Vec<Context>,
    pub distribution: ArmDistribution,
    pub arm: usize,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FairToKwikStep {
    pub prediction: Prediction,
    /// Levels at which the two arms were equally likely.
    pub tied_levels: Vec<usize>,
    pub committed: Option<CommittedRound>,
}

/// Reads a prediction off the per-level distributions. Returns the tied
/// levels and, unless at least two levels tie, the prediction.
pub fn read_levels(
    params: &FairToKwikParams,
    per_level: &[ArmDistribution],
) -> (Vec<usize>, Option<Prediction>) {
    let tied: Vec<usize> = per_level
        .iter()
        .enumerate()
        .filter(|(_, d)| (d.prob(0) - d.prob(1)).abs() <= TIE_TOL)
        .map(|(l, _)| l)
        .collect();
    if tied.len() >= 2 {
        return (tied, None);
    }
    let favoured = per_level
        .iter()
        .rposition(|d| d.prob(0) > d.prob(1) + TIE_TOL);
    let value = match (favoured, params.boolean) {
        (None, _) => 0.0,
        (Some(_), true) => 1.0,
        (Some(level), false) => params.dial_value(level),
    };
    (tied, Some(Prediction::Value(value)))
}

#[derive(Clone, Debug)]
pub struct FairToKwik<P> {
    params: FairToKwikParams,
    policy: P,
    history: Vec<HistoryRound>,
    t: u64,
    dont_know: u64,
}

impl<P: FairPolicy> FairToKwik<P> {
    /// Wraps `policy`, which must be a fresh two-arm algorithm built with
    /// confidence `params.delta_star`.
    pub fn new(params: FairToKwikParams, policy: P) -> Result<Self> {
        if policy.num_arms() != 2 {
            return Err(Error::ArityMismatch(format!(
                "wrapped algorithm must have 2 arms, has {}",
                policy.num_arms()
            )));
        }
        Ok(Self {
            params,
            policy,
            history: Vec::new(),
            t: 1,
            dont_know: 0,
        })
    }

    pub fn params(&self) -> &FairToKwikParams {
        &self.params
    }

    /// The wrapped algorithm with every committed round applied.
    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn history(&self) -> &[HistoryRound] {
        &self.history
    }

    pub fn dont_know_count(&self) -> u64 {
        self.dont_know
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    fn contexts(&self, x: &Context, level: usize) -> Vec<Context> {
        vec![x.clone(), self.params.dial_context(level)]
    }

    /// The wrapped algorithm's distribution against every dial level, without committing.
    pub fn level_distributions(&self, x: &Context) -> Result<Vec<ArmDistribution>> {
        (0..=self.params.max_level)
            .map(|l| self.policy.query(&self.contexts(x, l)))
            .collect()
    }

    /// Answers query `x`. `label` draws the target's noisy label and is only
    /// called when the wrapped algorithm pulls the target arm.
    pub fn step<F>(&mut self, x: &Context, label: F, rng: &mut SimRng) -> Result<FairToKwikStep>
    where
        F: FnOnce(&mut SimRng) -> f64,
    {
        let per_level = self.level_distributions(x)?;
        let (tied_levels, prediction) = read_levels(&self.params, &per_level);
        self.t += 1;
        if let Some(prediction) = prediction {
            return Ok(FairToKwikStep {
                prediction,
                tied_levels,
                committed: None,
            });
        }

        let level = tied_levels[rng.index(tied_levels.len())];
        let contexts = self.contexts(x, level);
        let distribution = per_level[level].clone();
        let arm = distribution.sample(rng);
        let dial_value = self.params.dial_value(level);
        let reward = if arm == 0 { label(rng) } else { dial_value };
        self.policy.commit(&contexts, arm, reward)?;
        self.history.push(HistoryRound {
            contexts: contexts.clone(),
            arm,
            reward,
        });
        self.dont_know += 1;
        Ok(FairToKwikStep {
            prediction: Prediction::DontKnow,
            tied_levels,
            committed: Some(CommittedRound {
                level,
                dial_value,
                contexts,
                distribution,
                arm,
                reward,
            }),
        })
    }
}
