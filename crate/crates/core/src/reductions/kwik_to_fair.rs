//! Fair contextual bandits from one KWIK learner per arm.
//!
//! Each round every learner is queried on its arm's context. If any of them
//! abstains the round is played uniformly at random; otherwise the
//! predictions become intervals of half-width `epsilon_star` and play is
//! uniform over the arms chained to the highest prediction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair_bandits::{chained_set, check_delta, top_arm, ConfidenceInterval, Overlap};
use crate::kwik::{KwikBudget, KwikLearner, Prediction};
use crate::model::{ArmDistribution, Context};
use crate::rng::SimRng;

/// A KWIK bound `m(epsilon, delta)` as used to tune the reduction.
pub trait KwikBound {
    fn bound(&self, epsilon: f64, delta: f64) -> Result<f64>;

    /// Solution of `epsilon * horizon = k * m(epsilon, delta)` when known in closed form.
    fn crossover(&self, _horizon: u64, _k: usize, _delta: f64) -> Option<f64> {
        None
    }
}

impl<F> KwikBound for F
where
    F: Fn(f64, f64) -> Result<f64>,
{
    fn bound(&self, epsilon: f64, delta: f64) -> Result<f64> {
        self(epsilon, delta)
    }
}

/// A bound that does not depend on `epsilon` or `delta` (exact learners).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantBound(pub f64);

impl KwikBound for ConstantBound {
    fn bound(&self, _epsilon: f64, _delta: f64) -> Result<f64> {
        Ok(self.0)
    }

    fn crossover(&self, horizon: u64, k: usize, _delta: f64) -> Option<f64> {
        Some(k as f64 * self.0 / horizon as f64)
    }
}

/// `ln(2 / delta) / (2 epsilon^2)`, the abstention bound of the mean learner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoeffdingBound;

impl HoeffdingBound {
    fn coefficient(delta: f64) -> f64 {
        (2.0 / delta).ln() / 2.0
    }
}

impl KwikBound for HoeffdingBound {
    fn bound(&self, epsilon: f64, delta: f64) -> Result<f64> {
        if epsilon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon {epsilon} must be positive"
            )));
        }
        check_delta(delta)?;
        Ok(Self::coefficient(delta) / (epsilon * epsilon))
    }

    fn crossover(&self, horizon: u64, k: usize, delta: f64) -> Option<f64> {
        Some((k as f64 * Self::coefficient(delta) / horizon as f64).cbrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KwikToFairParams {
    pub epsilon_star: f64,
    pub delta_star: f64,
}

/// Deepest power of two tried in the accuracy search.
const GRID_DEPTH: i32 = 60;

/// Chooses the learners' accuracy and confidence for horizon `horizon`.
///
/// `delta_star = min(delta, 1/T) / (k T^2)`. `epsilon_star` minimizes
/// `max(epsilon T, k m(epsilon, delta_star))` over `{2^-i}` plus the closed
/// form crossover when the bound supplies one. Among minimizers the largest
/// `epsilon` wins, so an exact learner gets `epsilon_star = k m / T`.
pub fn compute_kwik_to_fair_params(
    horizon: u64,
    k: usize,
    delta: f64,
    m: &dyn KwikBound,
) -> Result<KwikToFairParams> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one arm".into()));
    }
    check_delta(delta)?;
    let t = horizon as f64;
    let delta_star = delta.min(1.0 / t) / (k as f64 * t * t);

    let mut grid: Vec<f64> = (0..=GRID_DEPTH).map(|i| 2f64.powi(-i)).collect();
    if let Some(c) = m.crossover(horizon, k, delta_star) {
        if c > 0.0 && c <= 1.0 {
            grid.push(c);
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for eps in grid {
        let objective = (eps * t).max(k as f64 * m.bound(eps, delta_star)?);
        best = match best {
            None => Some((eps, objective)),
            Some((b_eps, b_obj)) => {
                let tol = 1e-12 * b_obj.abs().max(objective.abs());
                if objective < b_obj - tol || ((objective - b_obj).abs() <= tol && eps > b_eps) {
                    Some((eps, objective))
                } else {
                    Some((b_eps, b_obj))
                }
            }
        };
    }
    let (epsilon_star, _) = best.expect("grid is nonempty");
    Ok(KwikToFairParams {
        epsilon_star,
        delta_star,
    })
}

/// Outcome of planning one round: what each learner said and the play distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct KwikRound {
    pub predictions: Vec<Prediction>,
    pub distribution: ArmDistribution,
    pub chosen: usize,
}

/// The play distribution implied by one round of learner predictions.
pub fn distribution_from_predictions(
    predictions: &[Prediction],
    epsilon_star: f64,
) -> Result<ArmDistribution> {
    let k = predictions.len();
    let values: Option<Vec<f64>> = predictions.iter().map(Prediction::as_value).collect();
    let Some(values) = values else {
        return Ok(ArmDistribution::uniform(k));
    };
    let intervals: Vec<(usize, ConfidenceInterval)> = values
        .iter()
        .enumerate()
        .map(|(j, &s)| (j, ConfidenceInterval::centered(s, epsilon_star)))
        .collect();
    let top = top_arm(&intervals)?;
    let chained = chained_set(&intervals, top, Overlap::Open)?;
    ArmDistribution::uniform_over(k, &chained)
}

/// Fixed-horizon reduction state.
#[derive(Clone, Debug, PartialEq)]
pub struct KwikToFair<L> {
    learners: Vec<L>,
    budgets: Vec<KwikBudget>,
    params: KwikToFairParams,
    horizon: u64,
    t: u64,
}

impl<L: KwikLearner> KwikToFair<L> {
    pub fn new(learners: Vec<L>, params: KwikToFairParams, horizon: u64) -> Result<Self> {
        if learners.is_empty() {
            return Err(Error::InvalidParameter("need at least one arm".into()));
        }
        let budgets = learners
            .iter()
            .map(|l| KwikBudget::new(params.epsilon_star, params.delta_star, l.kwik_bound()))
            .collect();
        Ok(Self {
            learners,
            budgets,
            params,
            horizon,
            t: 1,
        })
    }

    pub fn k(&self) -> usize {
        self.learners.len()
    }

    pub fn params(&self) -> KwikToFairParams {
        self.params
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Index of the round about to be played (1-based).
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn learners(&self) -> &[L] {
        &self.learners
    }

    /// Abstentions per arm so far.
    pub fn dont_know_counts(&self) -> Vec<u64> {
        self.budgets
            .iter()
            .map(KwikBudget::dont_know_count)
            .collect()
    }

    /// Predictions and play distribution for `contexts`, without touching any state.
    pub fn plan(&self, contexts: &[Context]) -> Result<(Vec<Prediction>, ArmDistribution)> {
        if contexts.len() != self.k() {
            return Err(Error::ContextMismatch(format!(
                "expected {} contexts, got {}",
                self.k(),
                contexts.len()
            )));
        }
        let predictions = self
            .learners
            .iter()
            .zip(contexts)
            .map(|(l, x)| l.predict(x))
            .collect::<Result<Vec<_>>>()?;
        let distribution = distribution_from_predictions(&predictions, self.params.epsilon_star)?;
        Ok((predictions, distribution))
    }

    /// Plans the round, tallies abstentions and draws an arm.
    pub fn step(&mut self, contexts: &[Context], rng: &mut SimRng) -> Result<KwikRound> {
        if self.t > self.horizon {
            return Err(Error::InvalidParameter(format!(
                "horizon {} exhausted",
                self.horizon
            )));
        }
        let (predictions, distribution) = self.plan(contexts)?;
        for (budget, p) in self.budgets.iter_mut().zip(&predictions) {
            budget.record(p);
        }
        let chosen = distribution.sample(rng);
        Ok(KwikRound {
            predictions,
            distribution,
            chosen,
        })
    }

    /// Feeds the pulled arm's learner and closes the round. Other learners are untouched.
    pub fn feedback(&mut self, arm: usize, context: &Context, reward: f64) -> Result<()> {
        let k = self.k();
        let learner = self
            .learners
            .get_mut(arm)
            .ok_or(Error::ArmOutOfRange { arm, k })?;
        learner.feedback(context, reward)?;
        self.t += 1;
        Ok(())
    }
}

/// Confidence given to epoch `epoch` (1-based): `6 delta / (pi epoch)^2`.
pub fn epoch_delta(delta: f64, epoch: u32) -> f64 {
    6.0 * delta / (PI * epoch as f64).powi(2)
}

/// Epoch of round `t` (1-based) when epoch `E` lasts `2^E` rounds.
pub fn epoch_of_round(t: u64) -> u32 {
    (t + 1).ilog2()
}

/// Anytime version: restarts the fixed-horizon reduction with fresh learners
/// on epochs of length `2^E`.
pub struct DoublingKwikToFair<L, F> {
    k: usize,
    delta: f64,
    bound: Box<dyn KwikBound + Send + Sync>,
    make_learners: F,
    epoch: u32,
    t: u64,
    inner: KwikToFair<L>,
    dont_know_before: Vec<u64>,
}

impl<L, F> DoublingKwikToFair<L, F>
where
    L: KwikLearner,
    F: Fn(&KwikToFairParams) -> Result<Vec<L>>,
{
    pub fn new(
        k: usize,
        delta: f64,
        bound: Box<dyn KwikBound + Send + Sync>,
        make_learners: F,
    ) -> Result<Self> {
        check_delta(delta)?;
        let inner = Self::epoch_state(k, delta, bound.as_ref(), &make_learners, 1)?;
        Ok(Self {
            k,
            delta,
            bound,
            make_learners,
            epoch: 1,
            t: 1,
            inner,
            dont_know_before: vec![0; k],
        })
    }

    fn epoch_state(
        k: usize,
        delta: f64,
        bound: &dyn KwikBound,
        make: &F,
        epoch: u32,
    ) -> Result<KwikToFair<L>> {
        let horizon = 1u64 << epoch;
        let params = compute_kwik_to_fair_params(horizon, k, epoch_delta(delta, epoch), bound)?;
        let learners = make(&params)?;
        if learners.len() != k {
            return Err(Error::ArityMismatch(format!(
                "expected {k} learners, got {}",
                learners.len()
            )));
        }
        KwikToFair::new(learners, params, horizon)
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn current(&self) -> &KwikToFair<L> {
        &self.inner
    }

    /// Abstentions per arm across all epochs.
    pub fn dont_know_counts(&self) -> Vec<u64> {
        self.inner
            .dont_know_counts()
            .iter()
            .zip(&self.dont_know_before)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn step(&mut self, contexts: &[Context], rng: &mut SimRng) -> Result<KwikRound> {
        let epoch = epoch_of_round(self.t);
        if epoch != self.epoch {
            for (acc, c) in self
                .dont_know_before
                .iter_mut()
                .zip(self.inner.dont_know_counts())
            {
                *acc += c;
            }
            self.inner = Self::epoch_state(
                self.k,
                self.delta,
                self.bound.as_ref(),
                &self.make_learners,
                epoch,
            )?;
            self.epoch = epoch;
        }
        self.inner.step(contexts, rng)
    }

    pub fn feedback(&mut self, arm: usize, context: &Context, reward: f64) -> Result<()> {
        self.inner.feedback(arm, context, reward)?;
        self.t += 1;
        Ok(())
    }
}
