//! Fair stochastic bandits by confidence-interval chaining.
//!
//! Each arm carries a Hoeffding interval around its empirical mean. Two arms
//! are *linked* when their intervals intersect, and *chained* when they are in
//! the same connected component of the linked relation. Every round the active
//! set shrinks to the arms chained to the highest upper bound, and the policy
//! plays uniformly over what remains. Arms that drop out never return.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ArmDistribution;
use crate::rng::SimRng;

/// Whether touching endpoints count as an intersection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Overlap {
    /// `[a, b]` and `[c, d]` are linked iff `a <= d && c <= b`.
    Closed,
    /// `(a, b)` and `(c, d)` are linked iff `a < d && c < b`.
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    /// The uninformative interval `[0, 1]` every arm starts with.
    pub const UNIT: ConfidenceInterval = ConfidenceInterval {
        lower: 0.0,
        upper: 1.0,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidParameter(format!(
                "interval [{lower}, {upper}] is empty"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `[center - radius, center + radius]`, not clamped to `[0, 1]`.
    pub fn centered(center: f64, radius: f64) -> Self {
        Self {
            lower: center - radius,
            upper: center + radius,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn links(&self, other: &Self, overlap: Overlap) -> bool {
        match overlap {
            Overlap::Closed => self.lower <= other.upper && other.lower <= self.upper,
            Overlap::Open => self.lower < other.upper && other.lower < self.upper,
        }
    }
}

/// Hoeffding radius `sqrt(ln((pi * tau)^2 / (3 delta)) / (2 n))`.
///
/// Summing the per-round failure probability `6 delta / (pi tau)^2` over all
/// rounds gives exactly `delta`.
pub fn confidence_radius(tau: u64, n: u64, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "radius needs at least one sample".into(),
        ));
    }
    if tau == 0 {
        return Err(Error::InvalidParameter("round index starts at 1".into()));
    }
    check_delta(delta)?;
    let arg = (PI * tau as f64).powi(2) / (3.0 * delta);
    Ok((arg.ln() / (2.0 * n as f64)).sqrt())
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "delta {delta} outside (0, 1)"
        )))
    }
}

/// Candidate maximizing the upper bound; ties go to the lowest arm index.
pub fn top_arm(intervals: &[(usize, ConfidenceInterval)]) -> Result<usize> {
    intervals
        .iter()
        .fold(None::<(usize, f64)>, |best, &(j, ci)| match best {
            Some((bj, bu)) if bu > ci.upper || (bu == ci.upper && bj < j) => Some((bj, bu)),
            _ => Some((j, ci.upper)),
        })
        .map(|(j, _)| j)
        .ok_or(Error::EmptyCandidateSet)
}

/// Arms chained to `top`: the connected component containing `top` in the
/// graph whose edges join linked intervals.
///
/// Interval graphs have contiguous components once sorted by lower endpoint,
/// so a single sweep suffices. The result is sorted by arm index.
pub fn chained_set(
    intervals: &[(usize, ConfidenceInterval)],
    top: usize,
    overlap: Overlap,
) -> Result<Vec<usize>> {
    if intervals.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    if !intervals.iter().any(|(j, _)| *j == top) {
        return Err(Error::InvalidParameter(format!(
            "top arm {top} is not a candidate"
        )));
    }
    let mut order: Vec<&(usize, ConfidenceInterval)> = intervals.iter().collect();
    order.sort_by(|a, b| a.1.lower.total_cmp(&b.1.lower).then(a.0.cmp(&b.0)));

    let mut component: Vec<usize> = Vec::new();
    let mut reach = f64::NEG_INFINITY;
    let mut holds_top = false;
    for &&(j, ci) in &order {
        let joins = match overlap {
            Overlap::Closed => ci.lower <= reach,
            Overlap::Open => ci.lower < reach,
        };
        if !joins && !component.is_empty() {
            if holds_top {
                break;
            }
            component.clear();
            reach = f64::NEG_INFINITY;
        }
        component.push(j);
        reach = reach.max(ci.upper);
        holds_top |= j == top;
    }
    component.sort_unstable();
    Ok(component)
}

/// Per-arm statistics kept by [`FairBandits`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmEstimate {
    pub mean: f64,
    pub pulls: u64,
    pub interval: ConfidenceInterval,
}

impl Default for ArmEstimate {
    fn default() -> Self {
        Self {
            mean: 0.5,
            pulls: 0,
            interval: ConfidenceInterval::UNIT,
        }
    }
}

/// State of the chaining algorithm for classic stochastic bandits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairBandits {
    delta: f64,
    /// Index of the round about to be played (1-based).
    t: u64,
    arms: Vec<ArmEstimate>,
    /// Sorted arm indices.
    active: Vec<usize>,
}

impl FairBandits {
    pub fn new(k: usize, delta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one arm".into()));
        }
        check_delta(delta)?;
        Ok(Self {
            delta,
            t: 1,
            arms: vec![ArmEstimate::default(); k],
            active: (0..k).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn arms(&self) -> &[ArmEstimate] {
        &self.arms
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn is_active(&self, arm: usize) -> bool {
        self.active.binary_search(&arm).is_ok()
    }

    fn active_intervals(&self) -> Vec<(usize, ConfidenceInterval)> {
        self.active
            .iter()
            .map(|&j| (j, self.arms[j].interval))
            .collect()
    }

    /// The active set this round would move to, without committing it.
    pub fn next_active(&self) -> Vec<usize> {
        let intervals = self.active_intervals();
        // the active set is never empty: it always keeps the top arm
        let top = top_arm(&intervals).expect("active set is nonempty");
        chained_set(&intervals, top, Overlap::Closed).expect("top is a candidate")
    }

    /// Shrinks the active set to the chained component and returns the
    /// uniform distribution over it.
    pub fn advance_active(&mut self) -> ArmDistribution {
        self.active = self.next_active();
        ArmDistribution::uniform_over(self.k(), &self.active).expect("active set is nonempty")
    }

    /// One round of play: update the active set, then draw an arm uniformly from it.
    pub fn step(&mut self, rng: &mut SimRng) -> (ArmDistribution, usize) {
        let distribution = self.advance_active();
        let chosen = self.active[rng.index(self.active.len())];
        (distribution, chosen)
    }

    /// Records the reward of the pulled arm and advances the round counter.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.k() {
            return Err(Error::ArmOutOfRange { arm, k: self.k() });
        }
        if !self.is_active(arm) {
            return Err(Error::ArmNotActive(arm));
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::InvalidParameter(format!(
                "reward {reward} outside [0, 1]"
            )));
        }
        let est = &mut self.arms[arm];
        let n_old = est.pulls as f64;
        est.pulls += 1;
        est.mean = (est.mean * n_old + reward) / est.pulls as f64;
        let radius = confidence_radius(self.t + 1, est.pulls, self.delta)?;
        est.interval = ConfidenceInterval::centered(est.mean, radius);
        self.t += 1;
        Ok(())
    }
}

/// Lower bound on the pulls of every arm still active at round `t`, holding
/// with probability at least `1 - delta / (2 t^2)`.
pub fn pull_count_lower_bound(t: u64, k: usize, delta: f64) -> f64 {
    let t = t as f64;
    let k = k as f64;
    t / k - (t / 2.0 * (2.0 * k * t * t / delta).ln()).sqrt()
}

/// Width bound on every active interval at round `t`, given the pull-count
/// lower bound holds. `None` while that lower bound is not yet positive.
pub fn width_bound(t: u64, k: usize, delta: f64) -> Option<f64> {
    let pulls = pull_count_lower_bound(t, k, delta);
    if pulls <= 0.0 {
        return None;
    }
    let log_term = ((PI * t as f64).powi(2) / (3.0 * delta)).ln();
    Some(2.0 * (log_term / (2.0 * pulls)).sqrt())
}
