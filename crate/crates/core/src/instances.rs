//! Instance generators and the lower-bound construction.
//!
//! The lower-bound prior gives arm `i` (1-based) of `k` a mean of either
//! `1/3 + i/(3k)` or `1/3 + (i+1)/(3k)` by a fair coin, so neighbouring arms
//! collide with probability 1/4. Telling the two candidates apart takes on
//! the order of `k^2` observations, which is what makes fair play expensive.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair_bandits::check_delta;
use crate::model::{ArmSpec, BanditInstance, Context, Payoff, RewardModel};
use crate::rng::SimRng;

/// Largest conjunction size drawn by [`make_conjunction_instance`].
pub const MAX_CONJUNCTION_SIZE: usize = 3;

/// Probability that a context bit is set in conjunction instances.
pub const CONTEXT_BIT_PROB: f64 = 0.75;

/// Candidate means `(low, high)` of 0-based arm `arm` under the lower-bound prior.
pub fn lower_bound_means(k: usize, arm: usize) -> (f64, f64) {
    let k = k as f64;
    let i = (arm + 1) as f64;
    (1.0 / 3.0 + i / (3.0 * k), 1.0 / 3.0 + (i + 1.0) / (3.0 * k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundDraw {
    pub k: usize,
    /// Whether each arm got its higher candidate mean.
    pub high: Vec<bool>,
    pub means: Vec<f64>,
}

impl LowerBoundDraw {
    pub fn instance(&self) -> BanditInstance {
        BanditInstance::classic(&self.means).expect("prior means lie in [0, 1]")
    }
}

pub fn sample_lower_bound_instance(k: usize, rng: &mut SimRng) -> Result<LowerBoundDraw> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "lower-bound prior needs k >= 2, got {k}"
        )));
    }
    let high: Vec<bool> = (0..k).map(|_| rng.fair_coin()).collect();
    let means = high
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let (lo, hi) = lower_bound_means(k, i);
            if h {
                hi
            } else {
                lo
            }
        })
        .collect();
    Ok(LowerBoundDraw { k, high, means })
}

/// Observations of one lower-bound arm whose low candidate mean is `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorQuery {
    pub k: usize,
    pub p: f64,
    /// Number of 1-rewards.
    pub s: u64,
    /// Number of observations.
    pub m: u64,
}

/// Likelihood ratio of the high candidate mean `p + 1/(3k)` against the low one `p`:
/// `(1 + 1/(3kp))^s (1 - 1/(3k(1-p)))^(m-s)`.
pub fn posterior_odds(q: PosteriorQuery) -> Result<f64> {
    if q.k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let gap = 1.0 / (3.0 * q.k as f64);
    if !(q.p > 0.0 && q.p < 1.0 && q.p + gap < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "candidate means {} and {} must lie in (0, 1)",
            q.p,
            q.p + gap
        )));
    }
    if q.s > q.m {
        return Err(Error::InvalidParameter(format!(
            "{} successes out of {} observations",
            q.s, q.m
        )));
    }
    let (up, down) = odds_steps(q.k, q.p);
    Ok((q.s as f64 * up + (q.m - q.s) as f64 * down).exp())
}

/// Log-odds increments for a 1-reward and a 0-reward.
fn odds_steps(k: usize, p: f64) -> (f64, f64) {
    let k = k as f64;
    (
        (1.0 / (3.0 * k * p)).ln_1p(),
        (-1.0 / (3.0 * k * (1.0 - p))).ln_1p(),
    )
}

/// Whether odds `x` put posterior mass at least `1 - delta` on one candidate.
pub fn is_distinguished(x: f64, delta: f64) -> bool {
    x >= (1.0 - delta) / delta || x <= delta / (1.0 - delta)
}

/// Draws a lower-bound arm and observes it until its posterior odds are
/// `delta`-distinguished. Returns the number of observations needed, or
/// `None` if `cap` observations do not suffice.
pub fn distinguishing_time(
    k: usize,
    arm: usize,
    delta: f64,
    cap: u64,
    rng: &mut SimRng,
) -> Result<Option<u64>> {
    if arm >= k {
        return Err(Error::ArmOutOfRange { arm, k });
    }
    check_delta(delta)?;
    let (lo, hi) = lower_bound_means(k, arm);
    let mean = if rng.fair_coin() { hi } else { lo };
    let (up, down) = odds_steps(k, lo);
    let mut log_odds = 0.0f64;
    for m in 1..=cap {
        log_odds += if rng.bernoulli(mean) { up } else { down };
        if is_distinguished(log_odds.exp(), delta) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two paired points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "log-log fit needs positive values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn bits_of(value: u32, d: usize) -> Vec<bool> {
    (0..d).map(|i| value & (1 << (d - 1 - i)) != 0).collect()
}

/// Every `x` in `{0,1}^d` except all-ones, by Hamming weight and then by
/// binary value (first coordinate most significant), each labelled 0.
///
/// The labels agree with the conjunction of all variables, while before each
/// example at least two conjunctions consistent with the earlier ones
/// disagree on it, so a version-space learner must abstain every time.
pub fn adversarial_conjunction_sequence(d: usize) -> Result<Vec<(Context, f64)>> {
    if !(2..=16).contains(&d) {
        return Err(Error::DimensionOutOfRange { d, min: 2, max: 16 });
    }
    let all_ones = (1u32 << d) - 1;
    let mut values: Vec<u32> = (0..all_ones).collect();
    values.sort_by_key(|v| (v.count_ones(), *v));
    Ok(values
        .into_iter()
        .map(|v| (Context::Bool(bits_of(v, d)), 0.0))
        .collect())
}

/// Uniform draw from the closed unit ball in `R^d`.
pub fn sample_unit_ball(d: usize, rng: &mut SimRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let radius = rng.uniform().powf(1.0 / d as f64);
            return g.iter().map(|v| v / norm * radius).collect();
        }
    }
}

/// `k` linear arms with weights uniform in the unit ball of `R^d`.
pub fn make_linear_instance(
    d: usize,
    k: usize,
    reward_model: RewardModel,
    rng: &mut SimRng,
) -> Result<BanditInstance> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "need d >= 1 and k >= 1, got d={d}, k={k}"
        )));
    }
    let arms = (0..k)
        .map(|_| ArmSpec::Contextual {
            payoff: Payoff::Linear {
                theta: sample_unit_ball(d, rng),
            },
        })
        .collect();
    BanditInstance::new(arms, reward_model)
}

/// One round of independent unit-ball contexts, one per arm.
pub fn sample_linear_contexts(k: usize, d: usize, rng: &mut SimRng) -> Vec<Context> {
    (0..k)
        .map(|_| Context::Real(sample_unit_ball(d, rng)))
        .collect()
}

/// `k` noiseless conjunction arms over `d` variables, each of a uniformly
/// drawn size in `0..=min(3, d)`.
pub fn make_conjunction_instance(d: usize, k: usize, rng: &mut SimRng) -> Result<BanditInstance> {
    if d == 0 || d > 64 || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= d <= 64 and k >= 1, got d={d}, k={k}"
        )));
    }
    let arms = (0..k)
        .map(|_| {
            let size = rng.index(MAX_CONJUNCTION_SIZE.min(d) + 1);
            let mut vars = sample(rng, d, size).into_vec();
            vars.sort_unstable();
            ArmSpec::Contextual {
                payoff: Payoff::Conjunction { d, vars },
            }
        })
        .collect();
    BanditInstance::new(arms, RewardModel::Deterministic)
}

/// One round of boolean contexts whose bits are set with probability [`CONTEXT_BIT_PROB`].
pub fn sample_bool_contexts(k: usize, d: usize, rng: &mut SimRng) -> Vec<Context> {
    (0..k)
        .map(|_| Context::Bool((0..d).map(|_| rng.bernoulli(CONTEXT_BIT_PROB)).collect()))
        .collect()
}

/// Two-arm instance pairing a linear target (arm 0) with the dial (arm 1).
#[derive(Clone, Debug, PartialEq)]
pub struct DialInstance {
    pub instance: BanditInstance,
    /// Finite set of contexts the target arm is queried on.
    pub pool: Vec<Context>,
}

impl DialInstance {
    pub fn target(&self, x: &Context) -> Result<f64> {
        self.instance.expected(0, x)
    }
}

pub fn make_dial_instance(d: usize, pool_size: usize, rng: &mut SimRng) -> Result<DialInstance> {
    if d == 0 || pool_size == 0 {
        return Err(Error::InvalidParameter(
            "dial instance needs d >= 1 and a nonempty pool".into(),
        ));
    }
    let theta = sample_unit_ball(d, rng);
    let pool = (0..pool_size)
        .map(|_| Context::Real(sample_unit_ball(d, rng)))
        .collect();
    let instance = BanditInstance::new(
        vec![
            ArmSpec::Contextual {
                payoff: Payoff::Linear { theta },
            },
            ArmSpec::Contextual {
                payoff: Payoff::Dial,
            },
        ],
        RewardModel::Bernoulli,
    )?;
    Ok(DialInstance { instance, pool })
}

/// Serializable description of a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDump {
    pub k: usize,
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjunctions: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default)]
    pub reward_model: RewardModel,
    pub seed: u64,
}

impl InstanceDump {
    /// Describes `instance`, whose arms must all be of one kind (classic, linear or conjunction).
    pub fn from_instance(instance: &BanditInstance, family: &str, seed: u64) -> Result<Self> {
        let mut dump = Self {
            k: instance.k(),
            family: family.to_string(),
            means: None,
            thetas: None,
            conjunctions: None,
            d: None,
            reward_model: instance.reward_model(),
            seed,
        };
        if let Some(means) = instance.means() {
            dump.means = Some(means);
            return Ok(dump);
        }
        let mut thetas = Vec::new();
        let mut conjunctions = Vec::new();
        for arm in instance.arms() {
            match arm {
                ArmSpec::Contextual {
                    payoff: Payoff::Linear { theta },
                } => thetas.push(theta.clone()),
                ArmSpec::Contextual {
                    payoff: Payoff::Conjunction { d, vars },
                } => {
                    dump.d = Some(*d);
                    conjunctions.push(vars.clone());
                }
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "cannot describe the arms of a {family} instance"
                    )))
                }
            }
        }
        match (thetas.len(), conjunctions.len()) {
            (n, 0) if n == instance.k() => dump.thetas = Some(thetas),
            (0, n) if n == instance.k() => dump.conjunctions = Some(conjunctions),
            _ => {
                return Err(Error::InvalidParameter(
                    "instance mixes payoff families".into(),
                ))
            }
        }
        Ok(dump)
    }

    pub fn to_instance(&self) -> Result<BanditInstance> {
        let arms: Vec<ArmSpec> = match (&self.means, &self.thetas, &self.conjunctions) {
            (Some(means), None, None) => means
                .iter()
                .map(|&mean| ArmSpec::Classic { mean })
                .collect(),
            (None, Some(thetas), None) => thetas
                .iter()
                .map(|theta| ArmSpec::Contextual {
                    payoff: Payoff::Linear {
                        theta: theta.clone(),
                    },
                })
                .collect(),
            (None, None, Some(conj)) => {
                let d = self.d.ok_or_else(|| {
                    Error::InvalidParameter("conjunction instance needs d".into())
                })?;
                conj.iter()
                    .map(|vars| ArmSpec::Contextual {
                        payoff: Payoff::Conjunction {
                            d,
                            vars: vars.clone(),
                        },
                    })
                    .collect()
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "instance needs exactly one of means, thetas, conjunctions".into(),
                ))
            }
        };
        if arms.len() != self.k {
            return Err(Error::ArityMismatch(format!(
                "k = {} but {} arms described",
                self.k,
                arms.len()
            )));
        }
        BanditInstance::new(arms, self.reward_model)
    }
}
