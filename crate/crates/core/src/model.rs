//! Shared domain types: contexts, instances, arm distributions, and round traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Tolerance used when checking that a distribution sums to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Slack allowed on the unit-ball constraint for real contexts.
pub const NORM_TOL: f64 = 1e-9;

/// Per-arm context revealed at the start of a round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Context {
    /// Classic (context-free) setting.
    Unit,
    Real(Vec<f64>),
    Bool(Vec<bool>),
}

/// Hashable, totally ordered identity of a context, used to key per-context statistics.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContextKey {
    Unit,
    Real(Vec<u64>),
    Bool(Vec<bool>),
}

impl Context {
    pub fn dim(&self) -> usize {
        match self {
            Context::Unit => 0,
            Context::Real(v) => v.len(),
            Context::Bool(v) => v.len(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Context::Unit => 0.0,
            Context::Real(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Context::Bool(v) => (v.iter().filter(|b| **b).count() as f64).sqrt(),
        }
    }

    pub fn key(&self) -> ContextKey {
        match self {
            Context::Unit => ContextKey::Unit,
            // -0.0 and 0.0 are the same point
            Context::Real(v) => ContextKey::Real(v.iter().map(|x| (x + 0.0).to_bits()).collect()),
            Context::Bool(v) => ContextKey::Bool(v.clone()),
        }
    }

    pub fn as_real(&self) -> Result<&[f64]> {
        match self {
            Context::Real(v) => Ok(v),
            other => Err(Error::ContextMismatch(format!(
                "expected a real vector, got {}",
                other.kind()
            ))),
        }
    }

    pub fn as_bool(&self) -> Result<&[bool]> {
        match self {
            Context::Bool(v) => Ok(v),
            other => Err(Error::ContextMismatch(format!(
                "expected a boolean vector, got {}",
                other.kind()
            ))),
        }
    }

    /// Boolean context packed into a bit mask (bit `i` is variable `i`).
    pub fn bool_mask(&self) -> Result<u64> {
        let bits = self.as_bool()?;
        if bits.len() > 64 {
            return Err(Error::DimensionOutOfRange {
                d: bits.len(),
                min: 0,
                max: 64,
            });
        }
        Ok(bits
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, b)| if *b { m | (1 << i) } else { m }))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Context::Unit => "unit",
            Context::Real(_) => "real",
            Context::Bool(_) => "bool",
        }
    }

    /// Compact single-field text encoding used in trace CSVs:
    /// `-` for unit, `r:0.1;0.2` for real vectors, `b:0101` for boolean vectors.
    pub fn encode(&self) -> String {
        match self {
            Context::Unit => "-".to_string(),
            Context::Real(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!("r:{}", parts.join(";"))
            }
            Context::Bool(v) => {
                let bits: String = v.iter().map(|b| if *b { '1' } else { '0' }).collect();
                format!("b:{bits}")
            }
        }
    }

    pub fn decode(s: &str) -> Result<Self> {
        let bad = || Error::MalformedTrace(format!("bad context field {s:?}"));
        if s == "-" {
            return Ok(Context::Unit);
        }
        if let Some(rest) = s.strip_prefix("r:") {
            if rest.is_empty() {
                return Ok(Context::Real(Vec::new()));
            }
            let v = rest
                .split(';')
                .map(|p| p.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Context::Real(v));
        }
        if let Some(rest) = s.strip_prefix("b:") {
            let v = rest
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(bad()),
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(Context::Bool(v));
        }
        Err(bad())
    }
}

/// Payoff function of a contextual arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    /// `(<theta, x> + 1) / 2`, mapping the raw inner product from `[-1, 1]` into `[0, 1]`.
    Linear { theta: Vec<f64> },
    /// Boolean conjunction of the listed (0-based) variables; the empty conjunction is constant 1.
    Conjunction { d: usize, vars: Vec<usize> },
    /// Identity on the first coordinate of a real context.
    Dial,
}

impl Payoff {
    pub fn value(&self, ctx: &Context) -> Result<f64> {
        match self {
            Payoff::Linear { theta } => {
                let x = ctx.as_real()?;
                if x.len() != theta.len() {
                    return Err(Error::ContextMismatch(format!(
                        "linear payoff expects dimension {}, got {}",
                        theta.len(),
                        x.len()
                    )));
                }
                if ctx.norm() > 1.0 + NORM_TOL {
                    return Err(Error::ContextMismatch(format!(
                        "linear context norm {} exceeds 1",
                        ctx.norm()
                    )));
                }
                let raw: f64 = theta.iter().zip(x).map(|(a, b)| a * b).sum();
                Ok(((raw + 1.0) / 2.0).clamp(0.0, 1.0))
            }
            Payoff::Conjunction { d, vars } => {
                let x = ctx.as_bool()?;
                if x.len() != *d {
                    return Err(Error::ContextMismatch(format!(
                        "conjunction expects dimension {d}, got {}",
                        x.len()
                    )));
                }
                Ok(if vars.iter().all(|&v| x[v]) { 1.0 } else { 0.0 })
            }
            Payoff::Dial => {
                let x = ctx.as_real()?;
                match x.first() {
                    Some(&v) if (0.0..=1.0).contains(&v) => Ok(v),
                    _ => Err(Error::ContextMismatch(format!(
                        "dial context must have a first coordinate in [0, 1], got {x:?}"
                    ))),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSpec {
    Classic { mean: f64 },
    Contextual { payoff: Payoff },
}

/// How a realized reward is drawn around the arm's expected payoff.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardModel {
    /// Reward is 1 with probability equal to the expected payoff, else 0.
    #[default]
    Bernoulli,
    /// Reward equals the expected payoff exactly.
    Deterministic,
}

/// Ground truth for a simulated bandit problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    arms: Vec<ArmSpec>,
    reward_model: RewardModel,
}

impl BanditInstance {
    pub fn new(arms: Vec<ArmSpec>, reward_model: RewardModel) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::InvalidParameter(
                "instance needs at least one arm".into(),
            ));
        }
        for (j, arm) in arms.iter().enumerate() {
            if let ArmSpec::Classic { mean } = arm {
                if !(0.0..=1.0).contains(mean) {
                    return Err(Error::InvalidParameter(format!(
                        "arm {j} mean {mean} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self { arms, reward_model })
    }

    /// Classic instance with Bernoulli arms of the given means.
    pub fn classic(means: &[f64]) -> Result<Self> {
        Self::new(
            means
                .iter()
                .map(|&mean| ArmSpec::Classic { mean })
                .collect(),
            RewardModel::Bernoulli,
        )
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn reward_model(&self) -> RewardModel {
        self.reward_model
    }

    pub fn is_classic(&self) -> bool {
        self.arms
            .iter()
            .all(|a| matches!(a, ArmSpec::Classic { .. }))
    }

    /// Means of a classic instance, `None` if any arm is contextual.
    pub fn means(&self) -> Option<Vec<f64>> {
        self.arms
            .iter()
            .map(|a| match a {
                ArmSpec::Classic { mean } => Some(*mean),
                ArmSpec::Contextual { .. } => None,
            })
            .collect()
    }

    /// Expected payoff `f_j(x)` of `arm` under `ctx`.
    pub fn expected(&self, arm: usize, ctx: &Context) -> Result<f64> {
        let spec = self
            .arms
            .get(arm)
            .ok_or(Error::ArmOutOfRange { arm, k: self.k() })?;
        match spec {
            ArmSpec::Classic { mean } => match ctx {
                Context::Unit => Ok(*mean),
                other => Err(Error::ContextMismatch(format!(
                    "classic arm {arm} expects a unit context, got {}",
                    other.kind()
                ))),
            },
            ArmSpec::Contextual { payoff } => payoff.value(ctx),
        }
    }

    /// Expected payoffs of every arm for one round's contexts.
    pub fn expected_all(&self, contexts: &[Context]) -> Result<Vec<f64>> {
        if contexts.len() != self.k() {
            return Err(Error::ArityMismatch(format!(
                "{} contexts for a {}-arm instance",
                contexts.len(),
                self.k()
            )));
        }
        contexts
            .iter()
            .enumerate()
            .map(|(j, c)| self.expected(j, c))
            .collect()
    }
}

/// Draws the realized reward of `arm` under `ctx`.
pub fn sample_reward(
    instance: &BanditInstance,
    arm: usize,
    ctx: &Context,
    rng: &mut SimRng,
) -> Result<f64> {
    let mean = instance.expected(arm, ctx)?;
    Ok(match instance.reward_model() {
        RewardModel::Bernoulli => {
            if rng.bernoulli(mean) {
                1.0
            } else {
                0.0
            }
        }
        RewardModel::Deterministic => mean,
    })
}

/// A policy's distribution over arms for one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmDistribution {
    probs: Vec<f64>,
}

impl ArmDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no arms".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    /// Uniform over `support`, zero elsewhere.
    pub fn uniform_over(k: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        let p = 1.0 / support.len() as f64;
        let mut probs = vec![0.0; k];
        for &j in support {
            if j >= k {
                return Err(Error::ArmOutOfRange { arm: j, k });
            }
            probs[j] = p;
        }
        Ok(Self { probs })
    }

    pub fn point_mass(k: usize, arm: usize) -> Result<Self> {
        Self::uniform_over(k, &[arm])
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, arm: usize) -> f64 {
        self.probs.get(arm).copied().unwrap_or(0.0)
    }

    /// Arms with strictly positive probability, in index order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.k()).filter(|&j| self.probs[j] > 0.0).collect()
    }

    /// Inverse-CDF draw; falls back to the last supported arm on rounding.
    pub fn sample(&self, rng: &mut SimRng) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (j, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc && *p > 0.0 {
                return j;
            }
        }
        self.support().last().copied().unwrap_or(0)
    }
}

/// One round of interaction, as seen by the auditor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    /// 1-based round index.
    pub t: usize,
    pub contexts: Vec<Context>,
    pub distribution: ArmDistribution,
    pub chosen: usize,
    pub reward: f64,
}

/// Ordered record of rounds with consecutive indices starting at 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    rows: Vec<RoundTrace>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[RoundTrace] {
        &self.rows
    }

    pub fn append_round(&mut self, row: RoundTrace) -> Result<()> {
        let expected = self.rows.len() + 1;
        if row.t != expected {
            return Err(Error::NonConsecutiveRound {
                expected,
                got: row.t,
            });
        }
        if row.distribution.prob(row.chosen) <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "round {}: chosen arm {} has zero probability",
                row.t, row.chosen
            )));
        }
        self.rows.push(row);
        Ok(())
    }
}

/// Functional form of [`Trace::append_round`].
pub fn append_round(mut trace: Trace, row: RoundTrace) -> Result<Trace> {
    trace.append_round(row)?;
    Ok(trace)
}
