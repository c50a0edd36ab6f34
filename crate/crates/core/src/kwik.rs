//! "Knows what it knows" learners.
//!
//! A KWIK learner either predicts a value within `epsilon` of the target or
//! abstains with [`Prediction::DontKnow`], and it may abstain at most `m`
//! times over any example sequence (its KWIK bound). Three learners are
//! provided:
//!
//! * [`BernoulliMean`] for context-free arms, via a Hoeffding interval;
//! * [`NoiselessLinear`] for noiseless linear targets, abstaining only on
//!   contexts outside the span of what it has seen (bound `d`);
//! * [`ConjunctionEnum`] for boolean conjunctions, by version-space
//!   enumeration (bound `2^d - 1`).
//!
//! Learners accept feedback at any time, not just after abstaining; extra
//! feedback only narrows what they consider possible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair_bandits::check_delta;
use crate::model::{Context, NORM_TOL};

/// Residual norm below which a context counts as inside the stored span.
pub const SPAN_TOL: f64 = 1e-9;

/// Largest dimension the conjunction enumerator accepts.
pub const MAX_ENUM_DIM: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    Value(f64),
    DontKnow,
}

impl Prediction {
    pub fn value(v: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&v) {
            Ok(Prediction::Value(v))
        } else {
            Err(Error::InvalidParameter(format!(
                "prediction {v} outside [0, 1]"
            )))
        }
    }

    pub fn is_dont_know(&self) -> bool {
        matches!(self, Prediction::DontKnow)
    }

    pub fn as_value(&self) -> Option<f64> {
        match self {
            Prediction::Value(v) => Some(*v),
            Prediction::DontKnow => None,
        }
    }
}

/// Accuracy/confidence targets of a learner together with its abstention tally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KwikBudget {
    pub epsilon: f64,
    pub delta: f64,
    /// Declared KWIK bound `m(epsilon, delta)`.
    pub bound: u64,
    dont_know_count: u64,
}

impl KwikBudget {
    pub fn new(epsilon: f64, delta: f64, bound: u64) -> Self {
        Self {
            epsilon,
            delta,
            bound,
            dont_know_count: 0,
        }
    }

    /// Budget matching a learner's own parameters.
    pub fn for_learner(learner: &LearnerState) -> Self {
        let (epsilon, delta) = match learner {
            LearnerState::BernoulliMean(b) => (b.epsilon, b.delta_alloc),
            _ => (0.0, 0.0),
        };
        Self::new(epsilon, delta, learner.kwik_bound())
    }

    pub fn record(&mut self, prediction: &Prediction) {
        if prediction.is_dont_know() {
            self.dont_know_count += 1;
        }
    }

    pub fn dont_know_count(&self) -> u64 {
        self.dont_know_count
    }

    pub fn within_bound(&self) -> bool {
        self.dont_know_count <= self.bound
    }
}

pub trait KwikLearner {
    /// Pure query: never changes the learner.
    fn predict(&self, x: &Context) -> Result<Prediction>;

    /// Reveals a label `y` with `E[y] = f(x)`.
    fn feedback(&mut self, x: &Context, y: f64) -> Result<()>;

    /// Maximum number of abstentions over any example sequence (given feedback after each).
    fn kwik_bound(&self) -> u64;
}

/// Queries `learner` and tallies an abstention in `budget`.
pub fn kwik_predict<L: KwikLearner + ?Sized>(
    learner: &L,
    budget: &mut KwikBudget,
    x: &Context,
) -> Result<Prediction> {
    let p = learner.predict(x)?;
    budget.record(&p);
    Ok(p)
}

pub fn kwik_feedback<L: KwikLearner + ?Sized>(learner: &mut L, x: &Context, y: f64) -> Result<()> {
    learner.feedback(x, y)
}

/// `ceil(ln(2 / delta) / (2 epsilon^2))`, the abstention bound of [`BernoulliMean`].
pub fn hoeffding_bound(epsilon: f64, delta: f64) -> u64 {
    hoeffding_samples(epsilon, delta).ceil() as u64
}

fn hoeffding_samples(epsilon: f64, delta: f64) -> f64 {
    (2.0 / delta).ln() / (2.0 * epsilon * epsilon)
}

/// Predicts the running mean once the Hoeffding radius
/// `sqrt(ln(2 / delta) / (2 count))` is at most `epsilon`.
pub fn bernoulli_mean_rule(sum: f64, count: u64, epsilon: f64, delta_alloc: f64) -> Prediction {
    // radius <= epsilon  <=>  count >= ln(2/delta) / (2 epsilon^2); the
    // count form keeps the abstention tally exactly at `hoeffding_bound`
    if count > 0 && count as f64 >= hoeffding_samples(epsilon, delta_alloc) {
        Prediction::Value((sum / count as f64).clamp(0.0, 1.0))
    } else {
        Prediction::DontKnow
    }
}

/// Hoeffding-interval learner for the mean of a bounded reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliMean {
    epsilon: f64,
    delta_alloc: f64,
    sum: f64,
    count: u64,
}

impl BernoulliMean {
    pub fn new(epsilon: f64, delta_alloc: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {epsilon} outside (0, 1]"
            )));
        }
        check_delta(delta_alloc)?;
        Ok(Self {
            epsilon,
            delta_alloc,
            sum: 0.0,
            count: 0,
        })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

impl KwikLearner for BernoulliMean {
    fn predict(&self, x: &Context) -> Result<Prediction> {
        if !matches!(x, Context::Unit) {
            return Err(Error::ContextMismatch(format!(
                "mean learner expects a unit context, got {}",
                x.kind()
            )));
        }
        Ok(bernoulli_mean_rule(
            self.sum,
            self.count,
            self.epsilon,
            self.delta_alloc,
        ))
    }

    fn feedback(&mut self, _x: &Context, y: f64) -> Result<()> {
        self.sum += y;
        self.count += 1;
        Ok(())
    }

    fn kwik_bound(&self) -> u64 {
        hoeffding_bound(self.epsilon, self.delta_alloc)
    }
}

/// Learner for noiseless linear targets `f(x) = <theta, x>`.
///
/// Stores an orthonormal basis of the observed contexts together with the
/// target's value on each basis vector; a context inside that span has a
/// unique prediction, anything else is unknown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiselessLinear {
    dim: usize,
    observed: Vec<(Vec<f64>, f64)>,
    basis: Vec<Vec<f64>>,
    basis_labels: Vec<f64>,
}

impl NoiselessLinear {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionOutOfRange {
                d: 0,
                min: 1,
                max: usize::MAX,
            });
        }
        Ok(Self {
            dim,
            observed: Vec::new(),
            basis: Vec::new(),
            basis_labels: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Contexts that extended the span, with their labels.
    pub fn observed(&self) -> &[(Vec<f64>, f64)] {
        &self.observed
    }

    fn checked<'a>(&self, x: &'a Context) -> Result<&'a [f64]> {
        let v = x.as_real()?;
        if v.len() != self.dim {
            return Err(Error::ContextMismatch(format!(
                "expected dimension {}, got {}",
                self.dim,
                v.len()
            )));
        }
        if x.norm() > 1.0 + NORM_TOL {
            return Err(Error::ContextMismatch(format!(
                "context norm {} exceeds 1",
                x.norm()
            )));
        }
        Ok(v)
    }

    /// Residual of `x` after projecting out the basis, and the value the
    /// stored labels assign to the projected part.
    fn project(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let mut r = x.to_vec();
        let mut value = 0.0;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for (q, label) in self.basis.iter().zip(&self.basis_labels) {
                let c = dot(&r, q);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= c * qi;
                }
                value += c * label;
            }
        }
        (r, value)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl KwikLearner for NoiselessLinear {
    fn predict(&self, x: &Context) -> Result<Prediction> {
        let v = self.checked(x)?;
        let (r, value) = self.project(v);
        if dot(&r, &r).sqrt() <= SPAN_TOL {
            Ok(Prediction::Value(value.clamp(0.0, 1.0)))
        } else {
            Ok(Prediction::DontKnow)
        }
    }

    fn feedback(&mut self, x: &Context, y: f64) -> Result<()> {
        let v = self.checked(x)?.to_vec();
        let (r, value) = self.project(&v);
        let norm = dot(&r, &r).sqrt();
        if norm > SPAN_TOL {
            self.basis.push(r.iter().map(|ri| ri / norm).collect());
            self.basis_labels.push((y - value) / norm);
            self.observed.push((v, y));
        }
        Ok(())
    }

    fn kwik_bound(&self) -> u64 {
        self.dim as u64
    }
}

/// Lifts `x` to `(x, 1) / sqrt(2)`.
///
/// The rescaled linear payoff `(<theta, x> + 1) / 2` equals
/// `<(theta, 1) / sqrt(2), lift(x)>`, a linear function with weight and
/// context both in the unit ball.
pub fn affine_lift(x: &[f64]) -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    x.iter().map(|v| v * s).chain(std::iter::once(s)).collect()
}

/// [`NoiselessLinear`] on lifted contexts, for the rescaled linear payoff family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineLinear {
    inner: NoiselessLinear,
}

impl AffineLinear {
    /// Learner for raw contexts of dimension `dim`.
    pub fn new(dim: usize) -> Result<Self> {
        Ok(Self {
            inner: NoiselessLinear::new(dim + 1)?,
        })
    }

    pub fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn lift(&self, x: &Context) -> Result<Context> {
        Ok(Context::Real(affine_lift(x.as_real()?)))
    }
}

impl KwikLearner for AffineLinear {
    fn predict(&self, x: &Context) -> Result<Prediction> {
        self.inner.predict(&self.lift(x)?)
    }

    fn feedback(&mut self, x: &Context, y: f64) -> Result<()> {
        let lifted = self.lift(x)?;
        self.inner.feedback(&lifted, y)
    }

    fn kwik_bound(&self) -> u64 {
        self.inner.kwik_bound()
    }
}

/// Version-space learner over all conjunctions of `d` boolean variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjunctionEnum {
    d: usize,
    /// Variable sets (bit masks) of the conjunctions still consistent with the feedback.
    version_space: Vec<u32>,
}

impl ConjunctionEnum {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 || d > MAX_ENUM_DIM {
            return Err(Error::DimensionOutOfRange {
                d,
                min: 1,
                max: MAX_ENUM_DIM,
            });
        }
        Ok(Self {
            d,
            version_space: (0..1u32 << d).collect(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn version_space_size(&self) -> usize {
        self.version_space.len()
    }

    /// Surviving conjunctions as sorted lists of 0-based variables.
    pub fn version_space(&self) -> Vec<Vec<usize>> {
        self.version_space
            .iter()
            .map(|&s| (0..self.d).filter(|i| s & (1 << i) != 0).collect())
            .collect()
    }

    pub fn contains(&self, vars: &[usize]) -> bool {
        let mask = vars.iter().fold(0u32, |m, v| m | (1 << v));
        self.version_space.binary_search(&mask).is_ok()
    }

    fn mask(&self, x: &Context) -> Result<u32> {
        if x.dim() != self.d {
            return Err(Error::ContextMismatch(format!(
                "expected dimension {}, got {}",
                self.d,
                x.dim()
            )));
        }
        Ok(x.bool_mask()? as u32)
    }
}

fn conjunction_holds(vars: u32, x: u32) -> bool {
    vars & !x == 0
}

impl KwikLearner for ConjunctionEnum {
    fn predict(&self, x: &Context) -> Result<Prediction> {
        let m = self.mask(x)?;
        let mut labels = self.version_space.iter().map(|&s| conjunction_holds(s, m));
        let Some(first) = labels.next() else {
            return Ok(Prediction::DontKnow);
        };
        if labels.all(|l| l == first) {
            Ok(Prediction::Value(if first { 1.0 } else { 0.0 }))
        } else {
            Ok(Prediction::DontKnow)
        }
    }

    fn feedback(&mut self, x: &Context, y: f64) -> Result<()> {
        let m = self.mask(x)?;
        let label = y >= 0.5;
        self.version_space
            .retain(|&s| conjunction_holds(s, m) == label);
        Ok(())
    }

    fn kwik_bound(&self) -> u64 {
        (1u64 << self.d) - 1
    }
}

/// Any of the concrete learners, for callers that pick one at run time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LearnerState {
    BernoulliMean(BernoulliMean),
    NoiselessLinear(NoiselessLinear),
    AffineLinear(AffineLinear),
    ConjunctionEnum(ConjunctionEnum),
}

impl KwikLearner for LearnerState {
    fn predict(&self, x: &Context) -> Result<Prediction> {
        match self {
            LearnerState::BernoulliMean(l) => l.predict(x),
            LearnerState::NoiselessLinear(l) => l.predict(x),
            LearnerState::AffineLinear(l) => l.predict(x),
            LearnerState::ConjunctionEnum(l) => l.predict(x),
        }
    }

    fn feedback(&mut self, x: &Context, y: f64) -> Result<()> {
        match self {
            LearnerState::BernoulliMean(l) => l.feedback(x, y),
            LearnerState::NoiselessLinear(l) => l.feedback(x, y),
            LearnerState::AffineLinear(l) => l.feedback(x, y),
            LearnerState::ConjunctionEnum(l) => l.feedback(x, y),
        }
    }

    fn kwik_bound(&self) -> u64 {
        match self {
            LearnerState::BernoulliMean(l) => l.kwik_bound(),
            LearnerState::NoiselessLinear(l) => l.kwik_bound(),
            LearnerState::AffineLinear(l) => l.kwik_bound(),
            LearnerState::ConjunctionEnum(l) => l.kwik_bound(),
        }
    }
}
