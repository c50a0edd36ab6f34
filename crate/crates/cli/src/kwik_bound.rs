//! Runs a single KWIK learner over an example stream and counts abstentions.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use chainfair::instances::{adversarial_conjunction_sequence, sample_unit_ball};
use chainfair::kwik::{kwik_feedback, kwik_predict, KwikBudget};
use chainfair::{
    BernoulliMean, ConjunctionEnum, Context, LearnerState, NoiselessLinear, Prediction, SimRng,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    ConjunctionEnum,
    NoiselessLinear,
    BernoulliMean,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::ConjunctionEnum => "conjunction_enum",
            LearnerKind::NoiselessLinear => "noiseless_linear",
            LearnerKind::BernoulliMean => "bernoulli_mean",
        }
    }
}

impl FromStr for LearnerKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conjunction_enum" => Ok(LearnerKind::ConjunctionEnum),
            "noiseless_linear" => Ok(LearnerKind::NoiselessLinear),
            "bernoulli_mean" => Ok(LearnerKind::BernoulliMean),
            other => Err(CliError::Config(format!(
                "unknown learner \"{other}\" (expected conjunction_enum, noiseless_linear or bernoulli_mean)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KwikBoundRequest {
    pub learner: LearnerKind,
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Stream length. The conjunction stream defaults to the full adversarial sequence.
    pub length: Option<usize>,
    pub seed: u64,
    /// CSV file with columns `x,y` (context encoding as in trace files) replacing the generated stream.
    pub sequence: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KwikBoundReport {
    pub learner: LearnerKind,
    pub d: usize,
    pub examples: usize,
    pub dont_know: u64,
    pub bound: u64,
    pub within_bound: bool,
    /// Largest gap between a numeric answer and the true target, when the stream has one.
    pub max_error: Option<f64>,
}

const DEFAULT_LENGTH: usize = 1000;

#[derive(Deserialize)]
struct SequenceRow {
    x: String,
    y: f64,
}

fn read_sequence(path: &Path) -> Result<Vec<(Context, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    })?;
    reader
        .deserialize::<SequenceRow>()
        .map(|row| {
            let row = row.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok((Context::decode(&row.x)?, row.y))
        })
        .collect()
}

/// Examples as `(x, label, target)`; `target` is `None` when only labels are known.
fn generate(req: &KwikBoundRequest, rng: &mut SimRng) -> Result<Vec<(Context, f64, Option<f64>)>> {
    let length = req.length.unwrap_or(DEFAULT_LENGTH);
    Ok(match req.learner {
        LearnerKind::ConjunctionEnum => {
            let seq = adversarial_conjunction_sequence(req.d)?;
            let n = req.length.unwrap_or(seq.len());
            seq.into_iter()
                .take(n)
                .map(|(x, y)| (x, y, Some(y)))
                .collect()
        }
        LearnerKind::NoiselessLinear => {
            let theta = sample_unit_ball(req.d, rng);
            (0..length)
                .map(|_| {
                    let mut x = sample_unit_ball(req.d, rng);
                    let mut f: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
                    if f < 0.0 {
                        x.iter_mut().for_each(|v| *v = -*v);
                        f = -f;
                    }
                    (Context::Real(x), f, Some(f))
                })
                .collect()
        }
        LearnerKind::BernoulliMean => {
            let mu = rng.uniform();
            (0..length)
                .map(|_| {
                    let y = if rng.bernoulli(mu) { 1.0 } else { 0.0 };
                    (Context::Unit, y, Some(mu))
                })
                .collect()
        }
    })
}

pub fn run_kwik_bound(req: &KwikBoundRequest) -> Result<KwikBoundReport> {
    let mut learner = match req.learner {
        LearnerKind::ConjunctionEnum => LearnerState::ConjunctionEnum(ConjunctionEnum::new(req.d)?),
        LearnerKind::NoiselessLinear => LearnerState::NoiselessLinear(NoiselessLinear::new(req.d)?),
        LearnerKind::BernoulliMean => {
            LearnerState::BernoulliMean(BernoulliMean::new(req.epsilon, req.delta)?)
        }
    };
    let mut budget = KwikBudget::for_learner(&learner);
    let mut rng = SimRng::new(req.seed);
    let examples = match &req.sequence {
        Some(path) => read_sequence(path)?
            .into_iter()
            .map(|(x, y)| (x, y, None))
            .collect(),
        None => generate(req, &mut rng)?,
    };
    let mut max_error: Option<f64> = None;
    for (x, y, target) in &examples {
        match kwik_predict(&learner, &mut budget, x)? {
            Prediction::DontKnow => kwik_feedback(&mut learner, x, *y)?,
            Prediction::Value(v) => {
                if let Some(f) = target {
                    let err = (v - f).abs();
                    max_error = Some(max_error.map_or(err, |m| m.max(err)));
                }
            }
        }
    }
    Ok(KwikBoundReport {
        learner: req.learner,
        d: req.d,
        examples: examples.len(),
        dont_know: budget.dont_know_count(),
        bound: budget.bound,
        within_bound: budget.within_bound(),
        max_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(learner: LearnerKind, d: usize) -> KwikBoundRequest {
        KwikBoundRequest {
            learner,
            d,
            epsilon: 0.1,
            delta: 0.05,
            length: None,
            seed: 4,
            sequence: None,
        }
    }

    #[test]
    fn conjunction_hits_its_bound() {
        let r = run_kwik_bound(&req(LearnerKind::ConjunctionEnum, 6)).unwrap();
        assert_eq!(r.dont_know, 63);
        assert_eq!(r.bound, 63);
        assert_eq!(r.max_error, None);
    }

    #[test]
    fn linear_abstains_at_most_d_times() {
        let r = run_kwik_bound(&req(LearnerKind::NoiselessLinear, 5)).unwrap();
        assert_eq!(r.dont_know, 5);
        assert!(r.max_error.unwrap() < 1e-6);
    }

    #[test]
    fn bernoulli_abstains_exactly_its_bound() {
        let r = run_kwik_bound(&req(LearnerKind::BernoulliMean, 1)).unwrap();
        assert_eq!(r.dont_know, r.bound);
        assert!(r.within_bound);
    }

    #[test]
    fn reads_a_sequence_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        std::fs::write(&path, "x,y\nb:011,0\nb:111,1\nb:011,0\n").unwrap();
        let mut r = req(LearnerKind::ConjunctionEnum, 3);
        r.sequence = Some(path);
        let out = run_kwik_bound(&r).unwrap();
        assert_eq!(out.examples, 3);
        assert!(out.dont_know >= 1 && out.dont_know <= 2);
    }

    #[test]
    fn unknown_learner_is_a_config_error() {
        assert!(matches!(
            "svm".parse::<LearnerKind>(),
            Err(CliError::Config(_))
        ));
    }
}
