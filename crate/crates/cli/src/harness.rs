//! Seeded trial runner shared by the subcommands and the acceptance suite.

use chainfair::audit::{audit_fairness, per_round_regret};
use chainfair::instances::{
    make_conjunction_instance, make_dial_instance, make_linear_instance, sample_bool_contexts,
    sample_linear_contexts, sample_lower_bound_instance, InstanceDump,
};
use chainfair::io::{interval_rows, IntervalRow};
use chainfair::model::RewardModel;
use chainfair::reductions::{
    compute_kwik_to_fair_params, ConstantBound, ContextualFairBandits, DoublingKwikToFair,
    FairToKwik, FairToKwikParams, HoeffdingBound, KwikBound, KwikToFair, KwikToFairParams,
};
use chainfair::{
    sample_reward, uniform_step, AffineLinear, ArmDistribution, BanditInstance, BernoulliMean,
    ConjunctionBandit, ConjunctionChoice, ConjunctionEnum, Context, FairBandits, LearnerState,
    Prediction, RoundTrace, SimRng, Ucb, ViolationReport,
};

use crate::config::{Algorithm, ExperimentConfig, InstanceConfig};
use crate::error::Result;

/// Everything recorded about one trial.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: u64,
    pub instance: BanditInstance,
    pub dump: InstanceDump,
    pub trace: Vec<RoundTrace>,
    /// Learner predictions per round, for algorithms driven by KWIK learners.
    pub predictions: Option<Vec<Vec<Prediction>>>,
    /// Interval snapshots after every round, for the chaining algorithm when requested.
    pub intervals: Option<Vec<IntervalRow>>,
    pub per_round_regret: Vec<f64>,
    pub report: ViolationReport,
    /// Rounds in which at least one learner abstained.
    pub dont_know_rounds: u64,
}

impl TrialResult {
    pub fn cumulative_regret(&self) -> Vec<f64> {
        let mut total = 0.0;
        self.per_round_regret
            .iter()
            .map(|r| {
                total += r;
                total
            })
            .collect()
    }

    pub fn total_regret(&self) -> f64 {
        self.per_round_regret.iter().sum()
    }

    /// Mean per-round regret over the closing [`final_window`] rounds.
    pub fn final_round_regret(&self) -> f64 {
        let n = self.per_round_regret.len();
        let w = final_window(n as u64).min(n).max(1);
        self.per_round_regret[n.saturating_sub(w)..]
            .iter()
            .sum::<f64>()
            / w as f64
    }
}

/// Rounds averaged when reporting the per-round regret at the horizon: the last 1%.
pub fn final_window(horizon: u64) -> usize {
    horizon.div_ceil(100).max(1) as usize
}

/// Draws the trial's instance from its own random stream.
pub fn draw_instance(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<BanditInstance> {
    Ok(match &cfg.instance {
        InstanceConfig::LowerBound { k } => sample_lower_bound_instance(*k, rng)?.instance(),
        InstanceConfig::Classic { means } => BanditInstance::classic(means)?,
        InstanceConfig::Linear { k, d } => {
            make_linear_instance(*d, *k, RewardModel::Deterministic, rng)?
        }
        InstanceConfig::Conjunction { k, d } => make_conjunction_instance(*d, *k, rng)?,
    })
}

fn draw_contexts(instance: &InstanceConfig, rng: &mut SimRng) -> Vec<Context> {
    match instance {
        InstanceConfig::LowerBound { k } => vec![Context::Unit; *k],
        InstanceConfig::Classic { means } => vec![Context::Unit; means.len()],
        InstanceConfig::Linear { k, d } => sample_linear_contexts(*k, *d, rng),
        InstanceConfig::Conjunction { k, d } => sample_bool_contexts(*k, *d, rng),
    }
}

/// Abstention bound of the learner family used on `instance`.
fn learner_bound(instance: &InstanceConfig) -> Box<dyn KwikBound + Send + Sync> {
    match instance {
        InstanceConfig::LowerBound { .. } | InstanceConfig::Classic { .. } => {
            Box::new(HoeffdingBound)
        }
        InstanceConfig::Linear { d, .. } => Box::new(ConstantBound((d + 1) as f64)),
        InstanceConfig::Conjunction { d, .. } => Box::new(ConstantBound(((1u64 << d) - 1) as f64)),
    }
}

fn make_learners(
    instance: &InstanceConfig,
    params: &KwikToFairParams,
) -> chainfair::Result<Vec<LearnerState>> {
    (0..instance.k())
        .map(|_| {
            Ok(match instance {
                InstanceConfig::LowerBound { .. } | InstanceConfig::Classic { .. } => {
                    LearnerState::BernoulliMean(BernoulliMean::new(
                        params.epsilon_star,
                        params.delta_star,
                    )?)
                }
                InstanceConfig::Linear { d, .. } => {
                    LearnerState::AffineLinear(AffineLinear::new(*d)?)
                }
                InstanceConfig::Conjunction { d, .. } => {
                    LearnerState::ConjunctionEnum(ConjunctionEnum::new(*d)?)
                }
            })
        })
        .collect()
}

type LearnerFactory =
    Box<dyn Fn(&KwikToFairParams) -> chainfair::Result<Vec<LearnerState>> + Send + Sync>;

enum Policy {
    Fair(FairBandits),
    Ucb(Ucb),
    Uniform(usize),
    Kwik(KwikToFair<LearnerState>),
    Doubling(Box<DoublingKwikToFair<LearnerState, LearnerFactory>>),
    Conjunction(ConjunctionBandit, Option<ConjunctionChoice>),
}

impl Policy {
    fn new(cfg: &ExperimentConfig, algorithm: Algorithm) -> Result<Self> {
        let k = cfg.instance.k();
        Ok(match algorithm {
            Algorithm::FairBandits => Policy::Fair(FairBandits::new(k, cfg.delta)?),
            Algorithm::Ucb => Policy::Ucb(Ucb::new(k)?),
            Algorithm::Uniform => Policy::Uniform(k),
            Algorithm::KwikToFair => {
                let bound = learner_bound(&cfg.instance);
                let mut params =
                    compute_kwik_to_fair_params(cfg.horizon, k, cfg.delta, bound.as_ref())?;
                if let Some(eps) = cfg.epsilon {
                    params.epsilon_star = eps;
                }
                let learners = make_learners(&cfg.instance, &params)?;
                Policy::Kwik(KwikToFair::new(learners, params, cfg.horizon)?)
            }
            Algorithm::KwikToFairDoubling => {
                let instance = cfg.instance.clone();
                let factory: LearnerFactory = Box::new(move |p| make_learners(&instance, p));
                Policy::Doubling(Box::new(DoublingKwikToFair::new(
                    k,
                    cfg.delta,
                    learner_bound(&cfg.instance),
                    factory,
                )?))
            }
            Algorithm::ConjunctionBandit => {
                let d = cfg.instance.d().unwrap_or(0);
                Policy::Conjunction(ConjunctionBandit::new(k, d)?, None)
            }
        })
    }

    fn act(
        &mut self,
        contexts: &[Context],
        rng: &mut SimRng,
    ) -> Result<(ArmDistribution, usize, Option<Vec<Prediction>>)> {
        Ok(match self {
            Policy::Fair(fb) => {
                let (d, a) = fb.step(rng);
                (d, a, None)
            }
            Policy::Ucb(ucb) => {
                let (d, a) = ucb.step();
                (d, a, None)
            }
            Policy::Uniform(k) => {
                let (d, a) = uniform_step(*k, rng)?;
                (d, a, None)
            }
            Policy::Kwik(alg) => {
                let r = alg.step(contexts, rng)?;
                (r.distribution, r.chosen, Some(r.predictions))
            }
            Policy::Doubling(alg) => {
                let r = alg.step(contexts, rng)?;
                (r.distribution, r.chosen, Some(r.predictions))
            }
            Policy::Conjunction(alg, last) => {
                let choice = alg.select(contexts, rng)?;
                let out = (choice.distribution.clone(), choice.chosen, None);
                *last = Some(choice);
                out
            }
        })
    }

    fn learn(&mut self, contexts: &[Context], arm: usize, reward: f64) -> Result<()> {
        match self {
            Policy::Fair(fb) => fb.update(arm, reward)?,
            Policy::Ucb(ucb) => ucb.update(arm, reward)?,
            Policy::Uniform(_) => {}
            Policy::Kwik(alg) => alg.feedback(arm, &contexts[arm], reward)?,
            Policy::Doubling(alg) => alg.feedback(arm, &contexts[arm], reward)?,
            Policy::Conjunction(alg, last) => {
                if let Some(choice) = last.take() {
                    alg.observe(&choice, reward);
                }
            }
        }
        Ok(())
    }
}

/// Runs trial `trial` of `cfg`. Interval snapshots are kept only when
/// `record_intervals` is set and the algorithm is the chaining algorithm.
pub fn run_trial(
    cfg: &ExperimentConfig,
    trial: u64,
    record_intervals: bool,
) -> Result<TrialResult> {
    let algorithm = cfg.validate()?;
    let mut rng = SimRng::for_trial(cfg.seed, trial);
    let instance = draw_instance(cfg, &mut rng)?;
    let dump = InstanceDump::from_instance(&instance, cfg.instance.family(), cfg.seed)?;
    let mut policy = Policy::new(cfg, algorithm)?;

    let horizon = cfg.horizon as usize;
    let mut trace = Vec::with_capacity(horizon);
    let mut predictions = algorithm
        .uses_learners()
        .then(|| Vec::with_capacity(horizon));
    let keep_intervals = record_intervals && algorithm == Algorithm::FairBandits;
    let mut intervals = keep_intervals.then(Vec::new);
    let mut dont_know_rounds = 0;

    for t in 1..=horizon {
        let contexts = draw_contexts(&cfg.instance, &mut rng);
        let (distribution, chosen, preds) = policy.act(&contexts, &mut rng)?;
        let reward = sample_reward(&instance, chosen, &contexts[chosen], &mut rng)?;
        policy.learn(&contexts, chosen, reward)?;
        if let (Some(all), Some(p)) = (predictions.as_mut(), preds) {
            if p.iter().any(Prediction::is_dont_know) {
                dont_know_rounds += 1;
            }
            all.push(p);
        }
        if let (Some(rows), Policy::Fair(fb)) = (intervals.as_mut(), &policy) {
            rows.extend(interval_rows(t, fb));
        }
        trace.push(RoundTrace {
            t,
            contexts,
            distribution,
            chosen,
            reward,
        });
    }

    let report = audit_fairness(&trace, &instance)?;
    let per_round_regret = per_round_regret(&trace, &instance)?;
    Ok(TrialResult {
        trial,
        instance,
        dump,
        trace,
        predictions,
        intervals,
        per_round_regret,
        report,
        dont_know_rounds,
    })
}

/// Outcome of one learning run of the fair-to-KWIK reduction on a dial instance.
#[derive(Clone, Debug, PartialEq)]
pub struct FairToKwikTrial {
    /// `(prediction, target)` for every numeric answer.
    pub values: Vec<(f64, f64)>,
    pub dont_know: u64,
    /// Pseudo-regret of the wrapped algorithm over its committed rounds.
    pub committed_regret: f64,
}

/// Wraps the tabular chaining algorithm in the fair-to-KWIK reduction and
/// answers `horizon` queries drawn from a dial instance's context pool.
pub fn run_fair_to_kwik_trial(
    epsilon: f64,
    delta: f64,
    horizon: u64,
    d: usize,
    pool_size: usize,
    seed: u64,
    trial: u64,
) -> Result<FairToKwikTrial> {
    let mut rng = SimRng::for_trial(seed, trial);
    let dial = make_dial_instance(d, pool_size, &mut rng)?;
    let params = FairToKwikParams::new(epsilon, delta, horizon)?;
    let policy = ContextualFairBandits::new(2, params.delta_star)?;
    let mut learner = FairToKwik::new(params, policy)?;
    let mut values = Vec::new();
    let mut committed_regret = 0.0;
    for _ in 0..horizon {
        let x = dial.pool[rng.index(dial.pool.len())].clone();
        let f = dial.target(&x)?;
        let step = learner.step(&x, |r| if r.bernoulli(f) { 1.0 } else { 0.0 }, &mut rng)?;
        if let Prediction::Value(v) = step.prediction {
            values.push((v, f));
        }
        if let Some(c) = step.committed {
            let payoffs = dial.instance.expected_all(&c.contexts)?;
            let best = payoffs[0].max(payoffs[1]);
            let played = c.distribution.prob(0) * payoffs[0] + c.distribution.prob(1) * payoffs[1];
            committed_regret += (best - played).max(0.0);
        }
    }
    Ok(FairToKwikTrial {
        values,
        dont_know: learner.dont_know_count(),
        committed_regret,
    })
}
