//! Fair multi-armed and contextual bandits.
//!
//! The crate provides the chaining algorithm for classic bandits, unfair
//! baselines, KWIK learners, the two reductions between fair bandit
//! learning and KWIK learning, instance generators, and an auditor that
//! checks recorded play against ground truth.

pub mod audit;
pub mod baselines;
pub mod error;
pub mod fair_bandits;
pub mod instances;
pub mod io;
pub mod kwik;
pub mod model;
pub mod reductions;
pub mod rng;

pub use audit::{
    audit_fairness, cumulative_pseudo_regret, per_round_regret, AuditSummary, Violation,
    ViolationReport,
};
pub use baselines::{uniform_step, ConjunctionBandit, ConjunctionChoice, Ucb};
pub use error::{Error, Result};
pub use fair_bandits::{
    chained_set, confidence_radius, top_arm, ArmEstimate, ConfidenceInterval, FairBandits, Overlap,
};
pub use kwik::{
    AffineLinear, BernoulliMean, ConjunctionEnum, KwikBudget, KwikLearner, LearnerState,
    NoiselessLinear, Prediction,
};
pub use model::{
    append_round, sample_reward, ArmDistribution, ArmSpec, BanditInstance, Context, ContextKey,
    Payoff, RewardModel, RoundTrace, Trace,
};
pub use rng::SimRng;
