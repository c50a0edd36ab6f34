//! Reductions between fair contextual bandits and KWIK learning.

pub mod fair_query;
pub mod fair_to_kwik;
pub mod kwik_to_fair;

pub use fair_query::{fair_query, ContextualFairBandits, FairPolicy, HistoryRound};
pub use fair_to_kwik::{
    read_levels, CommittedRound, FairToKwik, FairToKwikParams, FairToKwikStep, TIE_TOL,
};
pub use kwik_to_fair::{
    compute_kwik_to_fair_params, distribution_from_predictions, epoch_delta, epoch_of_round,
    ConstantBound, DoublingKwikToFair, HoeffdingBound, KwikBound, KwikRound, KwikToFair,
    KwikToFairParams,
};
