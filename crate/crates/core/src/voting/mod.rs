//! Discrete noise stability of voting rules.

mod channel;
mod influence;
mod rule;
mod stability;

pub use channel::{corrupt_ballot, TransitionModel};
pub use influence::{influences, influences_mc, InfluenceVector};
pub use rule::{ballot_count, RuleKind, VotingRule, TABLE_LIMIT};
pub use stability::{
    discrete_stability_exact, discrete_stability_mc, discrete_stability_mc_sweep, expected_output,
    plurality_stability_limit, ENUMERATION_BUDGET,
};
