pub mod outcomes;
pub mod price;
pub mod sweep;

pub use outcomes::{
    outcome_hitting_stats, outcome_hitting_stats_with, outcome_update, solve_outcomes, Outcome,
    OutcomeParams, OutcomeSolution,
};
pub use price::{
    delta_bar, price_set, solve_flexible, DeltaBar, FlexOptions, FlexParams, FlexSolution, PriceSet,
};
pub use sweep::{precision_sweep, sweep, sweep_with, SweepParam, SweepRow};
