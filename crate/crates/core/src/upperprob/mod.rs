//! Exact oracles for upper probabilities of events over short binary
//! sequences, and sweeps that check the bounds relating them.

mod events;
mod probability;
mod reckless;
mod verify;

pub use events::{
    index_to_bitstring, index_to_sequence, parse_bitstring, sequence_to_index, EventSet,
    MAX_HORIZON,
};
pub use probability::{
    binomial, iid_probability, ln_binomial, ucp_bracket, uep_from_counts, uep_prob, uiid_prob,
    UcpBracket, UiidMaximum, UiidOptimizer, GRID_CELLS, REFINE_TOLERANCE,
};
pub use reckless::{identity_pvalues, Exact, ExactPiece, RecklessMartingale, RecklessStrategy};
pub use verify::{
    ln_balanced_probability, random_event, sharp_constant, stirling_checks, stirling_remainder,
    verify_prop1, verify_prop2, Prop1Report, Prop2Report, StirlingReport, PROP1_CONSTANT,
    ROUNDING_SLACK,
};
