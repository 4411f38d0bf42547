//! Exact filtering in the discrete collision model: conditional pairs, their
//! recurrences for counting and homodyne measurements, closed forms for
//! given count records, the mixed-state filter and trajectory sampling.

pub mod closed_form;
pub mod mixed;
pub mod pair;
pub mod sampling;

pub use closed_form::{closed_form_pair, closed_form_pair_general, CountRecordDiscrete};
pub use mixed::{mixed_counting_step, mixed_homodyne_step, MixedPairState};
pub use pair::{
    branch_operators, counting_step, first_order_intensities, homodyne_step, measurement_step, outcome_distribution,
    pair_trace, posterior_density, scenario_probabilities, BranchOperators, ConditionalPair, Measurement,
};
pub use sampling::{
    enumerate_outcomes, sample_trajectory, sample_trajectory_seeded, DiscreteTrajectory, SampleOptions,
    MAX_ENUMERATION_STEPS,
};
