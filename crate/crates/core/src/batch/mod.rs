//! The multi-batched protocol: learners commit to a policy and a stopping
//! criterion per batch; runners execute batches with immediate or delayed
//! feedback.
//!
//! Under delays only feedback generated inside the current batch counts
//! toward its stopping criterion. Stragglers from earlier batches still reach
//! the learner and shape the next plan.

mod runner;
pub mod stop;

pub use runner::{
    run_delayed, run_delayed_with, run_undelayed, run_undelayed_with, BatchPlan, BatchRecord,
    EpisodeRecord, Feedback, MultiBatchedAlgorithm, RunLog, RunObserver,
};
pub use stop::{
    trigger_set, CountAtLeast, CountKey, DeterminantGrows, Never, StopCriterion,
    VisitCountDoubles,
};
