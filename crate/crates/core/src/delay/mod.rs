//! Integer episode delays and the queue that releases delayed feedback.
//!
//! A trajectory emitted at episode `t` with delay `tau` becomes usable at the
//! end of episode `t + tau`. Zero delays are allowed.

mod queue;
mod sampler;

pub use queue::{Arrival, ArrivalQueue};
pub use sampler::{DelayLaw, DelaySampler, SubExp};
