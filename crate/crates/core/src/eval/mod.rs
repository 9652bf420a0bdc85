//! Metrics and test oracles.

mod cooccupancy;
mod geweke;
mod heldout;
mod mask;
mod posterior;
pub mod stats;
mod summary;

pub use cooccupancy::{co_occupancy_accuracy, co_occupancy_accuracy_reference, posterior_co_occupancy};
pub use geweke::{geweke_successive, GewekeConfig, GewekeReport, MomentCheck};
pub use heldout::{heldout_log_likelihood, heldout_sample_ll, HeldOutScore};
pub use mask::{MaskRegion, SpeckledMask};
pub use posterior::{enumerate_posterior, enumerate_posterior_with, PosteriorTable, MAX_POSTERIOR_POINTS};
pub use summary::{compare_cluster_count, ClusterCountSummary};
