//! Neyman–Scott processes with gamma-distributed cluster weights: forward
//! simulation, exact partition distributions and collapsed Gibbs inference.
//!
//! ```
//! use nsp::models::{GaussianConfig, GaussianModel};
//! use nsp::rng::streams;
//! use nsp::*;
//!
//! # fn main() -> nsp::Result<()> {
//! let domain = Domain::unit(2)?;
//! let model = GaussianModel::new(&GaussianConfig::isotropic(2, 5.0, 0.002), &domain)?;
//! let prior = GammaWeightPrior::new(1.0, 0.02, 6.0)?;
//! let bg = BackgroundModel::new(20.0, 1.0, 1.0)?;
//!
//! let data = generate(&model, &prior, &bg, &GenerateOptions::default(), &mut RngStream::new(1, streams::GENERATE))?;
//! let chain = run_chain(model, data.points, prior, bg, &ChainConfig::plain(20, 20), None, RngStream::new(1, streams::CHAIN_BASE))?;
//! assert_eq!(chain.samples.len(), 20);
//! # Ok(())
//! # }
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod eval;
pub mod generate;
pub mod gibbs;
pub mod math;
pub mod models;
pub mod parallel;
pub mod partition;
pub mod rng;

pub use domain::{Domain, GammaWeightPrior, LatentEvent, Mark, MarkedPoint, WordCounts};
pub use error::{NspError, Result};
pub use generate::{generate, sample_nsp, Construction, GenerateOptions, GeneratedDataset};
pub use gibbs::{run_chain, ChainConfig, ChainRecord, ChainSample, ChainState, SamplerMode};
pub use models::{BackgroundModel, ClusterModel};
pub use parallel::{run_parallel_chain, ShardPlan};
pub use partition::{Partition, PartitionPrior};
pub use rng::RngStream;
