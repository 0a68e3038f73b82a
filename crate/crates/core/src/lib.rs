//! Randomized coordinate descent for pairwise learning, with tools to measure
//! its argument stability and evaluate generalization and optimization bounds.
//!
//! The main entry points are [`risk::RiskModel`] (the pairwise empirical risk),
//! [`optim::rcd_run`] and [`optim::sgd_pairwise_run`], the paired-run stability
//! protocol in [`stability`], and the bound evaluators in [`bounds`].

pub mod bounds;
pub mod data;
pub mod error;
pub mod loss;
pub mod optim;
pub mod parallel;
pub mod risk;
pub mod rng;
pub mod stability;

pub use data::{Dataset, Example, NeighborPair};
pub use error::{Error, Result, Side};
pub use loss::{Family, Link, LossConstants, PairwiseLoss};
pub use optim::{RunConfig, Schedule, Trajectory};
pub use parallel::Execution;
pub use risk::{PairPolicy, RiskModel, ScoreCache};
