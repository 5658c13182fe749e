//! Bandit-based algorithm configuration over instance sets.
//!
//! The crate implements an iterated combinatorial successive elimination
//! configurator (`acband`, `cse`) with a capped parallel cost model
//! (`oracle`, `runner`), the budget mathematics behind its epoch schedule
//! (`theory`), a Hyperband-style baseline adapted to instance budgets
//! (`hyperband`), evaluation metrics (`metrics`), and a synthetic scenario
//! generator with known ground truth (`data`). The `cli` module backs the
//! `acband` binary.

pub mod acband;
pub mod cli;
pub mod cse;
pub mod data;
pub mod domain;
pub mod error;
pub mod hyperband;
pub mod metrics;
pub mod oracle;
pub mod runner;
pub mod statistics;
pub mod theory;
pub mod trace;

pub use crate::acband::{epoch_schedule, n_alpha_delta, run_acband, EpochSchedule, RunResult};
pub use crate::cse::{cse_schedule, f_rho, partition_configs, run_cse, CseSchedule};
pub use crate::domain::{rank_with_ties, AcBandParams, ConfigId, InstanceId, SeededRng};
pub use crate::error::{Error, Result};
pub use crate::hyperband::{hb_plan, run_hyperband, BracketPlan, HyperbandParams};
pub use crate::oracle::{GroupOutcome, MatrixOracle, Oracle, RuntimeMatrix};
pub use crate::statistics::{StatisticKind, StatisticState};
