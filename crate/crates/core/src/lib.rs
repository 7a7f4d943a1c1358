//! Effective CP rank of conditional probability tables.
//!
//! A conditional probability table `P(X | pa(X))` is a dense tensor with one
//! mode per parent and a final mode for the child. This crate fits sums of
//! rank-one tensors to such tables, finds the smallest rank whose worst-case
//! entry error stays under a threshold, and compares real tables against
//! random tables of the same shape.
//!
//! Layout of the crate:
//!
//! - [`tensor`]: dense tensors, CP models, unfoldings and Khatri-Rao products.
//! - [`decomp`]: ALS and Levenberg-Marquardt CP solvers with a multi-start driver.
//! - [`net`]: HUGIN `.net` parsing and writing, plus a JSON interchange format.
//! - [`analysis`]: rank profiles, minimal rank, parameter counts, random controls.
//! - [`report`]: corpus runs and CSV/JSON output used by the `cptrank` binary.

pub mod analysis;
pub mod decomp;
pub mod error;
pub mod net;
pub mod report;
pub mod tensor;

pub use analysis::{AnalysisConfig, MinimalRank, RankProfile};
pub use decomp::{FitResult, SolverConfig, StartKind};
pub use error::{Error, Result};
pub use net::{Network, NodeSpec};
pub use tensor::{khatri_rao, CpModel, Tensor};
