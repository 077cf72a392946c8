//! Joint power allocation and link selection for multicell cooperative NOMA
//! downlinks over hybrid VLC/RF links.
//!
//! Each AP serves a strong (cell-centre) and a weak (cell-edge) user with
//! power-domain NOMA. The weak user is served either directly over VLC or by
//! the strong user, which decodes its message and forwards it over an RF link
//! powered by light harvested from the DC bias.
//!
//! * [`channel`]: geometry, channel gains, harvested relay power.
//! * [`rates`]: achievable rates and per-cell coefficients.
//! * [`cell`]: closed-form per-cell power split and link selection.
//! * [`network`]: golden-section AP power optimization.
//! * [`oracle`]: brute-force references for validation.
//! * [`experiment`]: Monte-Carlo experiments.
//! * [`study`]: the sweep study, its figure CSVs and run manifest.
//! * [`validate`]: randomised self-checks against the oracles.

pub mod cell;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod network;
pub mod oracle;
pub mod rates;
pub mod study;
pub mod validate;

pub use cell::{solve_cell, CellSolution, LinkPolicy};
pub use channel::{Layout, NetworkScenario, PhysicalParams, Point3};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentResult, Scheme};
pub use network::{optimize, ConvergenceTrace, Optimization, OptimizerConfig};
pub use rates::{evaluate, jain_index, PowerState, RateReport};
