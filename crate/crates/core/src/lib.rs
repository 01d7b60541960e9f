//! Joint xApp deployment and sharing for a near-real-time RAN controller.
//!
//! Services are DAGs of RAN functions; each function is implemented by xApps
//! at several complexity levels. A deployment selects one configuration per
//! service, maps every function to an xApp instance (possibly shared across
//! services) and reserves cpu, memory and disk for each instance, maximizing
//! the deployed priority minus normalized resource use.
//!
//! Three policies produce an [`engine::OrchestrationPlan`]:
//! [`engine::solve`] (Lagrangian heuristic with feasibility repair),
//! [`exact::solve_exact`] (branch and bound, small instances) and
//! [`baseline::solve_baseline`] (monolithic, no sharing). Every plan can be
//! audited with [`state::check_feasibility`].

pub mod alloc;
pub mod baseline;
pub mod catalog;
pub mod engine;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod lagrangian;
pub mod par;
pub mod perf;
pub mod problem;
pub mod repair;
pub mod scenario;
pub mod state;
mod working;

pub use catalog::{Catalog, ConfigId, FunctionId, ResourceVector, ServiceId};
pub use engine::{EngineParams, OrchestrationPlan, StopReason};
pub use error::{Error, Result};
pub use par::Execution;
pub use state::{Assignment, DeploymentState, ViolationReport};
pub use working::InstKey;
