//! Strategyproof mechanisms for multi-agent path finding with self-interested
//! agents.
//!
//! Agents report a cost rate and a value for reaching their goal; a mechanism
//! picks conflict-free paths and charges payments so that truthful reporting
//! is a dominant strategy:
//!
//! - **PCBS**: welfare-optimal CBS with VCG payments.
//! - **EPBS**: maximal-in-range over the leaves of an exhaustive
//!   priority-based search tree.
//! - **MCPP**: maximal-in-range over prioritized planning on sampled
//!   priority orderings.
//! - **FCFS**: prioritized planning on one random ordering, no payments.

pub mod assignment;
pub mod cbs;
pub mod grid;
pub mod instance;
pub mod mechanism;
pub mod oracle;
pub mod path;
pub mod pbs;
pub mod planner;
pub mod priority;
pub mod rng;
pub mod scenario;

pub use assignment::{Assignment, AssignmentSource, Deadline, Timeout};
pub use grid::{load_map, random_grid, Cell, GridWorld, MapError, Vertex};
pub use instance::{sample_instance, AgentType, Distribution, Instance, InstanceError, ReportProfile, SamplingConfig};
pub use mechanism::{run, MechanismKind, MechanismOutcome, MechanismSpec, RunStats, Sampling};
pub use path::{find_first_conflict, welfare, Conflict, Path};
pub use planner::{ConstraintSet, ReservationTable, SpaceTimePlanner};
pub use priority::{prioritized_plan, sample_orderings, PriorityOrdering};
