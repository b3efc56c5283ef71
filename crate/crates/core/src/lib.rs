//! Layout synthesis for protocol-driven automation systems.
//!
//! Protocols written in a small DSL are profiled into a dependency matrix,
//! partitioned into device groups, instantiated as layouts of devices,
//! pipelines and robots, scored on executability and efficiency objectives,
//! and reduced to a Pareto front.

pub mod catalog;
pub mod cli;
pub mod corpusgen;
pub mod dependence;
pub mod dsl;
pub mod error;
pub mod executability;
pub mod layout;
pub mod objectives;
pub mod pareto;
pub mod partition;
pub mod protocol;
pub mod scheduler;
pub mod sweep;

pub use catalog::{Catalog, DeviceType, RobotType};
pub use dependence::{build_pdg, profile_capabilities, profile_dependencies, DependenceGraph, DependencyMatrix, StepGraph};
pub use dsl::{parse_corpus, parse_protocol, parse_protocols, to_dsl};
pub use executability::{check_executable, Checker, ExecutabilityReport, FailureCause};
pub use layout::{Connection, EditOp, Element, Layout, Rho};
pub use protocol::{Corpus, CorpusRole, OpId, Operation, Protocol};
