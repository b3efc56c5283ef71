use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A parse problem anchored to a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDiagnostics {
    pub path: PathBuf,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Error)]
pub enum DslError {
    #[error("{}", join_diagnostics(.0))]
    Syntax(Vec<Diagnostic>),
    #[error("duplicate protocol name `{0}`")]
    DuplicateProtocol(String),
    #[error("{} file(s) failed to parse", .0.len())]
    Corpus(Vec<FileDiagnostics>),
    #[error("invalid interchange document: {0}")]
    Document(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("duplicate {kind} type `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("unknown robot `{0}`")]
    UnknownRobot(String),
    #[error("device type `{0}` is not in the catalog")]
    UnknownDeviceType(String),
    #[error("robot type `{0}` is not in the catalog")]
    UnknownRobotType(String),
    #[error("inapplicable edit: {0}")]
    Inapplicable(String),
    #[error("invalid layout: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("k = {k} is out of range for {nodes} nodes")]
    KOutOfRange { k: usize, nodes: usize },
    #[error("recursion depth must be at least 1")]
    InvalidDepth,
    #[error("no device type provides capability `{0}`")]
    Uncoverable(String),
    #[error("cross-group dependencies need a robot type, but the catalog has none")]
    NoRobotType,
}

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("layout cannot execute the target corpus: {0}")]
    TargetNotExecutable(String),
    #[error("cannot scale: no catalog device provides capability `{0}`")]
    CannotScale(String),
    #[error("cannot scale: connecting devices needs a robot type, but the catalog has none")]
    NoRobotType,
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("protocols are not executable on the layout: {0}")]
    NotExecutable(String),
    #[error("no device type provides capability `{0}`")]
    Uncoverable(String),
    #[error("representative count {m} is out of range for {n} protocols")]
    SampleOutOfRange { m: usize, n: usize },
    #[error("fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),
    #[error("time window must be positive")]
    InvalidWindow,
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

#[derive(Debug, Error, PartialEq)]
pub enum ParetoError {
    #[error("objective schemas differ")]
    SchemaMismatch,
    #[error("no candidates")]
    Empty,
    #[error("preference weights must be nonnegative and not all zero")]
    InvalidWeights,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("every candidate was infeasible ({} rejected)", .0.len())]
    AllInfeasible(Vec<String>),
    #[error("empty sweep range")]
    EmptyRange,
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("inconsistent generator parameters: {0}")]
    InvalidParams(String),
}
