//! Protocol model: operations with pre/postcondition resource sets, and the
//! JSON interchange document.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::DslError;

/// Position of an operation in its protocol, starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpId(pub u32);

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A parameter value with an optional unit suffix, e.g. `37` + `C`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamValue {
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl ParamValue {
    /// Splits a raw token into a numeric prefix and a unit suffix. Tokens
    /// that do not start with a number are kept whole, without a unit.
    pub fn parse(raw: &str) -> Self {
        let bytes = raw.as_bytes();
        let mut end = 0;
        if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
            end += 1;
        }
        let digits_start = end;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end == digits_start {
            return ParamValue { value: raw.to_string(), unit: None };
        }
        if end + 1 < bytes.len() && bytes[end] == b'.' && bytes[end + 1].is_ascii_digit() {
            end += 1;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
        }
        let unit = &raw[end..];
        ParamValue {
            value: raw[..end].to_string(),
            unit: (!unit.is_empty()).then(|| unit.to_string()),
        }
    }

    pub fn to_token(&self) -> String {
        match &self.unit {
            Some(u) => format!("{}{}", self.value, u),
            None => self.value.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operation {
    pub id: OpId,
    pub op_type: String,
    pub preconditions: BTreeSet<String>,
    pub postconditions: BTreeSet<String>,
    pub parameters: BTreeMap<String, ParamValue>,
    /// Seconds. `None` means the catalog supplies the duration.
    pub duration: Option<f64>,
}

impl Operation {
    pub fn new(id: u32, op_type: impl Into<String>) -> Self {
        Operation {
            id: OpId(id),
            op_type: op_type.into(),
            preconditions: BTreeSet::new(),
            postconditions: BTreeSet::new(),
            parameters: BTreeMap::new(),
            duration: None,
        }
    }

    pub fn with_inputs<I, S>(mut self, inputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.preconditions.extend(inputs.into_iter().map(Into::into));
        self
    }

    pub fn with_outputs<I, S>(mut self, outputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.postconditions.extend(outputs.into_iter().map(Into::into));
        self
    }

    pub fn with_duration(mut self, seconds: f64) -> Self {
        self.duration = Some(seconds);
        self
    }

    pub fn with_param(mut self, key: impl Into<String>, raw: &str) -> Self {
        self.parameters.insert(key.into(), ParamValue::parse(raw));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub name: String,
    pub operations: Vec<Operation>,
}

/// `(op_type, inputs, outputs, duration)` shorthand for one operation.
pub type StepSpec<'a> = (&'a str, &'a [&'a str], &'a [&'a str], Option<f64>);

impl Protocol {
    pub fn new(name: impl Into<String>, operations: Vec<Operation>) -> Self {
        Protocol { name: name.into(), operations }
    }

    /// Convenience constructor for straight-line protocols; ids follow
    /// position.
    pub fn from_steps(name: &str, steps: &[StepSpec<'_>]) -> Self {
        let operations = steps
            .iter()
            .enumerate()
            .map(|(i, (ty, ins, outs, dur))| {
                let mut op = Operation::new(i as u32, *ty)
                    .with_inputs(ins.iter().copied())
                    .with_outputs(outs.iter().copied());
                op.duration = *dur;
                op
            })
            .collect();
        Protocol::new(name, operations)
    }

    pub fn op_types(&self) -> BTreeSet<&str> {
        self.operations.iter().map(|o| o.op_type.as_str()).collect()
    }

    /// Checks the structural invariants the parser guarantees.
    pub fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() {
            return Err("protocol name is empty".into());
        }
        let mut seen = BTreeSet::new();
        for op in &self.operations {
            if !seen.insert(op.id) {
                return Err(format!("duplicate operation id {}", op.id));
            }
            if let Some(d) = op.duration {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(format!("operation {} has non-positive duration", op.id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusRole {
    /// The required scope `C`.
    #[default]
    Target,
    /// Candidate protocols for flexibility, `C*`.
    Universe,
    /// Protocols the layout should scale to, `C**`.
    Scaling,
    /// Protocols picked for parallel scheduling, `C^S`.
    ScheduleSubset,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub role: CorpusRole,
    pub protocols: Vec<Protocol>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate protocol names.
    pub fn new(role: CorpusRole, protocols: Vec<Protocol>) -> Result<Self, DslError> {
        let mut names = BTreeSet::new();
        for p in &protocols {
            if !names.insert(p.name.as_str()) {
                return Err(DslError::DuplicateProtocol(p.name.clone()));
            }
        }
        Ok(Corpus { role, protocols })
    }

    pub fn target(protocols: Vec<Protocol>) -> Result<Self, DslError> {
        Corpus::new(CorpusRole::Target, protocols)
    }

    pub fn len(&self) -> usize {
        self.protocols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.protocols.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Protocol> {
        self.protocols.iter().find(|p| p.name == name)
    }

    pub fn op_types(&self) -> BTreeSet<&str> {
        self.protocols.iter().flat_map(|p| p.op_types()).collect()
    }

    pub fn total_operations(&self) -> usize {
        self.protocols.iter().map(|p| p.operations.len()).sum()
    }

    /// A corpus holding the named subset, in this corpus' order.
    pub fn subset<'a, I>(&self, role: CorpusRole, names: I) -> Corpus
    where
        I: IntoIterator<Item = &'a str>,
    {
        let wanted: BTreeSet<&str> = names.into_iter().collect();
        Corpus {
            role,
            protocols: self
                .protocols
                .iter()
                .filter(|p| wanted.contains(p.name.as_str()))
                .cloned()
                .collect(),
        }
    }

    pub fn with_role(mut self, role: CorpusRole) -> Self {
        self.role = role;
        self
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OperationDoc {
    id: OpId,
    op_type: String,
    #[serde(rename = "in")]
    inputs: Vec<String>,
    #[serde(rename = "out")]
    outputs: Vec<String>,
    dur_s: Option<f64>,
    params: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProtocolDoc {
    name: String,
    operations: Vec<OperationDoc>,
}

/// Serializes a protocol to its JSON interchange document.
pub fn serialize_protocol(p: &Protocol) -> String {
    let doc = ProtocolDoc {
        name: p.name.clone(),
        operations: p
            .operations
            .iter()
            .map(|op| OperationDoc {
                id: op.id,
                op_type: op.op_type.clone(),
                inputs: op.preconditions.iter().cloned().collect(),
                outputs: op.postconditions.iter().cloned().collect(),
                dur_s: op.duration,
                params: op.parameters.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("protocol document serializes")
}

/// Reads a JSON interchange document back into a protocol.
pub fn deserialize_protocol(doc: &str) -> Result<Protocol, DslError> {
    let doc: ProtocolDoc =
        serde_json::from_str(doc).map_err(|e| DslError::Document(e.to_string()))?;
    let mut operations = Vec::with_capacity(doc.operations.len());
    for op in doc.operations {
        let preconditions: BTreeSet<String> = op.inputs.iter().cloned().collect();
        let postconditions: BTreeSet<String> = op.outputs.iter().cloned().collect();
        if preconditions.len() != op.inputs.len() || postconditions.len() != op.outputs.len() {
            return Err(DslError::Document(format!(
                "operation {} lists a resource twice",
                op.id
            )));
        }
        operations.push(Operation {
            id: op.id,
            op_type: op.op_type,
            preconditions,
            postconditions,
            parameters: op.params,
            duration: op.dur_s,
        });
    }
    let p = Protocol { name: doc.name, operations };
    p.validate().map_err(DslError::Document)?;
    Ok(p)
}
