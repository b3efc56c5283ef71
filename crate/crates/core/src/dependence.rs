//! Program dependence graphs and the operation-dependency profile.
//!
//! An operation depends on the most recent earlier operation that produced
//! one of its precondition resources. Resources nobody produced are treated
//! as environment stock and create no edge.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::protocol::{Corpus, OpId, Protocol};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DependenceEdge {
    pub producer: OpId,
    pub consumer: OpId,
    pub resource: String,
}

#[derive(Debug, Clone)]
pub struct DependenceGraph<'a> {
    pub protocol: &'a Protocol,
    pub edges: Vec<DependenceEdge>,
}

impl DependenceGraph<'_> {
    fn position(&self, id: OpId) -> usize {
        self.protocol
            .operations
            .iter()
            .position(|o| o.id == id)
            .expect("edge endpoints are protocol operations")
    }

    /// Every edge points forward in program order.
    pub fn is_acyclic(&self) -> bool {
        self.edges
            .iter()
            .all(|e| self.position(e.producer) < self.position(e.consumer))
    }

    /// Distinct `(producer position, consumer position)` pairs.
    pub fn position_pairs(&self) -> BTreeSet<(usize, usize)> {
        let index: HashMap<OpId, usize> = self
            .protocol
            .operations
            .iter()
            .enumerate()
            .map(|(i, o)| (o.id, i))
            .collect();
        self.edges
            .iter()
            .map(|e| (index[&e.producer], index[&e.consumer]))
            .collect()
    }
}

pub fn build_pdg(p: &Protocol) -> DependenceGraph<'_> {
    let mut last_producer: HashMap<&str, OpId> = HashMap::new();
    let mut edges = Vec::new();
    for op in &p.operations {
        for r in &op.preconditions {
            if let Some(&producer) = last_producer.get(r.as_str()) {
                edges.push(DependenceEdge { producer, consumer: op.id, resource: r.clone() });
            }
        }
        for r in &op.postconditions {
            last_producer.insert(r.as_str(), op.id);
        }
    }
    let g = DependenceGraph { protocol: p, edges };
    debug_assert!(g.is_acyclic());
    g
}

/// One capability step of an (expanded) operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub op_index: usize,
    pub op: OpId,
    /// Position within the operation's expansion.
    pub part: usize,
    pub parts: usize,
    pub capability: String,
    /// Share of the operation's stated duration, if it has one.
    pub duration: Option<f64>,
}

/// A protocol lowered to capability steps. Expanded operations become
/// chains; dependence edges run from a producer's last step to a
/// consumer's first step. Steps are in program order and every edge points
/// forward.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGraph {
    pub steps: Vec<Step>,
    pub edges: Vec<(usize, usize)>,
}

impl StepGraph {
    pub fn build(p: &Protocol, cat: &Catalog) -> Self {
        let mut steps = Vec::new();
        let mut first = Vec::with_capacity(p.operations.len());
        let mut last = Vec::with_capacity(p.operations.len());
        let mut edges = BTreeSet::new();
        for (op_index, op) in p.operations.iter().enumerate() {
            let caps = cat.expand_operation(&op.op_type);
            let parts = caps.len();
            first.push(steps.len());
            for (part, capability) in caps.into_iter().enumerate() {
                if part > 0 {
                    edges.insert((steps.len() - 1, steps.len()));
                }
                steps.push(Step {
                    op_index,
                    op: op.id,
                    part,
                    parts,
                    capability,
                    duration: op.duration.map(|d| d / parts as f64),
                });
            }
            last.push(steps.len() - 1);
        }
        for (prod, cons) in build_pdg(p).position_pairs() {
            edges.insert((last[prod], first[cons]));
        }
        StepGraph { steps, edges: edges.into_iter().collect() }
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.steps.len()];
        for &(a, b) in &self.edges {
            preds[b].push(a);
        }
        preds
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succs = vec![Vec::new(); self.steps.len()];
        for &(a, b) in &self.edges {
            succs[a].push(b);
        }
        succs
    }

    pub fn capabilities(&self) -> BTreeSet<&str> {
        self.steps.iter().map(|s| s.capability.as_str()).collect()
    }
}

/// Conditional frequencies `p(op_i ≺ op_j | op_i)`: the share of type-`i`
/// occurrences with at least one direct dependant of type `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyMatrix {
    pub op_types: Vec<String>,
    pub entries: Vec<Vec<f64>>,
    pub occurrence_counts: Vec<u64>,
}

impl DependencyMatrix {
    pub fn empty() -> Self {
        DependencyMatrix { op_types: Vec::new(), entries: Vec::new(), occurrence_counts: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.op_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op_types.is_empty()
    }

    pub fn index_of(&self, op_type: &str) -> Option<usize> {
        self.op_types.binary_search_by(|t| t.as_str().cmp(op_type)).ok()
    }

    /// Entry for a named pair; 0 when either type is absent.
    pub fn get(&self, from: &str, to: &str) -> f64 {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.entries[i][j],
            _ => 0.0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("op_type");
        for t in &self.op_types {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (t, row) in self.op_types.iter().zip(&self.entries) {
            out.push_str(t);
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    fn from_counts(types: BTreeSet<String>, occ: BTreeMap<String, u64>, pairs: BTreeMap<(String, String), u64>) -> Self {
        let op_types: Vec<String> = types.into_iter().collect();
        let n = op_types.len();
        let mut entries = vec![vec![0.0; n]; n];
        let occurrence_counts: Vec<u64> = op_types.iter().map(|t| occ.get(t).copied().unwrap_or(0)).collect();
        for ((a, b), count) in pairs {
            let i = op_types.binary_search(&a).expect("known type");
            let j = op_types.binary_search(&b).expect("known type");
            entries[i][j] = count as f64 / occurrence_counts[i] as f64;
        }
        DependencyMatrix { op_types, entries, occurrence_counts }
    }
}

/// Counts, per node, the distinct labels among its direct successors.
fn accumulate(
    labels: &[&str],
    edges: &[(usize, usize)],
    types: &mut BTreeSet<String>,
    occ: &mut BTreeMap<String, u64>,
    pairs: &mut BTreeMap<(String, String), u64>,
) {
    let mut succ_types: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); labels.len()];
    for &(a, b) in edges {
        succ_types[a].insert(labels[b]);
    }
    for (i, label) in labels.iter().enumerate() {
        types.insert(label.to_string());
        *occ.entry(label.to_string()).or_default() += 1;
        for t in &succ_types[i] {
            *pairs.entry((label.to_string(), t.to_string())).or_default() += 1;
        }
    }
}

/// Dependency profile over operation types.
pub fn profile_dependencies(c: &Corpus) -> DependencyMatrix {
    let (mut types, mut occ, mut pairs) = Default::default();
    for p in &c.protocols {
        let labels: Vec<&str> = p.operations.iter().map(|o| o.op_type.as_str()).collect();
        let edges: Vec<_> = build_pdg(p).position_pairs().into_iter().collect();
        accumulate(&labels, &edges, &mut types, &mut occ, &mut pairs);
    }
    DependencyMatrix::from_counts(types, occ, pairs)
}

/// Dependency profile over capability steps after catalog expansion. Equal
/// to [`profile_dependencies`] when the catalog has no expansion rules.
pub fn profile_capabilities(c: &Corpus, cat: &Catalog) -> DependencyMatrix {
    let (mut types, mut occ, mut pairs) = Default::default();
    for p in &c.protocols {
        let g = StepGraph::build(p, cat);
        let labels: Vec<&str> = g.steps.iter().map(|s| s.capability.as_str()).collect();
        accumulate(&labels, &g.edges, &mut types, &mut occ, &mut pairs);
    }
    DependencyMatrix::from_counts(types, occ, pairs)
}
