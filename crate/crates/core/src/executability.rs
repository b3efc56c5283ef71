//! Executability of protocols on a layout.
//!
//! A protocol is executable when every capability step can be placed on a
//! capable device such that, for every dependence edge, the consumer's
//! device is reachable from the producer's device. Grouped connections are
//! traversed in their stored direction; associated connections both ways.
//! The same device always reaches itself.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::dependence::StepGraph;
use crate::error::LayoutError;
use crate::layout::{Layout, Rho};
use crate::protocol::{Corpus, Protocol};

/// Exact search is used up to this many operations and devices.
pub const EXACT_LIMIT: usize = 64;
/// Search nodes before the exact solver gives up and falls back to greedy.
pub const NODE_BUDGET: usize = 200_000;
pub const GREEDY_RESTARTS: usize = 16;

/// One hop on a route between devices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub from: usize,
    pub to: usize,
    /// Robot carrying the material, `None` for a pipeline hop.
    pub robot: Option<String>,
}

/// Device-to-device reachability over a layout's connections.
#[derive(Debug, Clone)]
pub struct Reachability {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<(usize, Option<String>)>>,
    reach: Vec<Vec<bool>>,
    dist: Vec<Vec<u32>>,
}

impl Reachability {
    pub fn new(l: &Layout) -> Self {
        Self::build(l, true)
    }

    /// Reachability through pipelines only.
    pub fn grouped_only(l: &Layout) -> Self {
        Self::build(l, false)
    }

    fn build(l: &Layout, with_robots: bool) -> Self {
        let ids: Vec<String> = l.device_ids().map(str::to_string).collect();
        let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let n = ids.len();
        let mut adj: Vec<Vec<(usize, Option<String>)>> = vec![Vec::new(); n];
        for c in l.connections() {
            let (a, b) = (index[&c.from], index[&c.to]);
            match c.rho {
                Rho::Grouped => adj[a].push((b, None)),
                Rho::Associated if with_robots => {
                    adj[a].push((b, c.robot.clone()));
                    adj[b].push((a, c.robot.clone()));
                }
                _ => {}
            }
        }
        for list in &mut adj {
            list.sort();
        }
        let mut reach = vec![vec![false; n]; n];
        let mut dist = vec![vec![u32::MAX; n]; n];
        for s in 0..n {
            let mut queue = VecDeque::from([s]);
            reach[s][s] = true;
            dist[s][s] = 0;
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &adj[u] {
                    if !reach[s][v] {
                        reach[s][v] = true;
                        dist[s][v] = dist[s][u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        Reachability { ids, index, adj, reach, dist }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn reachable(&self, from: usize, to: usize) -> bool {
        self.reach[from][to]
    }

    pub fn distance(&self, from: usize, to: usize) -> Option<u32> {
        Some(self.dist[from][to]).filter(|d| *d != u32::MAX)
    }

    /// Route with the fewest robot hops, then the fewest hops overall.
    pub fn route(&self, from: usize, to: usize) -> Option<Vec<Hop>> {
        if from == to {
            return Some(Vec::new());
        }
        let n = self.ids.len();
        let mut best: Vec<(u32, u32)> = vec![(u32::MAX, u32::MAX); n];
        let mut prev: Vec<Option<(usize, Option<String>)>> = vec![None; n];
        let mut queue = std::collections::BinaryHeap::new();
        best[from] = (0, 0);
        queue.push(std::cmp::Reverse(((0u32, 0u32), from)));
        while let Some(std::cmp::Reverse((cost, u))) = queue.pop() {
            if cost > best[u] {
                continue;
            }
            for (v, robot) in &self.adj[u] {
                let next = (cost.0 + u32::from(robot.is_some()), cost.1 + 1);
                if next < best[*v] {
                    best[*v] = next;
                    prev[*v] = Some((u, robot.clone()));
                    queue.push(std::cmp::Reverse((next, *v)));
                }
            }
        }
        prev[to].as_ref()?;
        let mut hops = Vec::new();
        let mut cur = to;
        while cur != from {
            let (p, robot) = prev[cur].clone().expect("route predecessor");
            hops.push(Hop { from: p, to: cur, robot });
            cur = p;
        }
        hops.reverse();
        Some(hops)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCause {
    MissingCapability,
    NoConnectingPath,
    NoConsistentAssignment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub protocol: String,
    pub cause: FailureCause,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutabilityReport {
    pub verdict: bool,
    pub failures: Vec<Failure>,
    /// Some protocol was decided by the greedy fallback rather than exact
    /// search.
    pub heuristic: bool,
}

impl ExecutabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A placement problem: each step needs a device from its domain, and every
/// predecessor's device must reach the step's device.
pub(crate) struct Problem<'a> {
    pub preds: Vec<Vec<usize>>,
    pub domains: Vec<Vec<usize>>,
    pub reach: &'a Reachability,
    frontier: Vec<Vec<usize>>,
}

pub(crate) enum Solve {
    Found(Vec<usize>),
    Infeasible,
    OverBudget,
}

impl<'a> Problem<'a> {
    pub fn new(g: &StepGraph, domains: Vec<Vec<usize>>, reach: &'a Reachability) -> Self {
        let n = g.steps.len();
        let preds = g.predecessors();
        let mut last_succ: Vec<Option<usize>> = vec![None; n];
        for &(a, b) in &g.edges {
            last_succ[a] = Some(last_succ[a].map_or(b, |x| x.max(b)));
        }
        let frontier = (0..=n)
            .map(|k| (0..k).filter(|&i| last_succ[i].is_some_and(|j| j >= k)).collect())
            .collect();
        Problem { preds, domains, reach, frontier }
    }

    fn n(&self) -> usize {
        self.domains.len()
    }

    fn compatible(&self, k: usize, d: usize, assign: &[usize]) -> bool {
        self.preds[k].iter().all(|&p| self.reach.reachable(assign[p], d))
    }

    /// Exhaustive backtracking in step order. Failed states are memoized by
    /// the placement of steps that still have dependants ahead.
    pub fn solve_exact(&self, fixed: &[Option<usize>], budget: usize) -> Solve {
        let mut assign = vec![usize::MAX; self.n()];
        let mut failed: HashSet<(usize, Vec<usize>)> = HashSet::new();
        let mut nodes = 0usize;
        match self.backtrack(0, fixed, &mut assign, &mut failed, &mut nodes, budget) {
            Some(true) => Solve::Found(assign),
            Some(false) => Solve::Infeasible,
            None => Solve::OverBudget,
        }
    }

    fn backtrack(
        &self,
        k: usize,
        fixed: &[Option<usize>],
        assign: &mut Vec<usize>,
        failed: &mut HashSet<(usize, Vec<usize>)>,
        nodes: &mut usize,
        budget: usize,
    ) -> Option<bool> {
        if k == self.n() {
            return Some(true);
        }
        *nodes += 1;
        if *nodes > budget {
            return None;
        }
        let key = (k, self.frontier[k].iter().map(|&i| assign[i]).collect::<Vec<_>>());
        if failed.contains(&key) {
            return Some(false);
        }
        let single;
        let candidates: &[usize] = match fixed.get(k).copied().flatten() {
            Some(d) => {
                single = [d];
                &single
            }
            None => &self.domains[k],
        };
        for &d in candidates {
            if !self.compatible(k, d, assign) {
                continue;
            }
            assign[k] = d;
            match self.backtrack(k + 1, fixed, assign, failed, nodes, budget) {
                Some(true) => return Some(true),
                Some(false) => {}
                None => return None,
            }
        }
        assign[k] = usize::MAX;
        failed.insert(key);
        Some(false)
    }

    /// Greedy placement preferring devices nearest to the predecessors;
    /// later restarts shuffle the candidate order.
    pub fn solve_greedy(&self, fixed: &[Option<usize>], restarts: usize, seed: u64) -> Option<Vec<usize>> {
        for attempt in 0..restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ attempt as u64);
            let mut assign = vec![usize::MAX; self.n()];
            let mut ok = true;
            for k in 0..self.n() {
                let mut candidates: Vec<usize> = match fixed.get(k).copied().flatten() {
                    Some(d) => vec![d],
                    None => self.domains[k].clone(),
                };
                candidates.retain(|&d| self.compatible(k, d, &assign));
                if attempt == 0 {
                    candidates.sort_by_key(|&d| {
                        let near = self.preds[k]
                            .iter()
                            .filter_map(|&p| self.reach.distance(assign[p], d))
                            .min()
                            .unwrap_or(0);
                        (near, d)
                    });
                } else {
                    candidates.shuffle(&mut rng);
                }
                match candidates.first() {
                    Some(&d) => assign[k] = d,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Some(assign);
            }
        }
        None
    }
}

/// Outcome of checking one protocol.
#[derive(Debug, Clone)]
pub struct ProtocolCheck {
    pub failure: Option<Failure>,
    pub heuristic: bool,
    /// Device index per capability step when executable.
    pub assignment: Option<Vec<usize>>,
}

/// Precomputed layout view for repeated executability queries.
pub struct Checker<'a> {
    pub layout: &'a Layout,
    pub catalog: &'a Catalog,
    pub reach: Reachability,
    device_types: Vec<String>,
}

impl<'a> Checker<'a> {
    pub fn new(layout: &'a Layout, catalog: &'a Catalog) -> Result<Self, LayoutError> {
        layout.check_types(catalog)?;
        let reach = Reachability::new(layout);
        let device_types = (0..reach.len())
            .map(|i| layout.device_type(reach.id(i)).expect("device listed").to_string())
            .collect();
        Ok(Checker { layout, catalog, reach, device_types })
    }

    pub fn device_type(&self, i: usize) -> &str {
        &self.device_types[i]
    }

    /// Devices able to run `capability`, in id order.
    pub fn domain(&self, capability: &str) -> Vec<usize> {
        (0..self.reach.len())
            .filter(|&i| {
                self.catalog
                    .device_type(&self.device_types[i])
                    .is_some_and(|d| d.provides(capability))
            })
            .collect()
    }

    pub(crate) fn problem(&self, g: &StepGraph) -> Problem<'_> {
        let domains = g.steps.iter().map(|s| self.domain(&s.capability)).collect();
        Problem::new(g, domains, &self.reach)
    }

    pub fn check_protocol(&self, p: &Protocol) -> ProtocolCheck {
        let g = StepGraph::build(p, self.catalog);
        let problem = self.problem(&g);
        let fail = |cause, detail: String| ProtocolCheck {
            failure: Some(Failure { protocol: p.name.clone(), cause, detail }),
            heuristic: false,
            assignment: None,
        };
        for (k, step) in g.steps.iter().enumerate() {
            if problem.domains[k].is_empty() {
                return fail(
                    FailureCause::MissingCapability,
                    format!("no device provides `{}` (operation {})", step.capability, step.op),
                );
            }
        }
        for &(a, b) in &g.edges {
            let linked = problem.domains[a]
                .iter()
                .any(|&x| problem.domains[b].iter().any(|&y| self.reach.reachable(x, y)));
            if !linked {
                let (sa, sb) = (&g.steps[a], &g.steps[b]);
                return fail(
                    FailureCause::NoConnectingPath,
                    format!(
                        "no path from a `{}` device to a `{}` device for dependency {} -> {}",
                        sa.capability, sb.capability, sa.op, sb.op
                    ),
                );
            }
        }
        let exact = p.operations.len() <= EXACT_LIMIT && self.reach.len() <= EXACT_LIMIT;
        let (solution, heuristic) = if exact {
            match problem.solve_exact(&[], NODE_BUDGET) {
                Solve::Found(a) => (Some(a), false),
                Solve::Infeasible => (None, false),
                Solve::OverBudget => (problem.solve_greedy(&[], GREEDY_RESTARTS, 0), true),
            }
        } else {
            (problem.solve_greedy(&[], GREEDY_RESTARTS, 0), true)
        };
        match solution {
            Some(a) => ProtocolCheck { failure: None, heuristic, assignment: Some(a) },
            None => {
                let mut c = fail(
                    FailureCause::NoConsistentAssignment,
                    "no placement satisfies every dependency at once".into(),
                );
                c.heuristic = heuristic;
                c
            }
        }
    }

    pub fn executable(&self, p: &Protocol) -> bool {
        self.check_protocol(p).failure.is_none()
    }

    pub fn check(&self, c: &Corpus) -> ExecutabilityReport {
        let mut results: Vec<(&str, ProtocolCheck)> = c
            .protocols
            .par_iter()
            .map(|p| (p.name.as_str(), self.check_protocol(p)))
            .collect();
        results.sort_by(|a, b| a.0.cmp(b.0));
        let heuristic = results.iter().any(|(_, r)| r.heuristic);
        let failures: Vec<Failure> = results.into_iter().filter_map(|(_, r)| r.failure).collect();
        ExecutabilityReport { verdict: failures.is_empty(), failures, heuristic }
    }
}

/// `Executable(c, l)` with a per-protocol failure breakdown.
pub fn check_executable(c: &Corpus, l: &Layout, cat: &Catalog) -> Result<ExecutabilityReport, LayoutError> {
    Ok(Checker::new(l, cat)?.check(c))
}
