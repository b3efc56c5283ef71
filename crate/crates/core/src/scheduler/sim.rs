use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::dependence::StepGraph;
use crate::error::ScheduleError;
use crate::executability::{Checker, Solve, GREEDY_RESTARTS, NODE_BUDGET};
use crate::layout::Layout;
use crate::protocol::{Corpus, OpId, Protocol};

use super::op_class;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    /// Maximum number of protocols in flight at once.
    pub parallel_cap: usize,
    /// Seeds the randomized fallback used when re-planning a protocol.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { parallel_cap: 50, seed: 0 }
    }
}

/// Declaration order is the tie order for simultaneous events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Pop,
    Push,
    Start,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_us: u64,
    pub kind: EventKind,
    pub protocol: String,
    pub op: OpId,
    pub part: usize,
    pub class: String,
    /// Device holding the step; absent for pushes.
    pub resource: Option<String>,
}

/// One robot hop carrying a step's input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub robot: String,
    pub from: String,
    pub to: String,
    pub start_us: u64,
    pub end_us: u64,
    pub protocol: String,
    pub op: OpId,
    pub part: usize,
}

/// Lifecycle of one capability step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub protocol: String,
    pub op: OpId,
    pub part: usize,
    pub class: String,
    pub device: String,
    pub push_us: u64,
    pub dispatch_us: u64,
    pub start_us: u64,
    pub pop_us: u64,
    /// Producer steps as indices into the trace's record list.
    pub producers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDevice {
    pub id: String,
    pub capacity: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub events: Vec<TraceEvent>,
    pub records: Vec<StepRecord>,
    pub transfers: Vec<Transfer>,
    pub devices: Vec<TraceDevice>,
    pub robots: Vec<String>,
    /// Transport seconds per robot hop, in microseconds, keyed by robot id.
    pub transport_us: BTreeMap<String, u64>,
    pub horizon_us: u64,
}

impl ScheduleTrace {
    pub fn makespan_s(&self) -> f64 {
        self.horizon_us as f64 / 1e6
    }

    /// One JSON object per event.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

pub(crate) fn to_us(seconds: f64) -> u64 {
    (seconds * 1e6).round().max(0.0) as u64
}

struct Job<'p> {
    protocol: &'p Protocol,
    graph: StepGraph,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    classes: Vec<String>,
    plan: Vec<usize>,
    placed: Vec<Option<usize>>,
    waiting_on: Vec<usize>,
    push_us: Vec<u64>,
    dispatch_us: Vec<u64>,
    start_us: Vec<u64>,
    pop_us: Vec<u64>,
    popped: usize,
}

struct Sim<'a, 'p> {
    checker: Checker<'a>,
    cat: &'a Catalog,
    cfg: &'a SimConfig,
    jobs: Vec<Job<'p>>,
    capacity: Vec<u32>,
    active: Vec<u32>,
    free_since: Vec<u64>,
    robot_free: BTreeMap<String, u64>,
    transport_us: BTreeMap<String, u64>,
    ready: Vec<(u64, usize, usize)>,
    pops: BinaryHeap<Reverse<(u64, usize, usize)>>,
    transfers: Vec<Transfer>,
    running: usize,
    next_admit: usize,
}

/// Runs every protocol under first-come-first-serve dispatch.
///
/// Protocols are admitted in name order while fewer than `parallel_cap` are
/// in flight. A step becomes ready once all its producers have finished.
/// Ready steps are served in (ready time, protocol, op, part) order; each
/// claims the longest-idle free capable device that its producers can reach
/// and that still leaves a feasible placement for the rest of its protocol.
/// The device is held from dispatch until the step finishes. Inputs from
/// other devices travel along the route with the fewest robot hops; each
/// robot carries one load at a time.
pub fn simulate(l: &Layout, c: &Corpus, cat: &Catalog, cfg: &SimConfig) -> Result<ScheduleTrace, ScheduleError> {
    let checker = Checker::new(l, cat)?;
    let mut protocols: Vec<&Protocol> = c.protocols.iter().collect();
    protocols.sort_by(|a, b| a.name.cmp(&b.name));
    let mut jobs = Vec::with_capacity(protocols.len());
    let mut failed = Vec::new();
    for p in protocols {
        let check = checker.check_protocol(p);
        match check.assignment {
            Some(plan) => jobs.push(Job::new(p, StepGraph::build(p, cat), plan)),
            None => failed.push(p.name.clone()),
        }
    }
    if !failed.is_empty() {
        return Err(ScheduleError::NotExecutable(failed.join(", ")));
    }
    let capacity: Vec<u32> = (0..checker.reach.len())
        .map(|d| cat.device_type(checker.device_type(d)).map_or(1, |t| t.capacity))
        .collect();
    let transport_us: BTreeMap<String, u64> = l
        .robots()
        .map(|r| {
            let secs = cat.robot_type(&r.robot_type).map_or(0.0, |t| t.transport_s);
            (r.id, to_us(secs))
        })
        .collect();
    let n = capacity.len();
    let sim = Sim {
        checker,
        cat,
        cfg,
        jobs,
        active: vec![0; n],
        free_since: vec![0; n],
        capacity,
        robot_free: BTreeMap::new(),
        transport_us,
        ready: Vec::new(),
        pops: BinaryHeap::new(),
        transfers: Vec::new(),
        running: 0,
        next_admit: 0,
    };
    Ok(sim.run(l))
}

impl<'p> Job<'p> {
    fn new(protocol: &'p Protocol, graph: StepGraph, plan: Vec<usize>) -> Self {
        let n = graph.steps.len();
        let preds = graph.predecessors();
        let succs = graph.successors();
        let classes = graph.steps.iter().map(|s| op_class(&protocol.operations[s.op_index])).collect();
        Job {
            protocol,
            waiting_on: preds.iter().map(Vec::len).collect(),
            graph,
            preds,
            succs,
            classes,
            plan,
            placed: vec![None; n],
            push_us: vec![0; n],
            dispatch_us: vec![0; n],
            start_us: vec![0; n],
            pop_us: vec![0; n],
            popped: 0,
        }
    }

    fn done(&self) -> bool {
        self.popped == self.graph.steps.len()
    }
}

impl<'a, 'p> Sim<'a, 'p> {
    fn run(mut self, l: &Layout) -> ScheduleTrace {
        let mut t = 0u64;
        self.admit(t);
        loop {
            self.dispatch(t);
            let Some(&Reverse((next, _, _))) = self.pops.peek() else {
                assert!(self.ready.is_empty(), "scheduler deadlock with {} ready steps", self.ready.len());
                break;
            };
            t = next;
            while let Some(&Reverse((tp, j, k))) = self.pops.peek() {
                if tp != t {
                    break;
                }
                self.pops.pop();
                self.finish(t, j, k);
            }
            self.admit(t);
        }
        assert!(self.jobs.iter().all(Job::done), "simulation ended with unfinished protocols");
        self.into_trace(l)
    }

    fn admit(&mut self, t: u64) {
        while self.running < self.cfg.parallel_cap.max(1) && self.next_admit < self.jobs.len() {
            let j = self.next_admit;
            self.next_admit += 1;
            if self.jobs[j].done() {
                continue;
            }
            self.running += 1;
            for k in 0..self.jobs[j].graph.steps.len() {
                if self.jobs[j].waiting_on[k] == 0 {
                    self.push(t, j, k);
                }
            }
        }
    }

    fn push(&mut self, t: u64, j: usize, k: usize) {
        self.jobs[j].push_us[k] = t;
        self.ready.push((t, j, k));
    }

    fn finish(&mut self, t: u64, j: usize, k: usize) {
        let d = self.jobs[j].placed[k].expect("finished step was placed");
        self.active[d] -= 1;
        self.free_since[d] = t;
        let job = &mut self.jobs[j];
        job.popped += 1;
        let succs = job.succs[k].clone();
        for s in succs {
            self.jobs[j].waiting_on[s] -= 1;
            if self.jobs[j].waiting_on[s] == 0 {
                self.push(t, j, s);
            }
        }
        if self.jobs[j].done() {
            self.running -= 1;
        }
    }

    fn dispatch(&mut self, t: u64) {
        let jobs = &self.jobs;
        self.ready.sort_by(|a, b| {
            let key = |&(push, j, k): &(u64, usize, usize)| (push, j, jobs[j].graph.steps[k].op, jobs[j].graph.steps[k].part);
            key(a).cmp(&key(b))
        });
        let ready = std::mem::take(&mut self.ready);
        for (push, j, k) in ready {
            match self.choose(j, k) {
                Some(d) => self.start(t, j, k, d),
                None => self.ready.push((push, j, k)),
            }
        }
    }

    fn choose(&mut self, j: usize, k: usize) -> Option<usize> {
        let job = &self.jobs[j];
        let step = &job.graph.steps[k];
        let mut candidates: Vec<usize> = self
            .checker
            .domain(&step.capability)
            .into_iter()
            .filter(|&d| self.active[d] < self.capacity[d])
            .filter(|&d| {
                job.preds[k]
                    .iter()
                    .all(|&p| self.checker.reach.reachable(job.placed[p].expect("producer placed"), d))
            })
            .collect();
        candidates.sort_by_key(|&d| (self.free_since[d], d));
        for d in candidates {
            if d == self.jobs[j].plan[k] {
                return Some(d);
            }
            if let Some(plan) = self.replan(j, k, d) {
                self.jobs[j].plan = plan;
                return Some(d);
            }
        }
        None
    }

    /// A full placement consistent with the steps already placed and with
    /// step `k` on device `d`, if one exists.
    fn replan(&self, j: usize, k: usize, d: usize) -> Option<Vec<usize>> {
        let job = &self.jobs[j];
        let mut fixed = job.placed.clone();
        fixed[k] = Some(d);
        let problem = self.checker.problem(&job.graph);
        match problem.solve_exact(&fixed, NODE_BUDGET) {
            Solve::Found(plan) => Some(plan),
            Solve::Infeasible => None,
            Solve::OverBudget => problem.solve_greedy(&fixed, GREEDY_RESTARTS, self.cfg.seed),
        }
    }

    fn start(&mut self, t: u64, j: usize, k: usize, d: usize) {
        self.active[d] += 1;
        let mut begin = t;
        let preds = self.jobs[j].preds[k].clone();
        for p in preds {
            let u = self.jobs[j].placed[p].expect("producer placed");
            if u == d {
                continue;
            }
            let route = self.checker.reach.route(u, d).expect("reachable producer has a route");
            let mut cur = t;
            for hop in route {
                let Some(robot) = hop.robot else { continue };
                let free = self.robot_free.get(&robot).copied().unwrap_or(0);
                let s = cur.max(free);
                let e = s + self.transport_us.get(&robot).copied().unwrap_or(0);
                self.robot_free.insert(robot.clone(), e);
                let step = &self.jobs[j].graph.steps[k];
                self.transfers.push(Transfer {
                    robot,
                    from: self.checker.reach.id(hop.from).to_string(),
                    to: self.checker.reach.id(hop.to).to_string(),
                    start_us: s,
                    end_us: e,
                    protocol: self.jobs[j].protocol.name.clone(),
                    op: step.op,
                    part: step.part,
                });
                cur = e;
            }
            begin = begin.max(cur);
        }
        let step = &self.jobs[j].graph.steps[k];
        let secs = step
            .duration
            .unwrap_or_else(|| self.cat.default_duration(self.checker.device_type(d), &step.capability));
        let end = begin + to_us(secs);
        let job = &mut self.jobs[j];
        job.placed[k] = Some(d);
        job.dispatch_us[k] = t;
        job.start_us[k] = begin;
        job.pop_us[k] = end;
        self.pops.push(Reverse((end, j, k)));
    }

    fn into_trace(self, l: &Layout) -> ScheduleTrace {
        let mut records = Vec::new();
        let mut events = Vec::new();
        let mut horizon = 0;
        for job in &self.jobs {
            let base = records.len();
            for (k, step) in job.graph.steps.iter().enumerate() {
                let device = self.checker.reach.id(job.placed[k].expect("every step ran")).to_string();
                let rec = StepRecord {
                    protocol: job.protocol.name.clone(),
                    op: step.op,
                    part: step.part,
                    class: job.classes[k].clone(),
                    device: device.clone(),
                    push_us: job.push_us[k],
                    dispatch_us: job.dispatch_us[k],
                    start_us: job.start_us[k],
                    pop_us: job.pop_us[k],
                    producers: job.preds[k].iter().map(|&p| base + p).collect(),
                };
                horizon = horizon.max(rec.pop_us);
                for (kind, t_us, resource) in [
                    (EventKind::Push, rec.push_us, None),
                    (EventKind::Start, rec.start_us, Some(device.clone())),
                    (EventKind::Pop, rec.pop_us, Some(device.clone())),
                ] {
                    events.push(TraceEvent {
                        t_us,
                        kind,
                        protocol: rec.protocol.clone(),
                        op: rec.op,
                        part: rec.part,
                        class: rec.class.clone(),
                        resource,
                    });
                }
                records.push(rec);
            }
        }
        events.sort_by(|a, b| {
            (a.t_us, a.kind, &a.protocol, a.op, a.part).cmp(&(b.t_us, b.kind, &b.protocol, b.op, b.part))
        });
        let devices = (0..self.capacity.len())
            .map(|d| TraceDevice { id: self.checker.reach.id(d).to_string(), capacity: self.capacity[d] })
            .collect();
        ScheduleTrace {
            events,
            records,
            transfers: self.transfers,
            devices,
            robots: l.robot_ids().map(str::to_string).collect(),
            transport_us: self.transport_us,
            horizon_us: horizon,
        }
    }
}
