use std::collections::{BTreeMap, HashMap};

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::ScheduleError;
use crate::layout::{Connection, DeviceInstance, EditOp, Element, Layout, Rho};
use crate::protocol::{Corpus, CorpusRole};

use super::sampling::sample_representatives;
use super::sim::{simulate, ScheduleTrace, SimConfig};
use super::minimal_layout;

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthConfig {
    /// Share of the corpus scheduled during growth.
    pub fraction: f64,
    pub seed: u64,
    /// Required speedup of the parallel run over running protocols one by one.
    pub sigma: f64,
    pub parallel_cap: usize,
    /// Representatives placed first in the schedule order.
    pub representatives: usize,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig { fraction: 1.0, seed: 0, sigma: 1.2, parallel_cap: 50, representatives: 4 }
    }
}

/// Outcome of adding one protocol to the active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub protocol: String,
    pub window: usize,
    pub parallel_makespan_s: f64,
    pub sequential_makespan_s: f64,
    /// Devices duplicated while handling this step, by source id.
    pub duplicated: Vec<String>,
    pub success: bool,
}

/// Growth gave up on a step before reaching the speedup target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exhaustion {
    pub protocol: String,
    pub reason: String,
    pub parallel_makespan_s: f64,
    pub target_makespan_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub layout: Layout,
    pub order: Vec<String>,
    pub steps: Vec<GrowthStep>,
    pub exhaustions: Vec<Exhaustion>,
    pub edits: Vec<EditOp>,
    /// Device count after each step.
    pub device_counts: Vec<usize>,
}

struct Grower<'a> {
    cat: &'a Catalog,
    corpus: &'a Corpus,
    sim: SimConfig,
    layout: Layout,
    solo: HashMap<String, u64>,
    root: BTreeMap<String, String>,
    copies: BTreeMap<String, usize>,
    edits: Vec<EditOp>,
}

impl Grower<'_> {
    fn run(&self, names: &[String]) -> Result<ScheduleTrace, ScheduleError> {
        let sub = self.corpus.subset(CorpusRole::ScheduleSubset, names.iter().map(String::as_str));
        simulate(&self.layout, &sub, self.cat, &self.sim)
    }

    fn solo_makespan(&mut self, name: &str) -> Result<u64, ScheduleError> {
        if let Some(&m) = self.solo.get(name) {
            return Ok(m);
        }
        let m = self.run(&[name.to_string()])?.horizon_us;
        self.solo.insert(name.to_string(), m);
        Ok(m)
    }

    fn root_of(&self, id: &str) -> String {
        self.root.get(id).cloned().unwrap_or_else(|| id.to_string())
    }

    /// Adds a copy of `id` with the same connections.
    fn duplicate(&mut self, id: &str) -> Result<(), ScheduleError> {
        let ty = self.layout.device_type(id).expect("device in layout").to_string();
        let copy = self.layout.fresh_id(&ty);
        let mut edits = vec![EditOp::insert(Element::Device(DeviceInstance::new(copy.clone(), ty)))];
        for c in self.layout.connections().filter(|c| c.touches(id)) {
            let swap = |x: &str| if x == id { copy.clone() } else { x.to_string() };
            let link = match c.rho {
                Rho::Grouped => Connection::grouped(swap(&c.from), swap(&c.to)),
                _ => Connection::associated(swap(&c.from), swap(&c.to), c.robot.clone().expect("robot link")),
            };
            edits.push(EditOp::insert(Element::Connection(link)));
        }
        for e in &edits {
            self.layout.apply_in_place(e)?;
        }
        self.edits.extend(edits);
        let root = self.root_of(id);
        *self.copies.entry(root.clone()).or_default() += 1;
        self.root.insert(copy, root);
        self.solo.clear();
        Ok(())
    }
}

/// Grows the minimal layout by duplicating bottleneck devices until each
/// prefix of the schedule order runs with the required speedup.
///
/// Protocols are ordered representatives first, then the rest in seeded
/// random order, and the first `⌈fraction · |c|⌉` are added one at a time.
/// The active set is the last `parallel_cap` added protocols. When its
/// parallel makespan exceeds the sum of individual makespans divided by
/// `sigma`, the device with the largest total ready-queue wait is duplicated
/// along with its connections, and the set is simulated again. A device
/// lineage is duplicated at most once per active protocol.
pub fn iterative_growth(c: &Corpus, cat: &Catalog, cfg: &GrowthConfig) -> Result<GrowthReport, ScheduleError> {
    if !(0.0..=1.0).contains(&cfg.fraction) {
        return Err(ScheduleError::InvalidFraction(cfg.fraction));
    }
    let layout = minimal_layout(c, cat)?;
    let n = c.len();
    let picked = ((cfg.fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<String> = Vec::new();
    if picked > 0 {
        let reps = sample_representatives(c, cfg.representatives.clamp(1, n), cfg.seed)?;
        order.extend(reps.protocols.iter().map(|p| p.name.clone()));
        let mut rest: Vec<String> =
            c.protocols.iter().map(|p| p.name.clone()).filter(|name| !order.contains(name)).collect();
        rest.sort();
        rest.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        order.extend(rest);
        order.truncate(picked);
    }
    let cap = cfg.parallel_cap.max(1);
    let mut g = Grower {
        cat,
        corpus: c,
        sim: SimConfig { parallel_cap: cap, seed: cfg.seed },
        layout,
        solo: HashMap::new(),
        root: BTreeMap::new(),
        copies: BTreeMap::new(),
        edits: Vec::new(),
    };
    let mut steps = Vec::new();
    let mut exhaustions = Vec::new();
    let mut device_counts = Vec::new();
    for i in 0..order.len() {
        let window: Vec<String> = order[(i + 1).saturating_sub(cap)..=i].to_vec();
        let protocol = order[i].clone();
        if window.len() < 2 {
            let solo = g.solo_makespan(&protocol)? as f64 / 1e6;
            steps.push(GrowthStep {
                protocol,
                window: 1,
                parallel_makespan_s: solo,
                sequential_makespan_s: solo,
                duplicated: Vec::new(),
                success: true,
            });
            device_counts.push(g.layout.device_count());
            continue;
        }
        let mut duplicated = Vec::new();
        loop {
            let mut sequential = 0u64;
            let mut longest = 0u64;
            for name in &window {
                let m = g.solo_makespan(name)?;
                sequential += m;
                longest = longest.max(m);
            }
            let tr = g.run(&window)?;
            let parallel = tr.horizon_us;
            let target = sequential as f64 / cfg.sigma;
            debug!("growth {protocol}: parallel {parallel} us, target {target:.0} us");
            let mut give_up = |reason: &str| {
                warn!("growth stopped at {protocol}: {reason}");
                exhaustions.push(Exhaustion {
                    protocol: protocol.clone(),
                    reason: reason.to_string(),
                    parallel_makespan_s: parallel as f64 / 1e6,
                    target_makespan_s: target / 1e6,
                });
            };
            let success = parallel as f64 <= target;
            if !success {
                if parallel <= longest {
                    give_up("makespan already equals the longest single protocol");
                } else {
                    match bottleneck(&tr, &g, window.len()) {
                        Bottleneck::Device(d) => {
                            info!("growth {protocol}: duplicating {d}");
                            g.duplicate(&d)?;
                            duplicated.push(d);
                            continue;
                        }
                        Bottleneck::NoWait => give_up("no step waited for a device"),
                        Bottleneck::Capped => give_up("every waiting device reached its duplicate cap"),
                    }
                }
            }
            steps.push(GrowthStep {
                protocol: protocol.clone(),
                window: window.len(),
                parallel_makespan_s: parallel as f64 / 1e6,
                sequential_makespan_s: sequential as f64 / 1e6,
                duplicated: std::mem::take(&mut duplicated),
                success,
            });
            break;
        }
        device_counts.push(g.layout.device_count());
    }
    Ok(GrowthReport { layout: g.layout, order, steps, exhaustions, edits: g.edits, device_counts })
}

enum Bottleneck {
    Device(String),
    NoWait,
    Capped,
}

/// Device with the largest total ready-queue wait, then the most busy time,
/// then the smallest id.
fn bottleneck(tr: &ScheduleTrace, g: &Grower<'_>, cap: usize) -> Bottleneck {
    let mut stats: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in &tr.records {
        let s = stats.entry(r.device.as_str()).or_default();
        s.0 += r.dispatch_us - r.push_us;
        s.1 += r.pop_us - r.start_us;
    }
    let waiting: Vec<(&str, (u64, u64))> = stats.into_iter().filter(|(_, (w, _))| *w > 0).collect();
    if waiting.is_empty() {
        return Bottleneck::NoWait;
    }
    waiting
        .into_iter()
        .filter(|(id, _)| g.copies.get(&g.root_of(id)).copied().unwrap_or(0) < cap)
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
        .map_or(Bottleneck::Capped, |(id, _)| Bottleneck::Device(id.to_string()))
}

impl GrowthReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
