//! Independent oracles and generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use groundr::corpusgen::{generate, generate_catalog, GenParams};
use groundr::partition::WeightedGraph;
use groundr::pareto::Direction;
use groundr::scheduler::ScheduleTrace;
use groundr::{Catalog, Corpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph with integer weights so cut sums are exact.
pub fn random_graph(r: &mut ChaCha8Rng, n: usize, density: f64) -> WeightedGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.gen_bool(density) {
                edges.push((a, b, r.gen_range(1..=20) as f64));
            }
        }
    }
    WeightedGraph::from_edges(n, &edges)
}

fn weight_between(g: &WeightedGraph, label: &[usize]) -> f64 {
    let mut w = 0.0;
    for a in 0..label.len() {
        for b in a + 1..label.len() {
            if label[a] != label[b] {
                w += g.weight(a, b);
            }
        }
    }
    w
}

/// Minimum over all bipartitions into two nonempty sides.
pub fn brute_min_cut(g: &WeightedGraph) -> f64 {
    let n = g.len();
    let mut best = f64::INFINITY;
    // Node 0 fixed on side 0; masks over the remaining nodes.
    for mask in 1u32..(1 << (n - 1)) {
        let label: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize }).collect();
        best = best.min(weight_between(g, &label));
    }
    best
}

/// Minimum over all labelings into exactly `k` nonempty parts.
pub fn brute_k_cut(g: &WeightedGraph, k: usize) -> f64 {
    let n = g.len();
    let mut label = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut used = vec![false; k];
        label.iter().for_each(|&x| used[x] = true);
        if used.iter().all(|&u| u) {
            best = best.min(weight_between(g, &label));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            label[i] += 1;
            if label[i] < k {
                break;
            }
            label[i] = 0;
            i += 1;
        }
    }
}

/// Quadratic dominance filter on raw values.
pub fn brute_front(points: &[Vec<f64>], dirs: &[Direction]) -> Vec<usize> {
    let better_eq = |a: f64, b: f64, d: Direction| match d {
        Direction::Max => a >= b,
        Direction::Min => a <= b,
    };
    let dominates = |a: &[f64], b: &[f64]| {
        (0..a.len()).all(|i| better_eq(a[i], b[i], dirs[i])) && (0..a.len()).any(|i| a[i] != b[i])
    };
    (0..points.len()).filter(|&i| !points.iter().any(|q| dominates(q, &points[i]))).collect()
}

/// Pearson correlation of average ranks.
pub fn spearman_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let less = v.iter().filter(|&&b| b < a).count() as f64;
                let equal = v.iter().filter(|&&b| b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

/// A small seeded corpus and its catalog.
pub fn small_pair(seed: u64) -> (Corpus, Catalog) {
    let mut r = rng(seed ^ 0xabcd);
    let p = GenParams {
        seed,
        n_protocols: r.gen_range(2..=6),
        n_op_types: r.gen_range(3..=7),
        ops_per_protocol: (2, 6),
        n_clusters: r.gen_range(1..=3),
        density: r.gen_range(0.3..=0.9),
        ..GenParams::default()
    };
    let c = generate(&p).unwrap().corpus;
    let cat = generate_catalog(&c, seed);
    (c, cat)
}

/// Violations of the trace invariants, as readable strings.
pub fn trace_violations(tr: &ScheduleTrace, expected_steps: usize) -> Vec<String> {
    use groundr::scheduler::EventKind;
    let mut v = Vec::new();
    let count = |k: EventKind| tr.events.iter().filter(|e| e.kind == k).count();
    let (pushes, starts, pops) = (count(EventKind::Push), count(EventKind::Start), count(EventKind::Pop));
    if pushes != expected_steps || starts != expected_steps || pops != expected_steps {
        v.push(format!("conservation: {pushes}/{starts}/{pops} for {expected_steps} steps"));
    }
    if tr.records.len() != expected_steps {
        v.push(format!("{} records for {expected_steps} steps", tr.records.len()));
    }
    let capacity: BTreeMap<&str, u32> = tr.devices.iter().map(|d| (d.id.as_str(), d.capacity)).collect();
    let mut intervals: BTreeMap<&str, Vec<(u64, u64)>> = BTreeMap::new();
    for (i, r) in tr.records.iter().enumerate() {
        if !(r.push_us <= r.dispatch_us && r.dispatch_us <= r.start_us && r.start_us <= r.pop_us) {
            v.push(format!("record {i}: ordering {} {} {} {}", r.push_us, r.dispatch_us, r.start_us, r.pop_us));
        }
        for &p in &r.producers {
            let prod = &tr.records[p];
            if r.start_us < prod.pop_us {
                v.push(format!("record {i} starts at {} before producer {p} pops at {}", r.start_us, prod.pop_us));
            }
            if r.push_us < prod.pop_us {
                v.push(format!("record {i} pushed before producer {p} popped"));
            }
        }
        for t in tr.transfers.iter().filter(|t| t.protocol == r.protocol && t.op == r.op && t.part == r.part) {
            if t.end_us > r.start_us {
                v.push(format!("record {i} starts before its transfer by {} lands", t.robot));
            }
            let latest = r.producers.iter().map(|&p| tr.records[p].pop_us).max().unwrap_or(0);
            if t.start_us < latest {
                v.push(format!("transfer for record {i} leaves before its input exists"));
            }
            if t.end_us - t.start_us != tr.transport_us.get(&t.robot).copied().unwrap_or(u64::MAX) {
                v.push(format!("transfer by {} has the wrong duration", t.robot));
            }
        }
        intervals.entry(r.device.as_str()).or_default().push((r.dispatch_us, r.pop_us));
    }
    for (dev, iv) in &intervals {
        let cap = match capacity.get(dev) {
            Some(&c) => c as usize,
            None => {
                v.push(format!("record on unknown device {dev}"));
                continue;
            }
        };
        if over_capacity(iv, cap) {
            v.push(format!("device {dev} above capacity {cap}"));
        }
    }
    let mut robot_iv: BTreeMap<&str, Vec<(u64, u64)>> = BTreeMap::new();
    for t in &tr.transfers {
        if t.end_us > t.start_us {
            robot_iv.entry(t.robot.as_str()).or_default().push((t.start_us, t.end_us));
        }
    }
    for (robot, iv) in &robot_iv {
        if over_capacity(iv, 1) {
            v.push(format!("robot {robot} carries two loads at once"));
        }
    }
    v
}

/// Whether half-open intervals ever overlap more than `cap` deep.
fn over_capacity(iv: &[(u64, u64)], cap: usize) -> bool {
    let mut points: Vec<(u64, i32)> = Vec::new();
    for &(a, b) in iv {
        if b > a {
            points.push((a, 1));
            points.push((b, -1));
        }
    }
    // Ends sort before starts at the same instant.
    points.sort();
    let mut depth = 0i32;
    points.iter().any(|&(_, d)| {
        depth += d;
        depth > cap as i32
    })
}
