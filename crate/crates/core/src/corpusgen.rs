//! Seeded synthetic corpora and catalogs.
//!
//! Protocols are drawn from a few latent clusters, each with its own
//! preferred op-type sequence, so that corpora have domain structure.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{Catalog, DeviceType, RobotType};
use crate::error::GenError;
use crate::protocol::{Corpus, CorpusRole, Operation, Protocol};

const OP_NAMES: [&str; 24] = [
    "dispense", "stir", "heat", "filter", "centrifuge", "weigh", "dry", "cool", "extract", "wash", "measure_ph",
    "spectro", "pipette", "shake", "incubate", "evaporate", "titrate", "sonicate", "grind", "crystallize",
    "distill", "mix", "sample", "image",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    pub n_protocols: usize,
    pub n_op_types: usize,
    /// Inclusive range of operations per protocol.
    pub ops_per_protocol: (usize, usize),
    /// Probability that an operation consumes an earlier operation's output.
    pub density: f64,
    pub n_clusters: usize,
    /// Range of per-type base durations in seconds.
    pub duration_range_s: (f64, f64),
    /// Probability that an operation states its duration.
    pub duration_share: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 0,
            n_protocols: 20,
            n_op_types: 8,
            ops_per_protocol: (3, 8),
            density: 0.7,
            n_clusters: 3,
            duration_range_s: (30.0, 1800.0),
            duration_share: 0.7,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidParams(m.to_string()));
        let (lo, hi) = self.ops_per_protocol;
        if self.n_protocols > 0 && self.n_op_types == 0 {
            return bad("n_op_types must be at least 1");
        }
        if lo == 0 || lo > hi {
            return bad("ops_per_protocol must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.density) {
            return bad("density must lie in [0, 1]");
        }
        if self.n_clusters == 0 {
            return bad("n_clusters must be at least 1");
        }
        let (dl, dh) = self.duration_range_s;
        if !(dl > 0.0 && dl <= dh && dh.is_finite()) {
            return bad("duration range must satisfy 0 < min <= max");
        }
        if !(0.0..=1.0).contains(&self.duration_share) {
            return bad("duration_share must lie in [0, 1]");
        }
        Ok(())
    }
}

pub fn op_type_name(i: usize) -> String {
    match OP_NAMES.get(i) {
        Some(n) => n.to_string(),
        None => format!("op{i:02}"),
    }
}

/// A generated corpus with the latent cluster of each protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub corpus: Corpus,
    pub clusters: BTreeMap<String, usize>,
}

impl Generated {
    /// Protocols drawn from `cluster`, as a corpus with the given role.
    pub fn cluster(&self, cluster: usize, role: CorpusRole) -> Corpus {
        let names = self.clusters.iter().filter(|(_, c)| **c == cluster).map(|(n, _)| n.as_str());
        self.corpus.subset(role, names)
    }
}

/// Generates a corpus; protocol `i` is named `proto_{i:04}`.
pub fn generate_corpus(p: &GenParams) -> Result<Corpus, GenError> {
    Ok(generate(p)?.corpus)
}

pub fn generate(p: &GenParams) -> Result<Generated, GenError> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let types: Vec<String> = (0..p.n_op_types).map(op_type_name).collect();
    let base: Vec<f64> = types.iter().map(|_| rng.gen_range(p.duration_range_s.0..=p.duration_range_s.1)).collect();
    let (lo, hi) = p.ops_per_protocol;

    // Each cluster prefers an ordered sequence over its own slice of types.
    let mut shuffled: Vec<usize> = (0..types.len()).collect();
    shuffled.shuffle(&mut rng);
    let width = (2 * types.len()).div_ceil(p.n_clusters).clamp(1, types.len().max(1));
    let templates: Vec<Vec<usize>> = (0..p.n_clusters)
        .map(|c| {
            let start = c * types.len() / p.n_clusters;
            let mut t: Vec<usize> = (0..width).map(|i| shuffled[(start + i) % types.len().max(1)]).collect();
            t.shuffle(&mut rng);
            t
        })
        .collect();

    let mut protocols = Vec::with_capacity(p.n_protocols);
    let mut clusters = BTreeMap::new();
    for i in 0..p.n_protocols {
        let cluster = rng.gen_range(0..p.n_clusters);
        clusters.insert(format!("proto_{i:04}"), cluster);
        let template = &templates[cluster];
        let len = rng.gen_range(lo..=hi);
        let mut ops = Vec::with_capacity(len);
        for j in 0..len {
            let ty = if rng.gen_bool(0.85) { template[j % template.len()] } else { rng.gen_range(0..types.len()) };
            let mut op = Operation::new(j as u32, types[ty].clone()).with_outputs([format!("r{j}")]);
            if j > 0 && rng.gen_bool(p.density) {
                let src = if rng.gen_bool(0.6) { j - 1 } else { rng.gen_range(0..j) };
                op = op.with_inputs([format!("r{src}")]);
                if j > 1 && rng.gen_bool(p.density / 3.0) {
                    let other = rng.gen_range(0..j);
                    op = op.with_inputs([format!("r{other}")]);
                }
            } else {
                op = op.with_inputs([format!("stock_{}", types[ty])]);
            }
            if rng.gen_bool(p.duration_share) {
                let secs = (base[ty] * rng.gen_range(0.8..=1.2)).round().max(1.0);
                op = op.with_duration(secs);
            }
            ops.push(op);
        }
        protocols.push(Protocol::new(format!("proto_{i:04}"), ops));
    }
    Ok(Generated { corpus: Corpus { role: CorpusRole::Target, protocols }, clusters })
}

/// A catalog covering every op type of `c`.
///
/// Capabilities are grouped randomly onto device types of one or two
/// capabilities; a few slower multi-capability workstations and two robot
/// types are added. Durations default to the mean stated duration per type.
pub fn generate_catalog(c: &Corpus, seed: u64) -> Catalog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca7a);
    let mut stated: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for p in &c.protocols {
        for op in &p.operations {
            if let Some(d) = op.duration {
                let e = stated.entry(op.op_type.as_str()).or_default();
                e.0 += d;
                e.1 += 1;
            }
        }
    }
    let types: Vec<&str> = c.op_types().into_iter().collect();
    let mut duration_of: BTreeMap<&str, f64> = BTreeMap::new();
    for &t in &types {
        let d = match stated.get(t) {
            Some(&(sum, n)) => (sum / n as f64).round().max(1.0),
            None => rng.gen_range(60.0_f64..900.0).round(),
        };
        duration_of.insert(t, d);
    }

    let mut order = types.clone();
    order.shuffle(&mut rng);
    let mut devices = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let take = if i + 1 < order.len() && rng.gen_bool(0.3) { 2 } else { 1 };
        let caps: BTreeSet<String> = order[i..i + take].iter().map(|s| s.to_string()).collect();
        let price = (rng.gen_range(2_000.0_f64..20_000.0) * take as f64 * 0.8 / 10.0).round() * 10.0;
        let durations = caps.iter().map(|c| (c.clone(), duration_of[c.as_str()])).collect();
        devices.push(DeviceType {
            name: format!("D{:02}", devices.len() + 1),
            capabilities: caps,
            price,
            capacity: if rng.gen_bool(0.1) { 2 } else { 1 },
            durations,
        });
        i += take;
    }
    let workstations = if types.len() >= 3 { 2 } else { 0 };
    for w in 0..workstations {
        let caps: BTreeSet<String> = types.choose_multiple(&mut rng, 3).map(|s| s.to_string()).collect();
        let price = (rng.gen_range(25_000.0_f64..45_000.0) / 10.0).round() * 10.0;
        let durations = caps.iter().map(|c| (c.clone(), (duration_of[c.as_str()] * 1.2).round())).collect();
        devices.push(DeviceType { name: format!("W{:02}", w + 1), capabilities: caps, price, capacity: 1, durations });
    }
    let robots = vec![
        RobotType {
            name: "arm".into(),
            price: (rng.gen_range(12_000.0_f64..18_000.0) / 10.0).round() * 10.0,
            gamma: 2.0,
            transport_s: 20.0,
        },
        RobotType {
            name: "mobile".into(),
            price: (rng.gen_range(25_000.0_f64..35_000.0) / 10.0).round() * 10.0,
            gamma: 3.0,
            transport_s: 60.0,
        },
    ];
    Catalog { devices, robots, expansions: BTreeMap::new(), pipeline_unit_price: 500.0, ..Catalog::default() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::build_pdg;
    use crate::executability::check_executable;
    use crate::scheduler::minimal_layout;

    #[test]
    fn deterministic_in_seed() {
        let p = GenParams { seed: 9, ..GenParams::default() };
        assert_eq!(generate_corpus(&p).unwrap().protocols, generate_corpus(&p).unwrap().protocols);
        let other = generate_corpus(&GenParams { seed: 10, ..p.clone() }).unwrap();
        assert_ne!(generate_corpus(&p).unwrap().protocols, other.protocols);
        let c = generate_corpus(&p).unwrap();
        assert_eq!(generate_catalog(&c, 3), generate_catalog(&c, 3));
    }

    #[test]
    fn empty_corpus() {
        let c = generate_corpus(&GenParams { n_protocols: 0, ..GenParams::default() }).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn invalid_params() {
        for p in [
            GenParams { ops_per_protocol: (5, 2), ..GenParams::default() },
            GenParams { density: 1.5, ..GenParams::default() },
            GenParams { n_clusters: 0, ..GenParams::default() },
            GenParams { n_op_types: 0, ..GenParams::default() },
            GenParams { duration_range_s: (0.0, 1.0), ..GenParams::default() },
        ] {
            assert!(generate_corpus(&p).is_err(), "{p:?}");
        }
    }

    #[test]
    fn generated_protocols_are_valid_and_acyclic() {
        for seed in 0..50 {
            let c = generate_corpus(&GenParams { seed, ..GenParams::default() }).unwrap();
            for p in &c.protocols {
                p.validate().unwrap();
                assert!(build_pdg(p).is_acyclic());
            }
        }
    }

    #[test]
    fn catalog_covers_and_minimal_layout_executes() {
        for seed in 0..20 {
            let c = generate_corpus(&GenParams { seed, ..GenParams::default() }).unwrap();
            let cat = generate_catalog(&c, seed);
            cat.validate().unwrap();
            for t in c.op_types() {
                assert!(cat.cheapest_device(t).is_some(), "{t}");
            }
            let l = minimal_layout(&c, &cat).unwrap();
            assert!(check_executable(&c, &l, &cat).unwrap().verdict);
        }
    }

    #[test]
    fn hand_corpus_coverage() {
        let h = Corpus::target(vec![Protocol::from_steps(
            "P1",
            &[("A", &[], &["r1"], None), ("B", &["r1"], &["r2"], None), ("C", &["r2"], &["r3"], None)],
        )])
        .unwrap();
        let cat = generate_catalog(&h, 1);
        for t in ["A", "B", "C"] {
            assert!(!cat.capable_devices(t).is_empty());
        }
    }
}
