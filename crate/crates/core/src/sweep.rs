//! Configuration sweeps producing Pareto candidates.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::dependence::profile_capabilities;
use crate::error::SweepError;
use crate::objectives::{evaluate_exec, ExecObjectiveVector};
use crate::pareto::{Candidate, Objectives, SweepConfig};
use crate::partition::{dependency_graph, instantiate_layout, recursive_partition, single_group};
use crate::protocol::Corpus;
use crate::scheduler::{evaluate_eff, iterative_growth, EffConfig, EffObjectiveVector, EffOutcome, GrowthConfig};

/// A configuration that produced no candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub config: SweepConfig,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub candidates: Vec<Candidate>,
    pub rejected: Vec<Rejection>,
}

#[derive(Serialize)]
struct ResultRow<'a> {
    config: &'a SweepConfig,
    objectives: Option<&'a Objectives>,
    feasible: bool,
    layout_path: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
}

impl SweepOutcome {
    /// Every configuration, feasible or not.
    pub fn to_json(&self) -> String {
        let mut rows: Vec<ResultRow<'_>> = self
            .candidates
            .iter()
            .map(|c| ResultRow {
                config: &c.config,
                objectives: Some(&c.objectives),
                feasible: true,
                layout_path: c.layout_path.as_deref(),
                reason: None,
            })
            .collect();
        rows.extend(self.rejected.iter().map(|r| ResultRow {
            config: &r.config,
            objectives: None,
            feasible: false,
            layout_path: None,
            reason: Some(&r.reason),
        }));
        rows.sort_by(|a, b| a.config.partial_cmp(b.config).expect("finite configs"));
        serde_json::to_string_pretty(&rows).expect("sweep serializes")
    }

    fn finish(self) -> Result<Self, SweepError> {
        if self.candidates.is_empty() {
            Err(SweepError::AllInfeasible(self.rejected.iter().map(|r| format!("{}: {}", r.config, r.reason)).collect()))
        } else {
            Ok(self)
        }
    }
}

/// Default `k` range: 1 up to min(6, node count).
pub fn default_k_range(nodes: usize) -> Vec<usize> {
    (1..=nodes.clamp(1, 6)).collect()
}

pub fn default_l_range() -> Vec<usize> {
    vec![1, 2, 3]
}

pub fn default_fractions() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

/// Partitions the capability graph for every `(k, l)`, instantiates each
/// tree, and scores the layouts on the executability objectives.
pub fn sweep_exec(
    target: &Corpus,
    universe: &Corpus,
    scaling: &Corpus,
    cat: &Catalog,
    k_range: &[usize],
    l_range: &[usize],
    threshold: f64,
) -> Result<SweepOutcome, SweepError> {
    if k_range.is_empty() || l_range.is_empty() {
        return Err(SweepError::EmptyRange);
    }
    let m = profile_capabilities(target, cat);
    let g = dependency_graph(&m);
    let configs: Vec<(usize, usize)> = k_range.iter().flat_map(|&k| l_range.iter().map(move |&l| (k, l))).collect();
    let results: Vec<Result<Candidate, Rejection>> = configs
        .par_iter()
        .map(|&(k, l)| {
            let config = SweepConfig::Exec { k, l };
            let reject = |reason: String| Rejection { config: config.clone(), reason };
            let tree = match k {
                0 => return Err(reject("k must be at least 1".into())),
                1 => single_group(&g),
                _ if k > g.len() => return Err(reject(format!("k exceeds the {} capabilities", g.len()))),
                _ => recursive_partition(&g, k, l).map_err(|e| reject(e.to_string()))?,
            };
            let layout = instantiate_layout(&tree, &m, cat, threshold).map_err(|e| reject(e.to_string()))?;
            let v = evaluate_exec(&layout, target, universe, scaling, cat).map_err(|e| reject(e.to_string()))?;
            let objectives = Objectives::new(&ExecObjectiveVector::NAMES, &ExecObjectiveVector::DIRECTIONS, v.values());
            let mut c = Candidate::new(config, objectives);
            c.layout = Some(layout);
            Ok(c)
        })
        .collect();
    collect(results).finish()
}

fn collect(results: Vec<Result<Candidate, Rejection>>) -> SweepOutcome {
    let mut out = SweepOutcome::default();
    for r in results {
        match r {
            Ok(c) => {
                info!("candidate {}: {:?}", c.config, c.objectives.values);
                out.candidates.push(c);
            }
            Err(r) => {
                warn!("rejected {}: {}", r.config, r.reason);
                out.rejected.push(r);
            }
        }
    }
    out
}

/// Parallel cap used when scoring a layout grown on `fraction` of `n`
/// protocols: the same number of protocols run concurrently, within
/// `[1, cap]`.
pub fn eff_parallel_cap(fraction: f64, n: usize, cap: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, cap.max(1))
}

/// Grows a layout for every `(fraction, seed)` and scores it on the
/// efficiency objectives over the whole corpus.
pub fn sweep_eff(
    c: &Corpus,
    cat: &Catalog,
    fractions: &[f64],
    seeds: &[u64],
    growth: &GrowthConfig,
    eff: &EffConfig,
) -> Result<SweepOutcome, SweepError> {
    if fractions.is_empty() || seeds.is_empty() {
        return Err(SweepError::EmptyRange);
    }
    let configs: Vec<(f64, u64)> = fractions.iter().flat_map(|&f| seeds.iter().map(move |&s| (f, s))).collect();
    let results: Vec<Result<Candidate, Rejection>> = configs
        .par_iter()
        .map(|&(fraction, seed)| {
            let config = SweepConfig::Eff { fraction, seed };
            let reject = |reason: String| Rejection { config: config.clone(), reason };
            let g = GrowthConfig { fraction, seed, ..growth.clone() };
            let report = iterative_growth(c, cat, &g).map_err(|e| reject(e.to_string()))?;
            let mut e = eff.clone();
            e.sim.parallel_cap = eff_parallel_cap(fraction, c.len(), growth.parallel_cap);
            e.sim.seed = seed;
            match evaluate_eff(&report.layout, c, cat, &e).map_err(|e| reject(e.to_string()))? {
                EffOutcome::Accepted { objectives, .. } => {
                    let o = Objectives::new(&EffObjectiveVector::NAMES, &EffObjectiveVector::DIRECTIONS, objectives.values());
                    let mut cand = Candidate::new(config, o);
                    cand.layout = Some(report.layout);
                    Ok(cand)
                }
                EffOutcome::Rejected { cost, cost_max } => Err(reject(format!("cost {cost} exceeds {cost_max}"))),
            }
        })
        .collect();
    collect(results).finish()
}
