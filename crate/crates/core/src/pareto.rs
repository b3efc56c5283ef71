//! Dominance, Pareto fronts and preference-based selection.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ParetoError;
use crate::layout::Layout;
pub use crate::objectives::Direction;

/// Parameters that produced a candidate.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepConfig {
    Exec { k: usize, l: usize },
    Eff { fraction: f64, seed: u64 },
}

impl fmt::Display for SweepConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepConfig::Exec { k, l } => write!(f, "k={k};l={l}"),
            SweepConfig::Eff { fraction, seed } => write!(f, "fraction={fraction};seed={seed}"),
        }
    }
}

/// Named objective values with their optimization directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub names: Vec<String>,
    pub directions: Vec<Direction>,
    pub values: Vec<f64>,
}

impl Objectives {
    pub fn new(names: &[&str], directions: &[Direction], values: Vec<f64>) -> Self {
        assert_eq!(names.len(), values.len(), "one value per objective");
        assert_eq!(directions.len(), values.len(), "one direction per objective");
        Objectives {
            names: names.iter().map(|s| s.to_string()).collect(),
            directions: directions.to_vec(),
            values,
        }
    }

    /// All objectives maximized with the given values.
    pub fn maximize(values: Vec<f64>) -> Self {
        let names: Vec<String> = (0..values.len()).map(|i| format!("f{i}")).collect();
        Objectives { names, directions: vec![Direction::Max; values.len()], values }
    }

    pub fn same_schema(&self, other: &Objectives) -> bool {
        self.names == other.names && self.directions == other.directions
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Values sign-flipped so that larger is better everywhere.
    pub fn aligned(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.directions)
            .map(|(v, d)| match d {
                Direction::Max => *v,
                Direction::Min => -v,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub config: SweepConfig,
    pub objectives: Objectives,
    #[serde(default = "yes")]
    pub feasible: bool,
    #[serde(default)]
    pub layout_path: Option<String>,
    #[serde(skip)]
    pub layout: Option<Layout>,
}

fn yes() -> bool {
    true
}

impl Candidate {
    pub fn new(config: SweepConfig, objectives: Objectives) -> Self {
        Candidate { config, objectives, feasible: true, layout_path: None, layout: None }
    }
}

/// `a` is at least as good everywhere and strictly better somewhere.
pub fn dominates(a: &Objectives, b: &Objectives) -> Result<bool, ParetoError> {
    if !a.same_schema(b) {
        return Err(ParetoError::SchemaMismatch);
    }
    Ok(dominates_aligned(&a.aligned(), &b.aligned()))
}

fn dominates_aligned(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Indices of the non-dominated vectors, ascending.
///
/// Vectors are visited in descending lexicographic order, so any dominator
/// of a vector is visited before it; each vector is compared only against
/// the front built so far.
pub fn pareto_indices(points: &[Objectives]) -> Result<Vec<usize>, ParetoError> {
    let Some(first) = points.first() else {
        return Err(ParetoError::Empty);
    };
    if points.iter().any(|p| !p.same_schema(first)) {
        return Err(ParetoError::SchemaMismatch);
    }
    let aligned: Vec<Vec<f64>> = points.iter().map(Objectives::aligned).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        aligned[b]
            .iter()
            .zip(&aligned[a])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&f| dominates_aligned(&aligned[f], &aligned[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    Ok(front)
}

/// Non-dominated candidates, in input order.
pub fn pareto_front(cs: &[Candidate]) -> Result<Vec<Candidate>, ParetoError> {
    let points: Vec<Objectives> = cs.iter().map(|c| c.objectives.clone()).collect();
    Ok(pareto_indices(&points)?.into_iter().map(|i| cs[i].clone()).collect())
}

/// Weighted sum of min-max normalized, direction-aligned objectives. Ties
/// within 1e-12 go to the smaller config.
pub fn select_by_preference<'a>(front: &'a [Candidate], weights: &[f64]) -> Result<&'a Candidate, ParetoError> {
    let Some(first) = front.first() else {
        return Err(ParetoError::Empty);
    };
    let width = first.objectives.values.len();
    if weights.len() != width || front.iter().any(|c| !c.objectives.same_schema(&first.objectives)) {
        return Err(ParetoError::SchemaMismatch);
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
        return Err(ParetoError::InvalidWeights);
    }
    let aligned: Vec<Vec<f64>> = front.iter().map(|c| c.objectives.aligned()).collect();
    let lo: Vec<f64> = (0..width).map(|j| aligned.iter().map(|a| a[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..width).map(|j| aligned.iter().map(|a| a[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let score = |a: &[f64]| -> f64 {
        (0..width)
            .map(|j| if hi[j] > lo[j] { weights[j] * (a[j] - lo[j]) / (hi[j] - lo[j]) } else { 0.0 })
            .sum()
    };
    let mut best = 0;
    let mut best_score = score(&aligned[0]);
    for i in 1..front.len() {
        let s = score(&aligned[i]);
        let tie = (s - best_score).abs() <= 1e-12;
        let earlier = front[i].config.partial_cmp(&front[best].config) == Some(Ordering::Less);
        if (!tie && s > best_score) || (tie && earlier) {
            best = i;
            best_score = s;
        }
    }
    Ok(&front[best])
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = rx.len() as f64;
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

/// Two objectives per candidate as CSV, for plotting a front.
pub fn csv_projection(cs: &[Candidate], x: &str, y: &str) -> Result<String, ParetoError> {
    let mut out = format!("config,{x},{y}\n");
    for c in cs {
        let (Some(a), Some(b)) = (c.objectives.get(x), c.objectives.get(y)) else {
            return Err(ParetoError::SchemaMismatch);
        };
        out.push_str(&format!("{},{a},{b}\n", c.config));
    }
    Ok(out)
}

pub fn candidates_to_json(cs: &[Candidate]) -> String {
    serde_json::to_string_pretty(cs).expect("candidates serialize")
}

pub fn candidates_from_json(text: &str) -> Result<Vec<Candidate>, serde_json::Error> {
    serde_json::from_str(text)
}
