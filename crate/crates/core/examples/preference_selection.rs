//! Filters a handful of candidates to the Pareto front and picks one by
//! weighted preference.

use groundr::pareto::{pareto_front, select_by_preference, Candidate, Direction, Objectives, SweepConfig};

fn main() {
    let names = ["throughput", "response_time"];
    let dirs = [Direction::Max, Direction::Min];
    let points = [(0.0, 10.0, 900.0), (0.5, 14.0, 700.0), (0.75, 13.0, 800.0), (1.0, 16.0, 950.0)];
    let cands: Vec<Candidate> = points
        .iter()
        .map(|&(fraction, tp, rt)| {
            Candidate::new(SweepConfig::Eff { fraction, seed: 0 }, Objectives::new(&names, &dirs, vec![tp, rt]))
        })
        .collect();
    let front = pareto_front(&cands).unwrap();
    for c in &front {
        println!("{} {:?}", c.config, c.objectives.values);
    }
    for w in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
        println!("weights {w:?} -> {}", select_by_preference(&front, &w).unwrap().config);
    }
}
