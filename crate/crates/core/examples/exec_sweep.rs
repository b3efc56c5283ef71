//! Sweeps partition shapes over a generated corpus and prints the
//! executability front.

use groundr::corpusgen::{generate, generate_catalog, GenParams};
use groundr::pareto::pareto_front;
use groundr::sweep::sweep_exec;
use groundr::CorpusRole;

fn main() {
    let g = generate(&GenParams { seed: 7, n_protocols: 30, n_op_types: 10, ..GenParams::default() }).unwrap();
    let cat = generate_catalog(&g.corpus, 7);
    let target = g.cluster(0, CorpusRole::Target);
    let scaling = g.corpus.clone().with_role(CorpusRole::Scaling);

    let out = sweep_exec(&target, &g.corpus, &scaling, &cat, &[1, 2, 3, 4], &[1, 2], 0.0).unwrap();
    let front = pareto_front(&out.candidates).unwrap();
    println!("{:<10} {:>5} {:>5} {:>5} {:>8} {:>10}", "config", "flex", "rel", "scal", "complex", "cost");
    for c in &front {
        let v = &c.objectives.values;
        println!("{:<10} {:>5} {:>5} {:>5} {:>8.1} {:>10.0}", c.config.to_string(), v[0], v[1], v[2], v[3], v[4]);
    }
}
