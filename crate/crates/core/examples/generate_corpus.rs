//! Generates a seeded corpus and catalog and prints one protocol in DSL form.

use groundr::corpusgen::{generate, generate_catalog, GenParams};
use groundr::to_dsl;

fn main() {
    let g = generate(&GenParams { seed: 1, n_protocols: 6, ..GenParams::default() }).unwrap();
    let cat = generate_catalog(&g.corpus, 1);
    for (name, cluster) in &g.clusters {
        println!("{name} cluster {cluster}");
    }
    print!("{}", to_dsl(&g.corpus.protocols[0]));
    println!("{} device types, {} robot types", cat.devices.len(), cat.robots.len());
}
