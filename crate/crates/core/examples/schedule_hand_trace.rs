//! Simulates two protocols sharing three single-capacity devices and
//! prints the event trace and metrics.

use groundr::scheduler::{minimal_layout, simulate, MetricsReport, SimConfig};
use groundr::{parse_protocols, Catalog, Corpus};

fn main() {
    let cat = Catalog::from_json_str(include_str!("../fixtures/sample_catalog.json")).unwrap();
    let c = Corpus::target(
        parse_protocols(
            "protocol P1\n op A out r1\n op B in r1 out r2\n op C in r2 out r3\nend\n\
             protocol P2\n op A out r1\n op C in r1 out r3\nend\n",
        )
        .unwrap(),
    )
    .unwrap();
    let l = minimal_layout(&c, &cat).unwrap();
    let trace = simulate(&l, &c, &cat, &SimConfig::default()).unwrap();
    print!("{}", trace.to_jsonl());
    let m = MetricsReport::from_trace(&trace, 60.0, 60.0).unwrap();
    println!("{}", m.to_json());
}
