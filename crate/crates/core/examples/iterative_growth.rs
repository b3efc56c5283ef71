//! Grows a layout until two copies of a chain protocol run twice as fast
//! together as one after the other.

use groundr::scheduler::{iterative_growth, GrowthConfig};
use groundr::{parse_protocols, Catalog, Corpus};

fn main() {
    let cat = Catalog::from_json_str(include_str!("../fixtures/sample_catalog.json")).unwrap();
    let chain = "op A out r1\n op B in r1 out r2\n op C in r2 out r3\nend\n";
    let c = Corpus::target(parse_protocols(&format!("protocol X\n {chain}protocol Y\n {chain}")).unwrap()).unwrap();

    let report = iterative_growth(&c, &cat, &GrowthConfig { sigma: 2.0, ..GrowthConfig::default() }).unwrap();
    for s in &report.steps {
        println!(
            "{}: window {} parallel {} s sequential {} s duplicated {:?} success {}",
            s.protocol, s.window, s.parallel_makespan_s, s.sequential_makespan_s, s.duplicated, s.success
        );
    }
    println!("devices: {:?}", report.layout.device_ids().collect::<Vec<_>>());
}
