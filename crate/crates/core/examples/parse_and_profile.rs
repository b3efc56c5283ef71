//! Parses two small protocols and prints their dependency matrix.

use groundr::{build_pdg, parse_protocols, profile_dependencies, Corpus};

const SOURCE: &str = "\
protocol P1
  op A out r1
  op B in r1 out r2
  op C in r2 out r3
end
protocol P2
  op A out r1
  op C in r1 out r3
end
";

fn main() {
    let protocols = parse_protocols(SOURCE).expect("valid DSL");
    for p in &protocols {
        let g = build_pdg(p);
        println!("{}: {} operations, {} dependence edges", p.name, p.operations.len(), g.edges.len());
    }
    let corpus = Corpus::target(protocols).expect("unique names");
    print!("{}", profile_dependencies(&corpus).to_csv());
}
