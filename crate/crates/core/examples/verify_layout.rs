//! Builds a layout by hand and checks it against a corpus, first without
//! and then with the robot link that makes the chain executable.

use groundr::{check_executable, parse_protocols, Catalog, Connection, Corpus, Layout};

fn main() {
    let cat = Catalog::from_json_str(include_str!("../fixtures/sample_catalog.json")).unwrap();
    let corpus =
        Corpus::target(parse_protocols("protocol P1\n op A out r1\n op B in r1 out r2\n op C in r2 out r3\nend\n").unwrap())
            .unwrap();

    let mut l = Layout::new();
    for (id, ty) in [("a", "D_A"), ("b", "D_B"), ("c", "D_C")] {
        l.add_device(id, ty).unwrap();
    }
    l.add_robot("arm", "R").unwrap();
    l.connect(Connection::grouped("a", "b")).unwrap();

    let report = check_executable(&corpus, &l, &cat).unwrap();
    println!("before: {}", report.to_json());

    l.connect(Connection::associated("b", "c", "arm")).unwrap();
    let report = check_executable(&corpus, &l, &cat).unwrap();
    println!("after: {}", report.to_json());
}
