//! Applies and reverts edit operations and exports the result as DOT.

use groundr::layout::DeviceInstance;
use groundr::{Catalog, Connection, EditOp, Element, Layout};

fn main() {
    let cat = Catalog::from_json_str(include_str!("../fixtures/sample_catalog.json")).unwrap();
    let mut l = Layout::new();
    l.add_device("a", "D_A").unwrap();
    l.add_device("b", "D_B").unwrap();
    l.connect(Connection::grouped("a", "b")).unwrap();
    println!("cost {} complexity {}", l.cost(&cat).unwrap(), l.system_complexity(&cat).unwrap());

    let edits = [
        EditOp::insert(Element::Device(DeviceInstance::new("c", "D_C"))),
        EditOp::insert(Element::Connection(Connection::grouped("b", "c"))),
    ];
    let mut grown = l.clone();
    for e in &edits {
        grown.apply_in_place(e).unwrap();
    }
    println!("after edits: cost {}", grown.cost(&cat).unwrap());
    for e in edits.iter().rev() {
        grown.apply_in_place(&e.inverse()).unwrap();
    }
    assert_eq!(grown, l);
    print!("{}", l.export_dot());
}
