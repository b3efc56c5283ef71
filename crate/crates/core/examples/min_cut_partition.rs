//! Global and k-way minimum cuts on a small weighted graph, then a
//! recursive partition tree.

use groundr::partition::{global_min_cut, k_min_cut, recursive_partition, WeightedGraph};

fn main() {
    // Two triangles joined by a single light edge.
    let g = WeightedGraph::from_edges(
        6,
        &[(0, 1, 3.0), (1, 2, 3.0), (0, 2, 3.0), (3, 4, 2.0), (4, 5, 2.0), (3, 5, 2.0), (2, 3, 0.5)],
    );
    let cut = global_min_cut(&g).unwrap();
    println!("min cut {} separates {:?} from {:?}", cut.weight, cut.parts[0], cut.parts[1]);

    let three = k_min_cut(&g, 3).unwrap();
    println!("3-cut weight {} components {:?}", three.weight, three.components);

    let tree = recursive_partition(&g, 2, 2).unwrap();
    println!("leaves at depth 2: {:?}", tree.leaf_groups());
}
