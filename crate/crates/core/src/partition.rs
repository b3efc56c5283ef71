//! k-minimum-cut initialization of layouts.
//!
//! The dependency matrix becomes an undirected weighted graph, which is split
//! recursively into at most `k` parts per level for `l` levels. Each leaf
//! group becomes a pipeline cell; dependencies across groups are served by
//! robots, one per recursion level.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::dependence::DependencyMatrix;
use crate::error::PartitionError;
use crate::layout::{Connection, Layout};

/// Symmetric, nonnegative edge weights over named nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    pub nodes: Vec<String>,
    w: Vec<Vec<f64>>,
}

impl WeightedGraph {
    pub fn new(nodes: Vec<String>) -> Self {
        let n = nodes.len();
        WeightedGraph { nodes, w: vec![vec![0.0; n]; n] }
    }

    /// Builds a graph over nodes `0..n` named by their index.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut g = WeightedGraph::new((0..n).map(|i| i.to_string()).collect());
        for &(a, b, w) in edges {
            g.set(a, b, w);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sets `w(a, b) = w(b, a)`; self-loops are ignored.
    pub fn set(&mut self, a: usize, b: usize, weight: f64) {
        assert!(weight >= 0.0 && weight.is_finite(), "edge weights must be finite and nonnegative");
        if a != b {
            self.w[a][b] = weight;
            self.w[b][a] = weight;
        }
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.w[a][b]
    }

    pub fn total_weight(&self) -> f64 {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.w[i][j]).sum()
    }

    /// Weight of edges whose endpoints carry different labels.
    pub fn cut_weight(&self, label: &[usize]) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                if label[i] != label[j] {
                    total += self.w[i][j];
                }
            }
        }
        total
    }

    /// Weight between `side` and the rest of `within`.
    fn boundary(&self, side: &[usize], within: &[usize]) -> f64 {
        let set: BTreeSet<usize> = side.iter().copied().collect();
        let mut total = 0.0;
        for &a in side {
            for &b in within {
                if !set.contains(&b) {
                    total += self.w[a][b];
                }
            }
        }
        total
    }
}

/// Undirected graph with `w(i, j) = max(m(i, j), m(j, i))`.
pub fn dependency_graph(m: &DependencyMatrix) -> WeightedGraph {
    let mut g = WeightedGraph::new(m.op_types.clone());
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            g.set(i, j, m.entries[i][j].max(m.entries[j][i]));
        }
    }
    g
}

/// A two-way split. `parts[0]` is the smaller side, ties by smallest member.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub weight: f64,
    pub parts: [Vec<usize>; 2],
}

fn order_parts(mut a: Vec<usize>, mut b: Vec<usize>) -> [Vec<usize>; 2] {
    a.sort_unstable();
    b.sort_unstable();
    if (b.len(), &b) < (a.len(), &a) {
        [b, a]
    } else {
        [a, b]
    }
}

/// Stoer–Wagner minimum cut restricted to the node subset `within`.
fn stoer_wagner(g: &WeightedGraph, within: &[usize]) -> Cut {
    let n = within.len();
    debug_assert!(n >= 2);
    let mut w: Vec<Vec<f64>> = within.iter().map(|&a| within.iter().map(|&b| g.w[a][b]).collect()).collect();
    let mut groups: Vec<Vec<usize>> = within.iter().map(|&a| vec![a]).collect();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    while alive.len() > 1 {
        let mut added = vec![false; n];
        let mut key = vec![0.0; n];
        let mut prev = alive[0];
        let mut last = alive[0];
        added[last] = true;
        for &v in &alive {
            key[v] = w[last][v];
        }
        for _ in 1..alive.len() {
            let next = alive
                .iter()
                .copied()
                .filter(|&v| !added[v])
                .fold(None, |acc: Option<usize>, v| match acc {
                    Some(a) if key[a] >= key[v] => Some(a),
                    _ => Some(v),
                })
                .expect("unadded vertex");
            added[next] = true;
            prev = last;
            last = next;
            for &v in &alive {
                if !added[v] {
                    key[v] += w[next][v];
                }
            }
        }
        let phase = key[last];
        if best.as_ref().is_none_or(|(bw, _)| phase < *bw) {
            best = Some((phase, groups[last].clone()));
        }
        let moved = std::mem::take(&mut groups[last]);
        groups[prev].extend(moved);
        for &v in &alive {
            let add = w[last][v];
            w[prev][v] += add;
            w[v][prev] = w[prev][v];
        }
        w[prev][prev] = 0.0;
        alive.retain(|&v| v != last);
    }
    let (_, side) = best.expect("at least one phase");
    let other: Vec<usize> = within.iter().copied().filter(|v| !side.contains(v)).collect();
    // Recompute from original weights so the reported value is the plain sum.
    let weight = g.boundary(&side, within);
    Cut { weight, parts: order_parts(side, other) }
}

/// Global minimum cut of the whole graph.
pub fn global_min_cut(g: &WeightedGraph) -> Result<Cut, PartitionError> {
    if g.len() < 2 {
        return Err(PartitionError::TooFewNodes(g.len()));
    }
    let all: Vec<usize> = (0..g.len()).collect();
    Ok(stoer_wagner(g, &all))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KCut {
    pub weight: f64,
    /// Components sorted by their smallest member.
    pub components: Vec<Vec<usize>>,
}

/// Greedy successive splitting within `within`: repeatedly apply the
/// minimum cut to the component whose split adds the least weight.
fn split_greedy(g: &WeightedGraph, within: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut comps: Vec<Vec<usize>> = vec![{
        let mut v = within.to_vec();
        v.sort_unstable();
        v
    }];
    let mut cache: BTreeMap<Vec<usize>, Cut> = BTreeMap::new();
    while comps.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in comps.iter().enumerate() {
            if c.len() < 2 {
                continue;
            }
            let cut = cache.entry(c.clone()).or_insert_with(|| stoer_wagner(g, c));
            let better = match best {
                None => true,
                Some((bi, bw)) => cut.weight < bw || (cut.weight == bw && *c < comps[bi]),
            };
            if better {
                best = Some((i, cut.weight));
            }
        }
        let (i, _) = best.expect("a splittable component exists while fewer than k components");
        let c = comps.swap_remove(i);
        let cut = cache.remove(&c).expect("cached cut");
        let [a, b] = cut.parts;
        comps.push(a);
        comps.push(b);
    }
    comps.sort();
    comps
}

/// Approximate minimum k-cut; within a factor `2 - 2/k` of optimal.
pub fn k_min_cut(g: &WeightedGraph, k: usize) -> Result<KCut, PartitionError> {
    if k < 1 || k > g.len() {
        return Err(PartitionError::KOutOfRange { k, nodes: g.len() });
    }
    let all: Vec<usize> = (0..g.len()).collect();
    let components = split_greedy(g, &all, k);
    let mut label = vec![0; g.len()];
    for (ci, c) in components.iter().enumerate() {
        for &v in c {
            label[v] = ci;
        }
    }
    Ok(KCut { weight: g.cut_weight(&label), components })
}

/// Hierarchy of splits. Leaves are the final groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionTree {
    pub members: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<PartitionTree>,
}

impl PartitionTree {
    pub fn leaf(members: Vec<String>) -> Self {
        PartitionTree { members, children: Vec::new() }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn leaves(&self) -> Vec<&PartitionTree> {
        if self.is_leaf() {
            vec![self]
        } else {
            self.children.iter().flat_map(|c| c.leaves()).collect()
        }
    }

    pub fn leaf_groups(&self) -> Vec<Vec<String>> {
        self.leaves().into_iter().map(|l| l.members.clone()).collect()
    }

    pub fn depth(&self) -> usize {
        self.children.iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    /// Depth of the deepest node containing both `a` and `b`, i.e. the
    /// recursion level at which they were separated.
    pub fn split_level(&self, a: &str, b: &str) -> Option<usize> {
        let has = |t: &PartitionTree, x: &str| t.members.iter().any(|m| m == x);
        if !has(self, a) || !has(self, b) {
            return None;
        }
        for c in &self.children {
            if let Some(d) = c.split_level(a, b) {
                return Some(d + 1);
            }
        }
        Some(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Recursively splits every component into `k` parts, `l` levels deep.
/// Components with fewer than `k` nodes are not split further.
pub fn recursive_partition(g: &WeightedGraph, k: usize, l: usize) -> Result<PartitionTree, PartitionError> {
    if k < 2 {
        return Err(PartitionError::KOutOfRange { k, nodes: g.len() });
    }
    if l < 1 {
        return Err(PartitionError::InvalidDepth);
    }
    let all: Vec<usize> = (0..g.len()).collect();
    Ok(build_tree(g, &all, k, l))
}

fn build_tree(g: &WeightedGraph, within: &[usize], k: usize, levels: usize) -> PartitionTree {
    let mut sorted = within.to_vec();
    sorted.sort_unstable();
    let members = sorted.iter().map(|&i| g.nodes[i].clone()).collect();
    if levels == 0 || within.len() < k {
        return PartitionTree::leaf(members);
    }
    let children = split_greedy(g, within, k).iter().map(|c| build_tree(g, c, k, levels - 1)).collect();
    PartitionTree { members, children }
}

/// A tree with every node in one leaf (the `k = 1` configuration).
pub fn single_group(g: &WeightedGraph) -> PartitionTree {
    PartitionTree::leaf(g.nodes.clone())
}

/// Builds a layout from a partition tree.
///
/// Each leaf member gets one device of the cheapest capable type. Inside a
/// leaf, `i -> j` is a pipeline when `m(i, j) > threshold`. Dependent pairs
/// in different leaves are linked by the robot of the level that separated
/// them.
pub fn instantiate_layout(
    t: &PartitionTree,
    m: &DependencyMatrix,
    cat: &Catalog,
    threshold: f64,
) -> Result<Layout, PartitionError> {
    let mut layout = Layout::new();
    let mut device_of: BTreeMap<&str, String> = BTreeMap::new();
    let mut leaf_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (li, leaf) in t.leaves().into_iter().enumerate() {
        for name in &leaf.members {
            let ty = cat
                .cheapest_device(name)
                .ok_or_else(|| PartitionError::Uncoverable(name.clone()))?;
            let id = layout.fresh_id(&ty.name);
            layout.add_device(id.clone(), ty.name.clone()).expect("fresh device id");
            device_of.insert(name, id);
            leaf_of.insert(name, li);
        }
    }
    let weight = |a: &str, b: &str| m.index_of(a).and(m.index_of(b)).map_or(0.0, |_| m.get(a, b));
    let names: Vec<&str> = device_of.keys().copied().collect();
    let mut robot_at: BTreeMap<usize, String> = BTreeMap::new();
    for &a in &names {
        for &b in &names {
            if a == b {
                continue;
            }
            let (da, db) = (&device_of[a], &device_of[b]);
            if leaf_of[a] == leaf_of[b] {
                if weight(a, b) > threshold {
                    layout.connect(Connection::grouped(da.clone(), db.clone())).expect("new pipeline");
                }
            } else if a < b && weight(a, b).max(weight(b, a)) > threshold {
                let level = t.split_level(a, b).expect("both names are in the tree");
                let robot = match robot_at.get(&level) {
                    Some(r) => r.clone(),
                    None => {
                        let rt = cat.cheapest_robot().ok_or(PartitionError::NoRobotType)?;
                        let id = layout.fresh_id(&rt.name);
                        layout.add_robot(id.clone(), rt.name.clone()).expect("fresh robot id");
                        robot_at.insert(level, id.clone());
                        id
                    }
                };
                layout
                    .connect(Connection::associated(da.clone(), db.clone(), robot))
                    .expect("new transport link");
            }
        }
    }
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::profile_dependencies;
    use crate::executability::check_executable;
    use crate::layout::Rho;
    use crate::protocol::{Corpus, Protocol};

    fn hand_corpus() -> Corpus {
        Corpus::target(vec![
            Protocol::from_steps(
                "P1",
                &[("A", &[], &["r1"], None), ("B", &["r1"], &["r2"], None), ("C", &["r2"], &["r3"], None)],
            ),
            Protocol::from_steps("P2", &[("A", &[], &["r1"], None), ("C", &["r1"], &["r3"], None)]),
        ])
        .unwrap()
    }

    fn sample() -> Catalog {
        Catalog::from_json_str(include_str!("../fixtures/sample_catalog.json")).unwrap()
    }

    fn names(g: &WeightedGraph, comps: &[Vec<usize>]) -> Vec<Vec<String>> {
        comps.iter().map(|c| c.iter().map(|&i| g.nodes[i].clone()).collect()).collect()
    }

    fn h_graph() -> WeightedGraph {
        dependency_graph(&profile_dependencies(&hand_corpus()))
    }

    #[test]
    fn h_graph_weights() {
        let g = h_graph();
        assert_eq!(g.nodes, ["A", "B", "C"]);
        assert_eq!(g.weight(0, 1), 0.5);
        assert_eq!(g.weight(1, 2), 1.0);
        assert_eq!(g.weight(0, 2), 0.5);
        assert_eq!(g.weight(1, 0), 0.5);
    }

    #[test]
    fn zero_matrix_gives_zero_graph() {
        let g = dependency_graph(&DependencyMatrix::empty());
        assert!(g.is_empty());
        let c = Corpus::target(vec![Protocol::from_steps("x", &[("A", &[], &[], None), ("B", &[], &[], None)])])
            .unwrap();
        assert_eq!(dependency_graph(&profile_dependencies(&c)).total_weight(), 0.0);
    }

    #[test]
    fn triangle_min_cut() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 10.0)]);
        let cut = global_min_cut(&g).unwrap();
        assert_eq!(cut.weight, 2.0);
        assert_eq!(cut.parts, [vec![1], vec![0, 2]]);
    }

    #[test]
    fn tiny_cuts() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 3.0)]);
        assert_eq!(global_min_cut(&g).unwrap().weight, 3.0);
        let g = WeightedGraph::from_edges(2, &[]);
        assert_eq!(global_min_cut(&g).unwrap().weight, 0.0);
        assert_eq!(global_min_cut(&WeightedGraph::from_edges(1, &[])), Err(PartitionError::TooFewNodes(1)));
    }

    #[test]
    fn h_two_cut() {
        let g = h_graph();
        let kc = k_min_cut(&g, 2).unwrap();
        assert_eq!(kc.weight, 1.0);
        assert_eq!(names(&g, &kc.components), [vec!["A"], vec!["B", "C"]]);
    }

    #[test]
    fn k_extremes() {
        let g = h_graph();
        let one = k_min_cut(&g, 1).unwrap();
        assert_eq!((one.weight, one.components.len()), (0.0, 1));
        let all = k_min_cut(&g, 3).unwrap();
        assert_eq!(all.weight, g.total_weight());
        assert_eq!(all.components, [vec![0], vec![1], vec![2]]);
        assert!(k_min_cut(&g, 0).is_err());
        assert!(k_min_cut(&g, 4).is_err());
    }

    #[test]
    fn recursion() {
        let g = h_graph();
        let t1 = recursive_partition(&g, 2, 1).unwrap();
        assert_eq!(t1.leaf_groups(), [vec!["A"], vec!["B", "C"]]);
        assert_eq!(t1.depth(), 1);
        let t2 = recursive_partition(&g, 2, 2).unwrap();
        assert_eq!(t2.leaf_groups(), [vec!["A"], vec!["B"], vec!["C"]]);
        assert_eq!(t2.split_level("B", "C"), Some(1));
        assert_eq!(t2.split_level("A", "C"), Some(0));
        assert!(recursive_partition(&g, 1, 1).is_err());
        assert_eq!(recursive_partition(&g, 2, 0), Err(PartitionError::InvalidDepth));
    }

    #[test]
    fn tree_json_roundtrip() {
        let t = recursive_partition(&h_graph(), 2, 2).unwrap();
        assert_eq!(PartitionTree::from_json_str(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn instantiate_single_leaf() {
        let c = hand_corpus();
        let m = profile_dependencies(&c);
        let t = single_group(&dependency_graph(&m));
        let l = instantiate_layout(&t, &m, &sample(), 0.0).unwrap();
        assert_eq!(l.device_count(), 3);
        assert_eq!(l.robot_ids().count(), 0);
        for (a, b) in [("D_A#1", "D_B#1"), ("D_A#1", "D_C#1"), ("D_B#1", "D_C#1")] {
            assert!(l.has_connection(&Connection::grouped(a, b)), "{a}->{b}");
        }
        assert_eq!(l.grouped_count(), 3);
    }

    #[test]
    fn instantiate_two_groups() {
        let c = hand_corpus();
        let m = profile_dependencies(&c);
        let t = recursive_partition(&dependency_graph(&m), 2, 1).unwrap();
        let l = instantiate_layout(&t, &m, &sample(), 0.0).unwrap();
        assert_eq!(l.grouped_count(), 1);
        assert!(l.has_connection(&Connection::grouped("D_B#1", "D_C#1")));
        assert_eq!(l.robot_ids().collect::<Vec<_>>(), ["R#1"]);
        assert!(l.has_connection(&Connection::associated("D_A#1", "D_B#1", "R#1")));
        assert!(l.has_connection(&Connection::associated("D_A#1", "D_C#1", "R#1")));
        assert!(check_executable(&c, &l, &sample()).unwrap().verdict);
    }

    #[test]
    fn instantiate_singletons_uses_one_robot_per_level() {
        let c = hand_corpus();
        let m = profile_dependencies(&c);
        let t = recursive_partition(&dependency_graph(&m), 2, 2).unwrap();
        let l = instantiate_layout(&t, &m, &sample(), 0.0).unwrap();
        assert_eq!(l.grouped_count(), 0);
        assert_eq!(l.robot_ids().count(), 2);
        assert_eq!(l.connections().filter(|c| c.rho == Rho::Associated).count(), 3);
        assert!(check_executable(&c, &l, &sample()).unwrap().verdict);
    }

    #[test]
    fn uncoverable_capability() {
        let c = Corpus::target(vec![Protocol::from_steps("z", &[("Zap", &[], &[], None)])]).unwrap();
        let m = profile_dependencies(&c);
        let t = single_group(&dependency_graph(&m));
        assert_eq!(instantiate_layout(&t, &m, &sample(), 0.0), Err(PartitionError::Uncoverable("Zap".into())));
    }
}
