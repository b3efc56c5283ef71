//! Property tests for the library's structural invariants.

mod common;

use std::collections::BTreeMap;

use common::*;
use groundr::corpusgen::{generate, generate_catalog, GenParams};
use groundr::dependence::StepGraph;
use groundr::layout::DeviceInstance;
use groundr::objectives::{flexibility, reliability, scalability};
use groundr::pareto::{
    pareto_front, pareto_indices, select_by_preference, Candidate, Direction, Objectives, SweepConfig,
};
use groundr::partition::{
    dependency_graph, global_min_cut, instantiate_layout, k_min_cut, recursive_partition, single_group,
};
use groundr::scheduler::{iterative_growth, minimal_layout, simulate, GrowthConfig, SimConfig};
use groundr::{
    build_pdg, check_executable, parse_protocol, parse_protocols, profile_capabilities, profile_dependencies, to_dsl,
    Catalog, Connection, Corpus, CorpusRole, EditOp, Element, Layout, Protocol, Rho,
};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::seq::SliceRandom;
use rand::Rng;

/// Fixed seed so that every run explores the same cases.
fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, rng_seed: RngSeed::Fixed(0x6772_6f75), ..ProptestConfig::default() }
}

fn corpus(seed: u64, n: usize) -> Corpus {
    generate(&GenParams { seed, n_protocols: n, ..GenParams::default() }).unwrap().corpus
}

/// Every device and robot id replaced by `f(id)`.
fn relabel(l: &Layout, f: impl Fn(&str) -> String) -> Layout {
    let mut out = Layout::new();
    for d in l.devices() {
        out.add_device(f(&d.id), d.device_type).unwrap();
    }
    for r in l.robots() {
        out.add_robot(r.id.clone(), r.robot_type).unwrap();
    }
    for c in l.connections() {
        let link = match c.rho {
            Rho::Grouped => Connection::grouped(f(&c.from), f(&c.to)),
            _ => Connection::associated(f(&c.from), f(&c.to), c.robot.clone().unwrap()),
        };
        out.connect(link).unwrap();
    }
    out
}

/// A layout where every required capability has a device and all
/// devices are pairwise grouped in both directions.
fn clique_layout(c: &Corpus, cat: &Catalog) -> Layout {
    let mut l = Layout::new();
    for cap in profile_capabilities(c, cat).op_types {
        let ty = cat.cheapest_device(&cap).unwrap().name.clone();
        let id = l.fresh_id(&ty);
        l.add_device(id, ty).unwrap();
    }
    let ids: Vec<String> = l.device_ids().map(String::from).collect();
    for a in &ids {
        for b in &ids {
            if a != b {
                l.connect(Connection::grouped(a.clone(), b.clone())).unwrap();
            }
        }
    }
    l
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn dsl_round_trip(seed in any::<u64>()) {
        for p in corpus(seed, 5).protocols {
            let text = to_dsl(&p);
            prop_assert_eq!(&parse_protocol(&text).unwrap(), &p);
            prop_assert_eq!(parse_protocols(&text).unwrap(), parse_protocols(&text).unwrap());
        }
    }

    #[test]
    fn diagnostics_carry_locations(junk in "[a-z ]{1,20}", line in 0usize..4) {
        let mut lines = vec!["protocol P", "  op A out r1", "  op B in r1 out r2", "end"];
        let bad = format!("  ?{junk}");
        lines.insert(line + 1, &bad);
        let text = lines.join("\n");
        match parse_protocols(&text) {
            Err(groundr::error::DslError::Syntax(diags)) => {
                prop_assert!(!diags.is_empty());
                for d in diags {
                    prop_assert!(d.line >= 1 && d.column >= 1 && d.line <= lines.len());
                }
            }
            other => prop_assert!(false, "expected a syntax error, got {:?}", other),
        }
    }

    #[test]
    fn dependence_graphs_are_acyclic(seed in any::<u64>()) {
        for p in corpus(seed, 6).protocols {
            prop_assert!(build_pdg(&p).is_acyclic());
        }
    }

    #[test]
    fn profile_invariant_under_duplication(seed in any::<u64>()) {
        let c = corpus(seed, 6);
        let mut doubled = c.protocols.clone();
        doubled.extend(c.protocols.iter().map(|p| Protocol { name: format!("{}_copy", p.name), ..p.clone() }));
        let d = Corpus::target(doubled).unwrap();
        let (a, b) = (profile_dependencies(&c), profile_dependencies(&d));
        prop_assert_eq!(a.op_types, b.op_types);
        prop_assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn clique_layout_executes(seed in any::<u64>()) {
        let (c, cat) = small_pair(seed);
        prop_assert!(check_executable(&c, &clique_layout(&c, &cat), &cat).unwrap().verdict);
    }

    #[test]
    fn catalog_loads_are_stable(seed in any::<u64>(), probe in "[a-z]{1,8}") {
        let cat = generate_catalog(&corpus(seed, 4), seed);
        let json = cat.to_json();
        prop_assert_eq!(Catalog::from_json_str(&json).unwrap(), Catalog::from_json_str(&json).unwrap());
        prop_assert_eq!(cat.expand_operation(&probe), vec![probe.clone()]);
    }

    #[test]
    fn edits_invert(seed in any::<u64>()) {
        let (c, cat) = small_pair(seed);
        let mut r = rng(seed);
        let l = minimal_layout(&c, &cat).unwrap();
        let ty = cat.devices.choose(&mut r).unwrap().name.clone();
        let ids: Vec<String> = l.device_ids().map(String::from).collect();
        let mut edits = vec![EditOp::insert(Element::Device(DeviceInstance::new(l.fresh_id(&ty), ty)))];
        edits.extend(l.connections().cloned().map(|c| EditOp::delete(Element::Connection(c))));
        if ids.len() >= 2 {
            edits.push(EditOp::insert(Element::Connection(Connection::grouped(ids[1].clone(), ids[0].clone()))));
        }
        for e in edits {
            if let Ok(next) = l.apply_edit(&e) {
                prop_assert_eq!(next.apply_edit(&e.inverse()).unwrap(), l.clone());
            }
        }
    }

    #[test]
    fn complexity_and_cost_grow_with_devices(seed in any::<u64>()) {
        let (c, cat) = small_pair(seed);
        let l = minimal_layout(&c, &cat).unwrap();
        let (sc, cost) = (l.system_complexity(&cat).unwrap(), l.cost(&cat).unwrap());
        prop_assert!(sc >= 0.0 && cost >= 0.0);
        for ty in &cat.devices {
            let mut more = l.clone();
            more.add_device(more.fresh_id(&ty.name), ty.name.clone()).unwrap();
            prop_assert!(more.system_complexity(&cat).unwrap() > sc);
            prop_assert!(more.cost(&cat).unwrap() > cost);
        }
    }

    #[test]
    fn dof_invariant_under_relabeling(seed in any::<u64>()) {
        let (c, cat) = small_pair(seed);
        let m = profile_capabilities(&c, &cat);
        let g = dependency_graph(&m);
        prop_assume!(g.len() >= 2);
        let tree = recursive_partition(&g, 2, 2).unwrap();
        let l = instantiate_layout(&tree, &m, &cat, 0.0).unwrap();
        let renamed = relabel(&l, |id| format!("z{}", id.chars().rev().collect::<String>()));
        for r in l.robot_ids() {
            prop_assert_eq!(l.dof(r, &cat).unwrap(), renamed.dof(r, &cat).unwrap());
        }
    }

    #[test]
    fn min_cut_matches_enumeration(seed in any::<u64>(), n in 2usize..=10) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.6);
        prop_assert_eq!(global_min_cut(&g).unwrap().weight, brute_min_cut(&g));
    }

    #[test]
    fn k_cut_within_bound(seed in any::<u64>(), n in 3usize..=8, k in 2usize..=3) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, n, 0.7);
        let got = k_min_cut(&g, k).unwrap().weight;
        prop_assert!(got <= (2.0 - 2.0 / k as f64) * brute_k_cut(&g, k) + 1e-9);
    }

    #[test]
    fn synthesized_layouts_execute(seed in any::<u64>(), k in 1usize..=4, l in 1usize..=3) {
        let (c, cat) = small_pair(seed);
        let m = profile_capabilities(&c, &cat);
        let g = dependency_graph(&m);
        prop_assume!(k <= g.len());
        let tree = if k == 1 { single_group(&g) } else { recursive_partition(&g, k, l).unwrap() };
        let layout = instantiate_layout(&tree, &m, &cat, 0.0).unwrap();
        prop_assert!(check_executable(&c, &layout, &cat).unwrap().verdict);
    }

    #[test]
    fn deeper_trees_have_no_fewer_leaves(seed in any::<u64>(), k in 2usize..=4) {
        let (c, cat) = small_pair(seed);
        let g = dependency_graph(&profile_capabilities(&c, &cat));
        prop_assume!(k <= g.len());
        let counts: Vec<usize> = (1..=4).map(|l| recursive_partition(&g, k, l).unwrap().leaves().len()).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{:?}", counts);
    }

    #[test]
    fn exec_objectives_behave(seed in any::<u64>()) {
        let (c, cat) = small_pair(seed);
        let universe = corpus(seed.wrapping_add(1), 6).with_role(CorpusRole::Universe);
        let l = minimal_layout(&c, &cat).unwrap();
        prop_assert_eq!(scalability(&l, &c, &cat).unwrap(), 0);
        prop_assert_eq!(reliability(&l), l.connections().filter(|c| c.rho == Rho::Grouped).count());
        // Flexibility only counts protocols the catalog can cover at all.
        let coverable: Vec<Protocol> = universe
            .protocols
            .iter()
            .filter(|p| p.op_types().iter().all(|t| cat.cheapest_device(t).is_some()))
            .cloned()
            .collect();
        let universe = Corpus::new(CorpusRole::Universe, coverable).unwrap();
        let before = flexibility(&l, &c, &universe, &cat).unwrap();
        let mut more = l.clone();
        let ids: Vec<String> = more.device_ids().map(String::from).collect();
        let mut r = rng(seed);
        for _ in 0..4 {
            if ids.len() < 2 { break; }
            let pair: Vec<&String> = ids.choose_multiple(&mut r, 2).collect();
            let link = Connection::grouped(pair[0].clone(), pair[1].clone());
            if !more.has_connection(&link) {
                more.connect(link).unwrap();
            }
        }
        prop_assert!(flexibility(&more, &c, &universe, &cat).unwrap() >= before);
    }

    #[test]
    fn traces_satisfy_invariants(seed in any::<u64>(), cap in 1usize..=6) {
        let (c, cat) = small_pair(seed);
        let l = minimal_layout(&c, &cat).unwrap();
        let cfg = SimConfig { parallel_cap: cap, seed };
        let tr = simulate(&l, &c, &cat, &cfg).unwrap();
        let steps: usize = c.protocols.iter().map(|p| StepGraph::build(p, &cat).steps.len()).sum();
        let v = trace_violations(&tr, steps);
        prop_assert!(v.is_empty(), "{:?}", v);
        prop_assert_eq!(simulate(&l, &c, &cat, &cfg).unwrap().to_jsonl(), tr.to_jsonl());
    }

    #[test]
    fn growth_never_removes_devices(seed in any::<u64>(), sigma in 1.2f64..3.0) {
        let (c, cat) = small_pair(seed);
        let rep = iterative_growth(&c, &cat, &GrowthConfig { seed, sigma, parallel_cap: 4, ..GrowthConfig::default() }).unwrap();
        prop_assert!(rep.device_counts.windows(2).all(|w| w[0] <= w[1]));
    }

    // FCFS dispatch is a list schedule, and extra machines can reorder a
    // shared downstream queue for the worse. This property is expected to
    // find such cases.
    #[test]
    fn duplicating_the_bottleneck_never_slows_down(seed in any::<u64>()) {
        let (c, cat) = small_pair(seed);
        let l = minimal_layout(&c, &cat).unwrap();
        let cfg = SimConfig { parallel_cap: c.len(), seed };
        let tr = simulate(&l, &c, &cat, &cfg).unwrap();
        // Largest total wait, then busy time, then smallest id.
        let mut stats: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for r in &tr.records {
            let s = stats.entry(r.device.as_str()).or_default();
            s.0 += r.dispatch_us - r.push_us;
            s.1 += r.pop_us - r.start_us;
        }
        let best = stats.iter().filter(|(_, s)| s.0 > 0).max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)));
        prop_assume!(best.is_some());
        let id = best.unwrap().0.to_string();
        let mut dup = l.clone();
        let ty = dup.device_type(&id).unwrap().to_string();
        let copy = dup.fresh_id(&ty);
        dup.add_device(copy.clone(), ty).unwrap();
        let links: Vec<Connection> = l.connections().filter(|c| c.touches(&id)).cloned().collect();
        for c in links {
            let swap = |x: &str| if x == id { copy.clone() } else { x.to_string() };
            dup.connect(Connection::grouped(swap(&c.from), swap(&c.to))).unwrap();
        }
        let after = simulate(&dup, &c, &cat, &cfg).unwrap();
        prop_assert!(after.horizon_us <= tr.horizon_us, "{} -> {}", tr.horizon_us, after.horizon_us);
    }

    #[test]
    fn pareto_front_is_exact_and_order_free(seed in any::<u64>(), n in 1usize..=200) {
        let mut r = rng(seed);
        let dirs = [Direction::Max, Direction::Min, Direction::Max];
        let names = ["a", "b", "c"];
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.gen_range(0..8) as f64).collect()).collect();
        let objs: Vec<Objectives> = points.iter().map(|p| Objectives::new(&names, &dirs, p.clone())).collect();
        prop_assert_eq!(pareto_indices(&objs).unwrap(), brute_front(&points, &dirs));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let shuffled: Vec<Objectives> = perm.iter().map(|&i| objs[i].clone()).collect();
        let mut a: Vec<usize> = pareto_indices(&shuffled).unwrap().into_iter().map(|i| perm[i]).collect();
        a.sort();
        prop_assert_eq!(a, pareto_indices(&objs).unwrap());
    }

    #[test]
    fn preference_ignores_positive_rescaling(seed in any::<u64>(), scale in 0.01f64..100.0, which in 0usize..3) {
        let mut r = rng(seed);
        let dirs = [Direction::Max, Direction::Min, Direction::Max];
        let names = ["a", "b", "c"];
        let weights: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let make = |s: f64, r: &mut rand_chacha::ChaCha8Rng| -> Vec<Candidate> {
            (0..20)
                .map(|i| {
                    let mut v: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..10.0)).collect();
                    v[which] *= s;
                    Candidate::new(SweepConfig::Exec { k: i, l: 1 }, Objectives::new(&names, &dirs, v))
                })
                .collect()
        };
        let state = r.clone();
        let base = pareto_front(&make(1.0, &mut r)).unwrap();
        let scaled = pareto_front(&make(scale, &mut state.clone())).unwrap();
        let a = select_by_preference(&base, &weights).unwrap();
        let b = select_by_preference(&scaled, &weights).unwrap();
        prop_assert_eq!(&a.config, &b.config);
    }

    #[test]
    fn generated_catalogs_cover_corpora(seed in any::<u64>()) {
        let c = corpus(seed, 8);
        let cat = generate_catalog(&c, seed);
        for t in c.op_types() {
            prop_assert!(cat.cheapest_device(t).is_some());
        }
        prop_assert_eq!(corpus(seed, 8).protocols, c.protocols);
    }
}
