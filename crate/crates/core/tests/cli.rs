//! End-to-end runs of the command-line front end.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use groundr::cli::{dispatch, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("groundr").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Relative path to file contents for everything under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Runs the whole pipeline into `root` and returns its exit codes.
fn pipeline(root: &Path) -> Vec<i32> {
    let gen = root.join("gen");
    let corpus = gen.join("corpus");
    let catalog = gen.join("catalog.json");
    let mut codes = vec![run(&["gen-corpus", "--out", p(&gen), "--seed", "5", "--n-protocols", "8"])];
    codes.push(run(&["compile", "--corpus", p(&corpus), "--out", p(&root.join("compiled"))]));
    codes.push(run(&["profile", "--corpus", p(&corpus), "--catalog", p(&catalog), "--out", p(&root.join("profile"))]));
    let exec = root.join("exec");
    codes.push(run(&[
        "synth-exec", "--corpus", p(&corpus), "--catalog", p(&catalog), "--out", p(&exec), "--k", "1..3", "--l", "1,2",
        "--weights", "1,1,1,1,1",
    ]));
    let eff = root.join("eff");
    codes.push(run(&[
        "synth-eff", "--corpus", p(&corpus), "--catalog", p(&catalog), "--out", p(&eff), "--fractions", "0,0.5,1",
        "--seeds", "1..2", "--sigma", "2",
    ]));
    let layout = eff.join("layouts").join("fraction1_seed1.json");
    codes.push(run(&[
        "simulate", "--corpus", p(&corpus), "--catalog", p(&catalog), "--layout", p(&layout), "--out",
        p(&root.join("sim")), "--seed", "3",
    ]));
    codes.push(run(&[
        "verify", "--corpus", p(&corpus), "--catalog", p(&catalog), "--layout", p(&layout), "--out",
        p(&root.join("verify")),
    ]));
    codes.push(run(&[
        "select", "--front", p(&eff.join("front.json")), "--weights", "1,1,0,0,0", "--out", p(&root.join("select")),
    ]));
    codes
}

#[test]
fn pipeline_is_deterministic_and_contained() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(pipeline(a.path()).iter().all(|&c| c == EXIT_OK));
    assert!(pipeline(b.path()).iter().all(|&c| c == EXIT_OK));
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert_eq!(v, &sb[k], "{k} differs between runs");
    }
    for expected in [
        "gen/catalog.json",
        "profile/dependency_matrix.csv",
        "exec/sweep.json",
        "exec/front.json",
        "exec/selected.json",
        "exec/front_flexibility_reliability.csv",
        "exec/layouts/k1_l1.dot",
        "eff/front_throughput_response_time.csv",
        "sim/trace.jsonl",
        "sim/metrics.json",
        "verify/report.json",
        "select/selected.json",
    ] {
        assert!(sa.contains_key(expected), "missing {expected}");
    }
}

#[test]
fn usage_and_infeasibility_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&[]), EXIT_USAGE);
    assert_eq!(run(&["--version"]), EXIT_OK);
    assert_eq!(run(&["synth-exec", "--corpus", "x"]), EXIT_USAGE);

    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    fs::write(corpus.join("p.proto.dsl"), "protocol P\n  op A out r1\n  op B in r1 out r2\nend\n").unwrap();
    let catalog = dir.path().join("catalog.json");
    fs::write(
        &catalog,
        r#"{"devices": [{"name": "DA", "capabilities": ["A"], "price": 1}, {"name": "DB", "capabilities": ["B"], "price": 1}]}"#,
    )
    .unwrap();
    let layout = dir.path().join("layout.json");
    fs::write(&layout, r#"{"devices": [{"id": "a", "device_type": "DA"}, {"id": "b", "device_type": "DB"}]}"#).unwrap();
    assert_eq!(run(&["verify", "--corpus", p(&corpus), "--catalog", p(&catalog), "--layout", p(&layout)]), EXIT_INFEASIBLE);

    fs::write(corpus.join("bad.proto.dsl"), "protocol Q\n  op\nend\n").unwrap();
    assert_eq!(run(&["compile", "--corpus", p(&corpus), "--out", p(&dir.path().join("o"))]), EXIT_USAGE);
    assert_eq!(run(&["select", "--front", p(&catalog), "--weights", "1"]), EXIT_USAGE);
}
