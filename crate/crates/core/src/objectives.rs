//! Executability-level objectives of a layout.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::dependence::StepGraph;
use crate::error::ObjectiveError;
use crate::executability::{Checker, FailureCause, Reachability};
use crate::layout::{Connection, DeviceInstance, EditOp, Element, Layout, RobotInstance};
use crate::protocol::{Corpus, Protocol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecObjectiveVector {
    pub flexibility: f64,
    pub reliability: f64,
    pub scalability: f64,
    pub system_complexity: f64,
    pub cost: f64,
}

impl ExecObjectiveVector {
    pub const NAMES: [&'static str; 5] = ["flexibility", "reliability", "scalability", "system_complexity", "cost"];
    pub const DIRECTIONS: [Direction; 5] =
        [Direction::Max, Direction::Max, Direction::Min, Direction::Min, Direction::Min];

    pub fn values(&self) -> Vec<f64> {
        vec![self.flexibility, self.reliability, self.scalability, self.system_complexity, self.cost]
    }
}

fn require_target(checker: &Checker<'_>, target: &Corpus) -> Result<(), ObjectiveError> {
    let report = checker.check(target);
    if report.verdict {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures.iter().map(|f| f.protocol.as_str()).collect();
        Err(ObjectiveError::TargetNotExecutable(names.join(", ")))
    }
}

/// Number of universe protocols outside the target that the layout can run.
pub fn flexibility(l: &Layout, target: &Corpus, universe: &Corpus, cat: &Catalog) -> Result<usize, ObjectiveError> {
    let checker = Checker::new(l, cat)?;
    require_target(&checker, target)?;
    let inside: BTreeSet<&str> = target.protocols.iter().map(|p| p.name.as_str()).collect();
    let extra: Vec<&Protocol> = universe.protocols.iter().filter(|p| !inside.contains(p.name.as_str())).collect();
    use rayon::prelude::*;
    Ok(extra.par_iter().filter(|p| checker.executable(p)).count())
}

/// Number of pipeline connections.
pub fn reliability(l: &Layout) -> usize {
    l.grouped_count()
}

/// Fraction of dependent capability steps whose inputs all arrive over
/// pipelines (or from the same device) under the checker's placement.
pub fn pipeline_fraction(l: &Layout, target: &Corpus, cat: &Catalog) -> Result<f64, ObjectiveError> {
    let checker = Checker::new(l, cat)?;
    let pipes = Reachability::grouped_only(l);
    let (mut dependent, mut piped) = (0usize, 0usize);
    for p in &target.protocols {
        let check = checker.check_protocol(p);
        let Some(assign) = check.assignment else {
            return Err(ObjectiveError::TargetNotExecutable(p.name.clone()));
        };
        let g = StepGraph::build(p, cat);
        for (k, preds) in g.predecessors().iter().enumerate() {
            if preds.is_empty() {
                continue;
            }
            dependent += 1;
            if preds.iter().all(|&q| pipes.reachable(assign[q], assign[k])) {
                piped += 1;
            }
        }
    }
    Ok(if dependent == 0 { 1.0 } else { piped as f64 / dependent as f64 })
}

/// Result of greedy augmentation towards a scaling corpus.
#[derive(Debug, Clone)]
pub struct Augmentation {
    pub edits: Vec<EditOp>,
    pub layout: Layout,
}

/// Greedily edits `l` until every protocol of `scaling` is executable.
///
/// Protocols are repaired in name order. A missing capability inserts one
/// device of the cheapest capable type. Otherwise the first unreachable
/// dependency under the first-capable-device placement gets a transport
/// link through the first robot, inserting the cheapest robot if the layout
/// has none.
pub fn augment(l: &Layout, scaling: &Corpus, cat: &Catalog) -> Result<Augmentation, ObjectiveError> {
    let mut layout = l.clone();
    let mut edits = Vec::new();
    let mut order: Vec<&Protocol> = scaling.protocols.iter().collect();
    order.sort_by(|a, b| a.name.cmp(&b.name));
    for p in order {
        loop {
            let edit = {
                let checker = Checker::new(&layout, cat)?;
                let check = checker.check_protocol(p);
                let Some(failure) = check.failure else { break };
                if failure.cause == FailureCause::MissingCapability {
                    missing_device(&checker, p, cat)?
                } else {
                    missing_link(&checker, &layout, p, cat)?
                }
            };
            layout.apply_in_place(&edit)?;
            edits.push(edit);
        }
    }
    Ok(Augmentation { edits, layout })
}

fn missing_device(checker: &Checker<'_>, p: &Protocol, cat: &Catalog) -> Result<EditOp, ObjectiveError> {
    let g = StepGraph::build(p, cat);
    let step = g
        .steps
        .iter()
        .find(|s| checker.domain(&s.capability).is_empty())
        .expect("missing-capability failure names an uncovered step");
    let ty = cat
        .cheapest_device(&step.capability)
        .ok_or_else(|| ObjectiveError::CannotScale(step.capability.clone()))?;
    let id = checker.layout.fresh_id(&ty.name);
    Ok(EditOp::insert(Element::Device(DeviceInstance::new(id, ty.name.clone()))))
}

fn missing_link(checker: &Checker<'_>, layout: &Layout, p: &Protocol, cat: &Catalog) -> Result<EditOp, ObjectiveError> {
    let Some(robot) = layout.robot_ids().next() else {
        let rt = cat.cheapest_robot().ok_or(ObjectiveError::NoRobotType)?;
        let id = layout.fresh_id(&rt.name);
        return Ok(EditOp::insert(Element::Robot(RobotInstance::new(id, rt.name.clone()))));
    };
    let g = StepGraph::build(p, cat);
    let assign: Vec<usize> = g.steps.iter().map(|s| checker.domain(&s.capability)[0]).collect();
    let &(a, b) = g
        .edges
        .iter()
        .find(|&&(a, b)| !checker.reach.reachable(assign[a], assign[b]))
        .expect("an infeasible protocol has an unreachable edge under any placement");
    let link = Connection::associated(checker.reach.id(assign[a]), checker.reach.id(assign[b]), robot);
    Ok(EditOp::insert(Element::Connection(link)))
}

/// Edit count of the greedy augmentation; an upper bound on the edit distance
/// to the nearest layout that executes `scaling`.
pub fn scalability(l: &Layout, scaling: &Corpus, cat: &Catalog) -> Result<usize, ObjectiveError> {
    Ok(augment(l, scaling, cat)?.edits.len())
}

pub fn evaluate_exec(
    l: &Layout,
    target: &Corpus,
    universe: &Corpus,
    scaling: &Corpus,
    cat: &Catalog,
) -> Result<ExecObjectiveVector, ObjectiveError> {
    Ok(ExecObjectiveVector {
        flexibility: flexibility(l, target, universe, cat)? as f64,
        reliability: reliability(l) as f64,
        scalability: scalability(l, scaling, cat)? as f64,
        system_complexity: l.system_complexity(cat)?,
        cost: l.cost(cat)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::profile_dependencies;
    use crate::executability::check_executable;
    use crate::partition::{dependency_graph, instantiate_layout, recursive_partition};

    fn sample() -> Catalog {
        Catalog::from_json_str(include_str!("../fixtures/sample_catalog.json")).unwrap()
    }

    fn p1() -> Protocol {
        Protocol::from_steps(
            "P1",
            &[("A", &[], &["r1"], None), ("B", &["r1"], &["r2"], None), ("C", &["r2"], &["r3"], None)],
        )
    }

    fn p2() -> Protocol {
        Protocol::from_steps("P2", &[("A", &[], &["r1"], None), ("C", &["r1"], &["r3"], None)])
    }

    fn hand() -> Corpus {
        Corpus::target(vec![p1(), p2()]).unwrap()
    }

    fn split_layout() -> Layout {
        let c = hand();
        let m = profile_dependencies(&c);
        let t = recursive_partition(&dependency_graph(&m), 2, 1).unwrap();
        instantiate_layout(&t, &m, &sample(), 0.0).unwrap()
    }

    #[test]
    fn flexibility_counts_extras() {
        let l = split_layout();
        let cat = sample();
        assert_eq!(flexibility(&l, &hand(), &hand(), &cat).unwrap(), 0);
        let p3 = Protocol::from_steps("P3", &[("B", &[], &["x"], None), ("C", &["x"], &[], None)]);
        let p4 = Protocol::from_steps("P4", &[("Zap", &[], &[], None)]);
        let u = Corpus::target(vec![p1(), p2(), p3]).unwrap();
        assert_eq!(flexibility(&l, &hand(), &u, &cat).unwrap(), 1);
        let u = Corpus::target(vec![p1(), p2(), p4]).unwrap();
        assert_eq!(flexibility(&l, &hand(), &u, &cat).unwrap(), 0);
    }

    #[test]
    fn flexibility_requires_target() {
        let err = flexibility(&Layout::new(), &hand(), &hand(), &sample()).unwrap_err();
        assert!(matches!(err, ObjectiveError::TargetNotExecutable(_)));
    }

    #[test]
    fn reliability_counts_pipelines() {
        assert_eq!(reliability(&split_layout()), 1);
        let mut l = Layout::new();
        for id in ["a", "b", "c", "d", "e"] {
            l.add_device(id, "D_A").unwrap();
        }
        for (a, b) in [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")] {
            l.connect(Connection::grouped(a, b)).unwrap();
        }
        assert_eq!(reliability(&l), 4);
    }

    #[test]
    fn scalability_zero_when_executable() {
        assert_eq!(scalability(&split_layout(), &hand(), &sample()).unwrap(), 0);
    }

    #[test]
    fn scalability_device_then_link() {
        let cat = Catalog::from_json_str(
            r#"{"devices": [{"name": "D_A", "capabilities": ["A"], "price": 1},
                            {"name": "D_B", "capabilities": ["B"], "price": 1},
                            {"name": "D_D", "capabilities": ["D"], "price": 1}],
                "robots": [{"name": "R", "price": 1, "gamma": 1}]}"#,
        )
        .unwrap();
        let mut l = Layout::new();
        l.add_device("a", "D_A").unwrap();
        l.add_device("b", "D_B").unwrap();
        l.add_robot("r", "R").unwrap();
        l.connect(Connection::associated("a", "b", "r")).unwrap();
        let p = Protocol::from_steps("P", &[("A", &[], &["x"], None), ("D", &["x"], &[], None)]);
        let scaling = Corpus::target(vec![p]).unwrap();
        let aug = augment(&l, &scaling, &cat).unwrap();
        assert_eq!(aug.edits.len(), 2);
        assert!(check_executable(&scaling, &aug.layout, &cat).unwrap().verdict);
    }

    #[test]
    fn scalability_inserts_robot_when_none() {
        let mut l = Layout::new();
        l.add_device("a", "D_A").unwrap();
        l.add_device("c", "D_C").unwrap();
        let scaling = Corpus::target(vec![p2()]).unwrap();
        let aug = augment(&l, &scaling, &sample()).unwrap();
        assert_eq!(aug.edits.len(), 2);
        assert_eq!(aug.layout.robot_ids().count(), 1);
    }

    #[test]
    fn scalability_unknown_type_errors() {
        let scaling = Corpus::target(vec![Protocol::from_steps("z", &[("Zap", &[], &[], None)])]).unwrap();
        let err = scalability(&Layout::new(), &scaling, &sample()).unwrap_err();
        assert!(matches!(err, ObjectiveError::CannotScale(c) if c == "Zap"));
    }

    #[test]
    fn evaluate_split_layout() {
        let cat = sample();
        let l = split_layout();
        let v = evaluate_exec(&l, &hand(), &hand(), &hand(), &cat).unwrap();
        // DoF of the robot: 2 links + 3 served devices + gamma 2.
        assert_eq!(v, ExecObjectiveVector {
            flexibility: 0.0,
            reliability: 1.0,
            scalability: 0.0,
            system_complexity: 3.0 + 1.0 + 7.0,
            cost: 1000.0 + 500.0 + 200.0 + 5000.0 + 100.0,
        });
        assert!(evaluate_exec(&Layout::new(), &hand(), &hand(), &hand(), &cat).is_err());
    }

    #[test]
    fn pipeline_fraction_reads_the_prose() {
        let cat = sample();
        assert_eq!(pipeline_fraction(&split_layout(), &hand(), &cat).unwrap(), 1.0 / 3.0);
        let m = profile_dependencies(&hand());
        let single = crate::partition::single_group(&dependency_graph(&m));
        let l = instantiate_layout(&single, &m, &cat, 0.0).unwrap();
        assert_eq!(pipeline_fraction(&l, &hand(), &cat).unwrap(), 1.0);
    }
}
