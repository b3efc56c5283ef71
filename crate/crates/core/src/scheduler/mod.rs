//! Discrete-event FCFS scheduling, efficiency metrics, and scheduling-driven
//! layout growth.

mod growth;
mod metrics;
mod sampling;
mod sim;

pub use growth::{iterative_growth, Exhaustion, GrowthConfig, GrowthReport, GrowthStep};
pub use metrics::{
    empty_active_queue_fraction, evaluate_eff, resource_utilization, response_time, throughput, EffConfig,
    EffObjectiveVector, EffOutcome, MetricsReport,
};
pub use sampling::{op_frequency_features, sample_representatives};
pub use sim::{simulate, EventKind, ScheduleTrace, SimConfig, StepRecord, TraceDevice, TraceEvent, Transfer};

use std::collections::BTreeMap;

use crate::catalog::Catalog;
use crate::dependence::profile_capabilities;
use crate::error::ScheduleError;
use crate::layout::{Connection, Layout};
use crate::protocol::{Corpus, Operation};

/// Operations with the same type, preconditions and postconditions share a
/// class, and so share ready and active queues.
pub fn op_class(op: &Operation) -> String {
    let join = |s: &std::collections::BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
    format!("{}[{}>{}]", op.op_type, join(&op.preconditions), join(&op.postconditions))
}

/// The smallest layout that runs every protocol: one device per distinct
/// cheapest type over the required capabilities, and a pipeline for every
/// dependency direction between different devices.
pub fn minimal_layout(c: &Corpus, cat: &Catalog) -> Result<Layout, ScheduleError> {
    let m = profile_capabilities(c, cat);
    let mut layout = Layout::new();
    let mut device_of_type: BTreeMap<String, String> = BTreeMap::new();
    let mut device_of_cap: Vec<String> = Vec::with_capacity(m.len());
    for cap in &m.op_types {
        let ty = cat.cheapest_device(cap).ok_or_else(|| ScheduleError::Uncoverable(cap.clone()))?;
        let id = match device_of_type.get(&ty.name) {
            Some(id) => id.clone(),
            None => {
                let id = layout.fresh_id(&ty.name);
                layout.add_device(id.clone(), ty.name.clone())?;
                device_of_type.insert(ty.name.clone(), id.clone());
                id
            }
        };
        device_of_cap.push(id);
    }
    for i in 0..m.len() {
        for j in 0..m.len() {
            let (a, b) = (&device_of_cap[i], &device_of_cap[j]);
            let link = Connection::grouped(a.clone(), b.clone());
            if a != b && m.entries[i][j] > 0.0 && !layout.has_connection(&link) {
                layout.connect(link)?;
            }
        }
    }
    Ok(layout)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::catalog::Catalog;
    use crate::protocol::{Corpus, Protocol};

    pub fn sample() -> Catalog {
        Catalog::from_json_str(include_str!("../../fixtures/sample_catalog.json")).unwrap()
    }

    pub fn p1(name: &str) -> Protocol {
        Protocol::from_steps(
            name,
            &[("A", &[], &["r1"], None), ("B", &["r1"], &["r2"], None), ("C", &["r2"], &["r3"], None)],
        )
    }

    pub fn hand() -> Corpus {
        Corpus::target(vec![
            p1("P1"),
            Protocol::from_steps("P2", &[("A", &[], &["r1"], None), ("C", &["r1"], &["r3"], None)]),
        ])
        .unwrap()
    }

    pub fn two_p1() -> Corpus {
        Corpus::target(vec![p1("P1a"), p1("P1b")]).unwrap()
    }
}
