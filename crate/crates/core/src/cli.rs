//! Command-line front end. The `groundr` binary forwards to [`dispatch`].

use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::catalog::Catalog;
use crate::corpusgen::{generate, generate_catalog, GenParams};
use crate::dependence::{build_pdg, profile_capabilities, profile_dependencies};
use crate::dsl::{parse_corpus, write_corpus};
use crate::error::DslError;
use crate::executability::check_executable;
use crate::layout::Layout;
use crate::pareto::{candidates_from_json, candidates_to_json, csv_projection, pareto_front, select_by_preference, Candidate};
use crate::protocol::{serialize_protocol, Corpus, CorpusRole};
use crate::scheduler::{simulate, EffConfig, GrowthConfig, MetricsReport, SimConfig};
use crate::sweep::{default_fractions, default_k_range, default_l_range, sweep_eff, sweep_exec, SweepOutcome};

/// Stdout output that tolerates a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEFECT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "groundr", version, about = "Synthesize automation-system layouts from protocol corpora")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Log level (error, warn, info, debug, trace); GROUNDR_LOG overrides.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse DSL files into interchange JSON and dependence graphs.
    Compile {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the dependency matrix as CSV and JSON.
    Profile {
        #[arg(long)]
        corpus: PathBuf,
        /// Profile over capability steps after this catalog's expansions.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check whether a layout executes every protocol of a corpus.
    Verify {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep (k, l) partitions and extract the executability front.
    SynthExec(SynthExecArgs),
    /// Sweep growth fractions and seeds and extract the efficiency front.
    SynthEff(SynthEffArgs),
    /// Simulate a corpus on a layout and report metrics.
    Simulate(SimulateArgs),
    /// Pick one candidate from a front file by weighted preference.
    Select {
        #[arg(long)]
        front: PathBuf,
        /// Comma-separated nonnegative weights, one per objective.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus and a matching catalog.
    GenCorpus(GenArgs),
}

#[derive(Args, Debug)]
struct SynthExecArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Defaults to the target corpus.
    #[arg(long)]
    universe: Option<PathBuf>,
    /// Defaults to the target corpus.
    #[arg(long)]
    scaling: Option<PathBuf>,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `a..b` (inclusive) or a comma-separated list.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    l: Option<String>,
    /// Pipeline threshold on dependency weights.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct EffArgs {
    #[arg(long, default_value_t = 5e4)]
    dt_throughput: f64,
    #[arg(long, default_value_t = 1e4)]
    dt_util: f64,
    /// Cost ceiling; unbounded by default.
    #[arg(long)]
    cost_max: Option<f64>,
    #[arg(long, default_value_t = 50)]
    parallel_cap: usize,
}

#[derive(Args, Debug)]
struct SynthEffArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// `a..b` (inclusive) or a comma-separated list.
    #[arg(long, default_value = "0")]
    seeds: String,
    #[arg(long, default_value_t = 1.2)]
    sigma: f64,
    #[arg(long, default_value_t = 4)]
    representatives: usize,
    #[command(flatten)]
    eff: EffArgs,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    eff: EffArgs,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    n_protocols: usize,
    #[arg(long, default_value_t = 8)]
    n_op_types: usize,
    #[arg(long, default_value_t = 3)]
    n_clusters: usize,
    #[arg(long, default_value_t = 3)]
    min_ops: usize,
    #[arg(long, default_value_t = 8)]
    max_ops: usize,
    #[arg(long, default_value_t = 0.7)]
    density: f64,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE, message: e.to_string() }
}

fn infeasible(e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_INFEASIBLE, message: e.to_string() }
}

type Run = Result<i32, Failure>;

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code: 0 success, 1 infeasible, 2 usage or input error,
/// 3 internal defect.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    init_logging(&cli.log_level);
    match catch_unwind(AssertUnwindSafe(|| run(cli.command))) {
        Ok(Ok(code)) => code,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            f.code
        }
        Err(_) => {
            eprintln!("error: internal defect; please report it with the inputs that triggered it");
            EXIT_DEFECT
        }
    }
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new()
        .parse_filters(level)
        .parse_env(env_logger::Env::new().filter("GROUNDR_LOG"))
        .format_timestamp(None)
        .try_init();
}

/// Inclusive `a..b` range or comma-separated list.
pub fn parse_range(text: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("invalid range `{text}`; expected `a..b` or a comma-separated list");
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn parse_usize_range(text: &str) -> Result<Vec<usize>, Failure> {
    Ok(parse_range(text).map_err(usage)?.into_iter().map(|v| v as usize).collect())
}

fn load_corpus(path: &Path, role: CorpusRole) -> Result<Corpus, Failure> {
    parse_corpus(path, role).map_err(|e| match &e {
        DslError::Corpus(files) => {
            let mut msg = e.to_string();
            for f in files {
                for d in &f.diagnostics {
                    msg.push_str(&format!("\n  {}:{d}", f.path.display()));
                }
            }
            usage(msg)
        }
        _ => usage(format!("{}: {e}", path.display())),
    })
}

fn load_catalog(path: &Path) -> Result<Catalog, Failure> {
    Catalog::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_layout(path: &Path) -> Result<Layout, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Layout::from_json_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn run(cmd: Command) -> Run {
    match cmd {
        Command::Compile { corpus, out } => compile(&corpus, &out),
        Command::Profile { corpus, catalog, out } => profile(&corpus, catalog.as_deref(), out.as_deref()),
        Command::Verify { corpus, layout, catalog, out } => verify(&corpus, &layout, &catalog, out.as_deref()),
        Command::SynthExec(a) => synth_exec(a),
        Command::SynthEff(a) => synth_eff(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Select { front, weights, out } => select(&front, &weights, out.as_deref()),
        Command::GenCorpus(a) => gen_corpus(a),
    }
}

fn compile(corpus: &Path, out: &Path) -> Run {
    let c = load_corpus(corpus, CorpusRole::Target)?;
    for p in &c.protocols {
        write(&out.join(format!("{}.json", p.name)), &serialize_protocol(p))?;
        let edges: Vec<_> = build_pdg(p)
            .edges
            .iter()
            .map(|e| serde_json::json!({"producer": e.producer, "consumer": e.consumer, "resource": e.resource}))
            .collect();
        let pdg = serde_json::json!({"protocol": p.name, "edges": edges});
        write(&out.join(format!("{}.pdg.json", p.name)), &serde_json::to_string_pretty(&pdg).expect("json"))?;
    }
    say!("compiled {} protocols ({} operations) into {}", c.len(), c.total_operations(), out.display());
    Ok(EXIT_OK)
}

fn profile(corpus: &Path, catalog: Option<&Path>, out: Option<&Path>) -> Run {
    let c = load_corpus(corpus, CorpusRole::Target)?;
    let m = match catalog {
        Some(path) => profile_capabilities(&c, &load_catalog(path)?),
        None => profile_dependencies(&c),
    };
    let csv = m.to_csv();
    if let Some(out) = out {
        write(&out.join("dependency_matrix.csv"), &csv)?;
        write(&out.join("dependency_matrix.json"), &m.to_json())?;
    }
    let _ = std::io::stdout().write_all(csv.as_bytes());
    Ok(EXIT_OK)
}

fn verify(corpus: &Path, layout: &Path, catalog: &Path, out: Option<&Path>) -> Run {
    let c = load_corpus(corpus, CorpusRole::Target)?;
    let cat = load_catalog(catalog)?;
    let l = load_layout(layout)?;
    let report = check_executable(&c, &l, &cat).map_err(usage)?;
    let json = report.to_json();
    if let Some(out) = out {
        write(&out.join("report.json"), &json)?;
    }
    say!("{json}");
    Ok(if report.verdict { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn label(c: &Candidate) -> String {
    c.config.to_string().replace(';', "_").replace('=', "")
}

/// Writes sweep, front, per-candidate layouts and a CSV projection.
fn write_sweep(mut outcome: SweepOutcome, out: &Path, x: &str, y: &str, weights: Option<&[f64]>) -> Run {
    for c in &mut outcome.candidates {
        let name = label(c);
        let layout = c.layout.as_ref().expect("sweep candidates carry layouts");
        let rel = format!("layouts/{name}.json");
        write(&out.join(&rel), &layout.to_json())?;
        write(&out.join(format!("layouts/{name}.dot")), &layout.export_dot())?;
        c.layout_path = Some(rel);
    }
    write(&out.join("sweep.json"), &outcome.to_json())?;
    let front = pareto_front(&outcome.candidates).map_err(infeasible)?;
    write(&out.join("front.json"), &candidates_to_json(&front))?;
    write(&out.join(format!("front_{x}_{y}.csv")), &csv_projection(&front, x, y).map_err(usage)?)?;
    say!(
        "{} candidates, {} rejected, {} on the front; results in {}",
        outcome.candidates.len(),
        outcome.rejected.len(),
        front.len(),
        out.display()
    );
    if let Some(w) = weights {
        let pick = select_by_preference(&front, w).map_err(usage)?;
        write(&out.join("selected.json"), &serde_json::to_string_pretty(pick).expect("json"))?;
        say!("selected {}", pick.config);
    }
    Ok(EXIT_OK)
}

fn synth_exec(a: SynthExecArgs) -> Run {
    let target = load_corpus(&a.corpus, CorpusRole::Target)?;
    let universe = match &a.universe {
        Some(p) => load_corpus(p, CorpusRole::Universe)?,
        None => target.clone().with_role(CorpusRole::Universe),
    };
    let scaling = match &a.scaling {
        Some(p) => load_corpus(p, CorpusRole::Scaling)?,
        None => target.clone().with_role(CorpusRole::Scaling),
    };
    let cat = load_catalog(&a.catalog)?;
    let nodes = profile_capabilities(&target, &cat).len();
    let k = match &a.k {
        Some(t) => parse_usize_range(t)?,
        None => default_k_range(nodes),
    };
    let l = match &a.l {
        Some(t) => parse_usize_range(t)?,
        None => default_l_range(),
    };
    info!("sweeping k in {k:?}, l in {l:?}");
    let outcome = sweep_exec(&target, &universe, &scaling, &cat, &k, &l, a.threshold).map_err(infeasible)?;
    write_sweep(outcome, &a.out, "flexibility", "reliability", a.weights.as_deref())
}

fn eff_config(e: &EffArgs, seed: u64) -> EffConfig {
    EffConfig {
        dt_throughput_s: e.dt_throughput,
        dt_util_s: e.dt_util,
        cost_max: e.cost_max.unwrap_or(f64::INFINITY),
        sim: SimConfig { parallel_cap: e.parallel_cap, seed },
    }
}

fn synth_eff(a: SynthEffArgs) -> Run {
    let c = load_corpus(&a.corpus, CorpusRole::Target)?;
    let cat = load_catalog(&a.catalog)?;
    let fractions = a.fractions.clone().unwrap_or_else(default_fractions);
    let seeds = parse_range(&a.seeds).map_err(usage)?;
    let growth = GrowthConfig {
        sigma: a.sigma,
        parallel_cap: a.eff.parallel_cap,
        representatives: a.representatives,
        ..GrowthConfig::default()
    };
    let outcome = sweep_eff(&c, &cat, &fractions, &seeds, &growth, &eff_config(&a.eff, 0)).map_err(infeasible)?;
    write_sweep(outcome, &a.out, "throughput", "response_time", a.weights.as_deref())
}

fn simulate_cmd(a: SimulateArgs) -> Run {
    let c = load_corpus(&a.corpus, CorpusRole::ScheduleSubset)?;
    let cat = load_catalog(&a.catalog)?;
    let l = load_layout(&a.layout)?;
    let cfg = eff_config(&a.eff, a.seed);
    let trace = simulate(&l, &c, &cat, &cfg.sim).map_err(infeasible)?;
    let metrics = MetricsReport::from_trace(&trace, cfg.dt_throughput_s, cfg.dt_util_s).map_err(usage)?;
    write(&a.out.join("trace.jsonl"), &trace.to_jsonl())?;
    write(&a.out.join("metrics.json"), &metrics.to_json())?;
    say!(
        "makespan {} s, throughput {}, mean response {:.3} s, utilization {:.4}",
        metrics.makespan_s, metrics.throughput, metrics.response_time_s, metrics.resource_utilization
    );
    Ok(EXIT_OK)
}

fn select(front: &Path, weights: &[f64], out: Option<&Path>) -> Run {
    let text = fs::read_to_string(front).map_err(|e| usage(format!("{}: {e}", front.display())))?;
    let cands = candidates_from_json(&text).map_err(|e| usage(format!("{}: {e}", front.display())))?;
    let pick = select_by_preference(&cands, weights).map_err(usage)?;
    let json = serde_json::to_string_pretty(pick).expect("json");
    if let Some(out) = out {
        write(&out.join("selected.json"), &json)?;
    }
    say!("{json}");
    Ok(EXIT_OK)
}

fn gen_corpus(a: GenArgs) -> Run {
    let params = GenParams {
        seed: a.seed,
        n_protocols: a.n_protocols,
        n_op_types: a.n_op_types,
        n_clusters: a.n_clusters,
        ops_per_protocol: (a.min_ops, a.max_ops),
        density: a.density,
        ..GenParams::default()
    };
    let g = generate(&params).map_err(usage)?;
    let cat = generate_catalog(&g.corpus, a.seed);
    write_corpus(&g.corpus, &a.out.join("corpus")).map_err(usage)?;
    write(&a.out.join("catalog.json"), &cat.to_json())?;
    write(&a.out.join("clusters.json"), &serde_json::to_string_pretty(&g.clusters).expect("json"))?;
    say!("wrote {} protocols and {} device types to {}", g.corpus.len(), cat.devices.len(), a.out.display());
    Ok(EXIT_OK)
}
