use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use inflim::actions::{generate_ic_actions, ActionLog, EdgeProb};
use inflim::bil::{greedy_bil, greedy_grr, greedy_on_store, GreedyOptions, Solution};
use inflim::credit::{
    delta_set, oracle_pair_credit, oracle_set_credit, sigma_from_dags, CreditStore, DeltaEvaluator, UcRows,
    ORACLE_MAX_NODES,
};
use inflim::dag::{CreditScheme, CreditTable};
use inflim::error::{Error, Result};
use inflim::graph::{Edge, SocialGraph};
use inflim::harness::{
    baseline_high_degree, baseline_random, concentration_report, di_metric, preferential_attachment,
    run_experiment, ExperimentConfig, Rounding,
};
use inflim::ilm::{continuous_greedy, CgConfig};
use inflim::problem::{load_candidates, Instance, TargetSet};
use inflim::rounding::{feasible, randomized_round, swap_round, DEFAULT_TRIALS};

#[derive(Parser)]
#[command(name = "inflim", version, about = "Limit the influence of a target set by deleting edges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate independent-cascade action traces (and optionally a graph)
    Gen(GenArgs),
    /// Budgeted greedy edge deletion
    Bil(BilArgs),
    /// Continuous greedy under a per-node bound, then rounding
    Ilm(IlmArgs),
    /// Greedy restricted to the per-node bound
    Grr(GrrArgs),
    /// High-degree or random baseline
    Baseline(BaselineArgs),
    /// Influence summary, solution evaluation or an experiment grid
    Report(ReportArgs),
    /// Cross-check the credit engine against brute-force oracles
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Uniform,
    Learned,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    actions: PathBuf,
    /// File of node ids or an inline comma-separated list
    #[arg(long)]
    targets: String,
    /// `u v` lines; defaults to every edge seen in some propagation DAG
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "uniform")]
    scheme: Scheme,
    /// `u v action gamma` lines; overrides --scheme
    #[arg(long)]
    credits: Option<PathBuf>,
}

struct Loaded {
    instance: Instance,
    targets: TargetSet,
    candidates: Vec<Edge>,
}

impl Inputs {
    fn load(&self) -> Result<Loaded> {
        let (graph, stats) = SocialGraph::load(&self.graph)?;
        if stats.self_loops + stats.duplicates > 0 {
            log::warn!("dropped {} self-loops and {} duplicate edges", stats.self_loops, stats.duplicates);
        }
        let log = ActionLog::load(&self.actions, &graph)?;
        let scheme = match (&self.credits, self.scheme) {
            (Some(path), _) => CreditScheme::Explicit(CreditTable::load(path, &graph)?),
            (None, Scheme::Uniform) => CreditScheme::Uniform,
            (None, Scheme::Learned) => CreditScheme::NormalizedLearned,
        };
        let instance = Instance::new(graph, log, &scheme)?;
        let targets = TargetSet::parse(&self.targets, &instance.graph)?;
        let candidates = match &self.candidates {
            Some(path) => load_candidates(path, &instance.graph)?,
            None => instance.default_candidates(),
        };
        log::info!(
            "{} nodes, {} edges, {} actions, {} candidates, |X| = {}",
            instance.graph.node_count(),
            instance.graph.edge_count(),
            instance.log.action_count(),
            candidates.len(),
            targets.len()
        );
        Ok(Loaded {
            instance,
            targets,
            candidates,
        })
    }
}

#[derive(Args)]
struct GenArgs {
    /// Existing graph; otherwise a preferential-attachment graph is generated
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    #[arg(long, default_value_t = 3)]
    attach: usize,
    /// Where to write a generated graph
    #[arg(long)]
    graph_out: Option<PathBuf>,
    #[arg(long)]
    actions_out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    num_actions: usize,
    #[arg(long, default_value_t = 1)]
    seeds_per_action: usize,
    #[arg(long, default_value_t = 0.05)]
    prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BilArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(short)]
    k: usize,
    #[arg(long)]
    prune: bool,
    #[arg(long)]
    lazy: bool,
    /// CSV: step, edge, marginal, cumulativeDelta, DIpercent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundingArg {
    Randomized,
    Swap,
}

#[derive(Args)]
struct IlmArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(short)]
    b: usize,
    #[arg(long, default_value_t = 100)]
    tau: usize,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "randomized")]
    rounding: RoundingArg,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Cap on the total number of removed edges
    #[arg(long)]
    max_edges: Option<usize>,
    /// Writes `y`, the rounded edges, Δ and DI
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-trial rounding diagnostics next to --out
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct GrrArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(short)]
    b: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    HighDegree,
    Random,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum)]
    method: BaselineKind,
    #[arg(short)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run the experiment grid described by this key=value file
    #[arg(long, conflicts_with_all = ["graph", "actions", "targets"])]
    config: Option<PathBuf>,
    /// With --config: cross-check every cell against a from-scratch rebuild
    #[arg(long)]
    verify: bool,
    #[arg(long, required_unless_present = "config")]
    graph: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    actions: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    targets: Option<String>,
    #[arg(long, value_enum, default_value = "uniform")]
    scheme: Scheme,
    /// `u v` lines of removed edges to evaluate
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    dump_uc: Option<PathBuf>,
    #[arg(long)]
    dump_sc: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Greedy steps replayed against full rebuilds
    #[arg(short, default_value_t = 3)]
    k: usize,
    /// Candidates checked against the from-scratch Δ
    #[arg(long, default_value_t = 50)]
    edges: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Bil(a) => bil(a),
        Command::Ilm(a) => ilm(a),
        Command::Grr(a) => grr(a),
        Command::Baseline(a) => baseline(a),
        Command::Report(a) => report(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn show(graph: &SocialGraph, e: Edge) -> String {
    format!("({},{})", graph.external_id(e.src), graph.external_id(e.dst))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn gen(a: GenArgs) -> Result<()> {
    let graph = match &a.graph {
        Some(path) => SocialGraph::load(path)?.0,
        None => {
            let g = preferential_attachment(a.nodes, a.attach, a.seed)?;
            if let Some(out) = &a.graph_out {
                g.save(out)?;
            }
            g
        }
    };
    let log = generate_ic_actions(
        &graph,
        a.num_actions,
        a.seeds_per_action,
        &EdgeProb::Uniform(a.prob),
        a.seed,
    )?;
    log.save(&a.actions_out, &graph)?;
    println!(
        "{} actions, {} tuples over {} nodes",
        log.action_count(),
        log.tuple_count(),
        graph.node_count()
    );
    Ok(())
}

fn write_steps(loaded: &Loaded, sol: &Solution, out: Option<&Path>) -> Result<()> {
    let sigma = sigma_from_dags(&loaded.instance.dags, &loaded.targets, &loaded.instance.log);
    let mut csv = csv::Writer::from_writer(sink(out)?);
    csv.write_record(["step", "edge", "marginal", "cumulativeDelta", "DIpercent"])?;
    for (step, ((e, gain), total)) in sol
        .edges
        .iter()
        .zip(&sol.gain_per_step)
        .zip(sol.cumulative())
        .enumerate()
    {
        csv.write_record([
            (step + 1).to_string(),
            show(&loaded.instance.graph, *e),
            format!("{gain:.9}"),
            format!("{total:.9}"),
            format!("{:.6}", di_metric(sigma, sigma - total)?),
        ])?;
    }
    csv.flush().map_err(|e| Error::Io {
        path: out.map(Path::to_path_buf).unwrap_or_default(),
        source: e,
    })
}

fn bil(a: BilArgs) -> Result<()> {
    let loaded = a.inputs.load()?;
    let options = GreedyOptions {
        use_pruning: a.prune,
        use_lazy: a.lazy,
        per_node_limit: None,
    };
    let sol = greedy_bil(&loaded.instance, &loaded.targets, &loaded.candidates, a.k, &options)?;
    write_steps(&loaded, &sol, a.out.as_deref())
}

fn grr(a: GrrArgs) -> Result<()> {
    let loaded = a.inputs.load()?;
    let sol = greedy_grr(&loaded.instance, &loaded.targets, &loaded.candidates, a.b)?;
    write_steps(&loaded, &sol, a.out.as_deref())
}

fn ilm(a: IlmArgs) -> Result<()> {
    let loaded = a.inputs.load()?;
    let (instance, targets, candidates) = (&loaded.instance, &loaded.targets, &loaded.candidates);
    let rounding = match a.rounding {
        RoundingArg::Randomized => Rounding::Randomized,
        RoundingArg::Swap => Rounding::Swap,
    };
    if rounding == Rounding::Swap && a.max_edges.is_some() {
        return Err(Error::InvalidArgument("--max-edges requires randomized rounding".into()));
    }
    let eval = DeltaEvaluator::new(&instance.dags, targets, &instance.log, candidates);
    let config = CgConfig {
        tau: a.tau,
        samples: a.samples,
        seed: a.seed,
        max_edges: a.max_edges,
    };
    let y = continuous_greedy(&eval, a.b, &config)?;
    let (edges, delta, trials) = match rounding {
        Rounding::Randomized => {
            let out = randomized_round(&eval, &y.y, a.b, a.trials, a.seed, a.max_edges)?;
            (out.edges, out.delta, Some(out.trials))
        }
        Rounding::Swap => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let picked = swap_round(candidates, &y.y, a.b, &mut rng)?;
            let edges: Vec<Edge> = picked.iter().map(|&i| candidates[i]).collect();
            let mut members = vec![false; candidates.len()];
            picked.iter().for_each(|&i| members[i] = true);
            (edges, eval.delta_members(&members), None)
        }
    };
    debug_assert!(feasible(&edges, a.b));
    let sigma = eval.sigma();
    let di = di_metric(sigma, sigma - delta)?;
    let graph = &instance.graph;
    let mut out = csv::Writer::from_writer(sink(a.out.as_deref())?);
    out.write_record(["kind", "edge", "value"])?;
    for (e, yi) in candidates.iter().zip(&y.y) {
        if *yi > 0.0 {
            out.write_record(["y", &show(graph, *e), &format!("{yi:.6}")])?;
        }
    }
    for e in &edges {
        out.write_record(["selected", &show(graph, *e), "1"])?;
    }
    out.write_record(["delta", "", &format!("{delta:.9}")])?;
    out.write_record(["di_percent", "", &format!("{di:.6}")])?;
    out.flush().map_err(|e| Error::Io {
        path: a.out.clone().unwrap_or_default(),
        source: e,
    })?;
    if let (true, Some(trials), Some(path)) = (a.verbose, trials, &a.out) {
        let trial_path = path.with_extension("trials.csv");
        let mut w = csv::Writer::from_path(&trial_path)?;
        w.write_record(["trial", "delta", "edges", "max_load", "feasible"])?;
        for t in &trials {
            w.write_record([
                t.index.to_string(),
                format!("{:.9}", t.delta),
                t.edges.len().to_string(),
                t.max_load.to_string(),
                (t.max_load <= a.b).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: trial_path,
            source: e,
        })?;
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let loaded = a.inputs.load()?;
    let edges = match a.method {
        BaselineKind::HighDegree => baseline_high_degree(&loaded.instance.graph, &loaded.targets, a.k),
        BaselineKind::Random => baseline_random(&loaded.candidates, a.k, a.seed)?,
    };
    let removed: HashSet<Edge> = edges.iter().copied().collect();
    let delta = delta_set(&loaded.instance, &loaded.targets, &removed)?;
    let sigma = sigma_from_dags(&loaded.instance.dags, &loaded.targets, &loaded.instance.log);
    let mut out = sink(a.out.as_deref())?;
    let io = |e| Error::Io {
        path: a.out.clone().unwrap_or_default(),
        source: e,
    };
    for e in &edges {
        writeln!(out, "{}", show(&loaded.instance.graph, *e)).map_err(io)?;
    }
    writeln!(out, "# delta {delta:.9} di_percent {:.6}", di_metric(sigma, sigma - delta)?).map_err(io)?;
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    if let Some(path) = &a.config {
        let mut config = ExperimentConfig::load(path)?;
        config.settings.verify |= a.verify;
        let reports = run_experiment(&config)?;
        for r in &reports {
            println!(
                "{:<12} k={:<4} b={:<4} delta={:.6} DI={:.3}% top3={} {:.1}ms",
                r.method.to_string(),
                r.k.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                r.b.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                r.delta,
                r.di_percent,
                r.top3_share.map(|s| format!("{s:.1}%")).unwrap_or_else(|| "-".into()),
                r.wall_ms
            );
        }
        return Ok(());
    }
    let inputs = Inputs {
        graph: a.graph.expect("required by clap"),
        actions: a.actions.expect("required by clap"),
        targets: a.targets.expect("required by clap"),
        candidates: None,
        scheme: a.scheme,
        credits: None,
    };
    let loaded = inputs.load()?;
    let (instance, targets) = (&loaded.instance, &loaded.targets);
    let store = CreditStore::build(&instance.dags, targets, &instance.log, UcRows::All)?;
    let sigma = store.sigma();
    println!("sigma_cd = {sigma:.9}");
    for &x in targets.members() {
        match store.kappa(x) {
            Ok(k) => println!("kappa[{}] = {k:.6}", instance.graph.external_id(x)),
            Err(_) => println!("kappa[{}] = n/a (no actions)", instance.graph.external_id(x)),
        }
    }
    if let Some(path) = &a.dump_uc {
        store.dump_uc(path, &instance.graph)?;
    }
    if let Some(path) = &a.dump_sc {
        store.dump_sc(path, &instance.graph)?;
    }
    if let Some(path) = &a.solution {
        let edges = load_candidates(path, &instance.graph)?;
        let removed: HashSet<Edge> = edges.iter().copied().collect();
        let delta = delta_set(instance, targets, &removed)?;
        println!("removed {} edges: delta = {delta:.9}", edges.len());
        println!("DI = {:.6}%", di_metric(sigma, sigma - delta)?);
        if !edges.is_empty() {
            println!("top-3 head share = {:.3}%", concentration_report(&edges)?);
        }
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<()> {
    const TOL: f64 = 1e-9;
    let loaded = a.inputs.load()?;
    let (instance, targets, candidates) = (&loaded.instance, &loaded.targets, &loaded.candidates);
    let store = CreditStore::build(&instance.dags, targets, &instance.log, UcRows::All)?;
    let mut failures = Vec::new();
    let mut checked_dags = 0;
    for (idx, dag) in instance.dags.iter().enumerate() {
        if dag.node_count() > ORACLE_MAX_NODES {
            continue;
        }
        checked_dags += 1;
        for &u in dag.nodes() {
            let want = oracle_set_credit(dag, targets, u)?;
            if (store.sc(u, idx) - want).abs() > TOL {
                failures.push(format!("SC of {u} in action {}", dag.action()));
            }
            for &w in dag.nodes() {
                let want = oracle_pair_credit(dag, targets, u, w)?;
                if (store.uc(u, w, idx) - want).abs() > TOL {
                    failures.push(format!("UC {u}->{w} in action {}", dag.action()));
                }
            }
        }
    }
    println!("oracle check on {checked_dags} propagation DAGs");
    for &e in candidates.iter().take(a.edges) {
        let removed: HashSet<Edge> = [e].into_iter().collect();
        let want = delta_set(instance, targets, &removed)?;
        if (store.delta_single(e) - want).abs() > TOL {
            failures.push(format!("single-edge delta of {}", show(&instance.graph, e)));
        }
    }
    println!("single-edge delta check on {} candidates", candidates.len().min(a.edges));
    let k = a.k.min(candidates.len().saturating_sub(1));
    let mut replay = CreditStore::build(&instance.dags, targets, &instance.log, UcRows::HeadsOf(candidates))?;
    let mut removed = HashSet::new();
    let mut worst: f64 = 0.0;
    greedy_on_store(&mut replay, candidates, k, &GreedyOptions::default(), |s, e| {
        removed.insert(e);
        match CreditStore::build_without(&instance.dags, targets, &instance.log, UcRows::HeadsOf(candidates), &removed) {
            Ok(fresh) => worst = worst.max(s.max_deviation(&fresh)),
            Err(err) => failures.push(err.to_string()),
        }
    });
    println!("incremental replay of {k} picks: max deviation {worst:.3e}");
    if worst > TOL {
        failures.push(format!("incremental deviation {worst:.3e}"));
    }
    if failures.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        for f in failures.iter().take(20) {
            eprintln!("mismatch: {f}");
        }
        Err(Error::Verification(format!("{} mismatches", failures.len())))
    }
}
