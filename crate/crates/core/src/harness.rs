//! Experiment plumbing: baselines, the DI metric, concentration reports,
//! synthetic benchmarks and the key=value experiment runner.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::actions::{generate_ic_actions, ActionLog, EdgeProb};
use crate::bil::{greedy_bil, greedy_grr, GreedyOptions};
use crate::credit::{delta_set, sigma_from_dags, DeltaEvaluator};
use crate::dag::CreditScheme;
use crate::error::{Error, Result};
use crate::graph::{Edge, NodeId, SocialGraph};
use crate::ilm::{continuous_greedy, CgConfig};
use crate::problem::{load_candidates, Instance, TargetSet};
use crate::rounding::{randomized_round, swap_round, DEFAULT_TRIALS};
use crate::textio;

/// Tag written as the first line of every experiment CSV.
pub const CSV_SCHEMA: &str = "# schema: inflim-experiment/1";

/// Largest tolerated gap between a reported `Δ` and a from-scratch rebuild.
pub const VERIFY_TOL: f64 = 1e-6;

/// Percentage decrease in influence.
pub fn di_metric(sigma_before: f64, sigma_after: f64) -> Result<f64> {
    if sigma_before <= 0.0 {
        return Err(Error::invalid(format!(
            "influence before deletion must be positive, got {sigma_before}"
        )));
    }
    Ok((sigma_before - sigma_after) / sigma_before * 100.0)
}

/// Edges from `X` into the highest-degree non-target nodes. Nodes are ranked
/// by in+out degree, ties by id; may return fewer than `k` edges.
pub fn baseline_high_degree(graph: &SocialGraph, targets: &TargetSet, k: usize) -> Vec<Edge> {
    let mut ranked: Vec<NodeId> = graph.nodes().filter(|&u| !targets.contains(u)).collect();
    ranked.sort_by_key(|&u| (std::cmp::Reverse(graph.total_degree(u)), u));
    let mut chosen = Vec::with_capacity(k);
    'outer: for v in ranked {
        for &x in graph.in_neighbors(v) {
            if chosen.len() >= k {
                break 'outer;
            }
            if targets.contains(x) {
                chosen.push(Edge::new(x, v));
            }
        }
    }
    if chosen.len() < k {
        log::warn!("high-degree baseline found {} of {k} edges", chosen.len());
    }
    chosen
}

/// Uniform `k`-subset of the candidates, in candidate order.
pub fn baseline_random(candidates: &[Edge], k: usize, seed: u64) -> Result<Vec<Edge>> {
    if k > candidates.len() {
        return Err(Error::invalid(format!(
            "cannot draw {k} edges from {} candidates",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, candidates.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| candidates[i]).collect())
}

/// Share (in percent) of `edges` entering the three heads with the most
/// removed in-edges.
pub fn concentration_report(edges: &[Edge]) -> Result<f64> {
    if edges.is_empty() {
        return Err(Error::invalid("concentration of an empty edge set"));
    }
    let mut groups: HashMap<NodeId, usize> = HashMap::new();
    for e in edges {
        *groups.entry(e.dst).or_default() += 1;
    }
    let mut sizes: Vec<usize> = groups.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let top: usize = sizes.iter().take(3).sum();
    Ok(100.0 * top as f64 / edges.len() as f64)
}

/// Preferential attachment: a clique on `attach + 1` seed nodes, then each
/// new node links to `attach` distinct existing nodes chosen with probability
/// proportional to degree. Every link is added in both directions.
pub fn preferential_attachment(nodes: usize, attach: usize, seed: u64) -> Result<SocialGraph> {
    if attach == 0 || nodes <= attach {
        return Err(Error::invalid(format!(
            "need 0 < attach < nodes, got attach={attach}, nodes={nodes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links: Vec<(NodeId, NodeId)> = Vec::new();
    let mut endpoints: Vec<NodeId> = Vec::new();
    for u in 0..=attach as NodeId {
        for v in 0..u {
            links.push((v, u));
            endpoints.extend([u, v]);
        }
    }
    for u in attach as NodeId + 1..nodes as NodeId {
        let mut picked: Vec<NodeId> = Vec::with_capacity(attach);
        while picked.len() < attach {
            let v = endpoints[rng.gen_range(0..endpoints.len())];
            if !picked.contains(&v) {
                picked.push(v);
            }
        }
        for v in picked {
            links.push((v, u));
            endpoints.extend([u, v]);
        }
    }
    let edges = links.into_iter().flat_map(|(u, v)| [Edge::new(u, v), Edge::new(v, u)]);
    Ok(SocialGraph::from_edges(nodes, edges).0)
}

/// Parameters of a synthetic benchmark: a preferential-attachment graph with
/// independent-cascade traces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Benchmark {
    pub nodes: usize,
    pub attach: usize,
    pub actions: usize,
    pub seeds_per_action: usize,
    pub edge_prob: f64,
}

impl Benchmark {
    pub fn generate(&self, seed: u64) -> Result<(SocialGraph, ActionLog)> {
        let graph = preferential_attachment(self.nodes, self.attach, seed)?;
        let log = generate_ic_actions(
            &graph,
            self.actions,
            self.seeds_per_action,
            &EdgeProb::Uniform(self.edge_prob),
            seed.wrapping_add(1),
        )?;
        Ok((graph, log))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetSampler {
    /// Uniform over the `pool` users with the most actions.
    TopActive { pool: usize },
    /// Uniform over users with at least one action.
    Uniform,
}

impl Default for TargetSampler {
    fn default() -> Self {
        TargetSampler::TopActive { pool: 150 }
    }
}

pub fn sample_targets(log: &ActionLog, size: usize, sampler: TargetSampler, seed: u64) -> Result<TargetSet> {
    let active = log.users_by_activity();
    let pool: &[NodeId] = match sampler {
        TargetSampler::TopActive { pool } => &active[..pool.min(active.len())],
        TargetSampler::Uniform => &active,
    };
    if size == 0 || size > pool.len() {
        return Err(Error::invalid(format!(
            "cannot draw {size} targets from a pool of {}",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = index::sample(&mut rng, pool.len(), size).into_iter().map(|i| pool[i]);
    Ok(TargetSet::new(log.counts().len(), members))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Greedy,
    HighDegree,
    Random,
    Grr,
    Ilm,
}

impl Method {
    /// Whether the grid parameter is the per-node bound `b` rather than `k`.
    pub fn per_node(self) -> bool {
        matches!(self, Method::Grr | Method::Ilm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Greedy => "greedy",
            Method::HighDegree => "high-degree",
            Method::Random => "random",
            Method::Grr => "grr",
            Method::Ilm => "ilm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" | "bil" => Ok(Method::Greedy),
            "high-degree" | "degree" => Ok(Method::HighDegree),
            "random" => Ok(Method::Random),
            "grr" => Ok(Method::Grr),
            "ilm" | "cg" => Ok(Method::Ilm),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Rounding {
    #[default]
    Randomized,
    Swap,
}

impl FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "randomized" => Ok(Rounding::Randomized),
            "swap" => Ok(Rounding::Swap),
            other => Err(Error::invalid(format!("unknown rounding `{other}`"))),
        }
    }
}

/// Settings shared by every cell of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSettings {
    pub lazy: bool,
    pub prune: bool,
    pub cg: CgConfig,
    pub rounding: Rounding,
    pub trials: usize,
    pub verify: bool,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            lazy: true,
            prune: false,
            cg: CgConfig::default(),
            rounding: Rounding::Randomized,
            trials: DEFAULT_TRIALS,
            verify: false,
        }
    }
}

/// Outcome of one (method, parameter) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub method: Method,
    pub k: Option<usize>,
    pub b: Option<usize>,
    pub seed: u64,
    pub edges: Vec<Edge>,
    pub per_step: Vec<f64>,
    pub delta: f64,
    pub di_percent: f64,
    /// `None` when no edge was removed.
    pub top3_share: Option<f64>,
    pub wall_ms: f64,
}

/// One experiment cell on a prepared instance. `param` is `k` for budgeted
/// methods and `b` for per-node ones.
pub fn run_cell(
    instance: &Instance,
    targets: &TargetSet,
    candidates: &[Edge],
    method: Method,
    param: usize,
    seed: u64,
    settings: &MethodSettings,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let sigma = sigma_from_dags(&instance.dags, targets, &instance.log);
    let evaluate = |edges: &[Edge]| {
        let eval = DeltaEvaluator::new(&instance.dags, targets, &instance.log, edges);
        eval.delta(0..edges.len())
    };
    let (edges, per_step, delta) = match method {
        Method::Greedy | Method::Grr => {
            let sol = if method == Method::Greedy {
                let options = GreedyOptions {
                    use_lazy: settings.lazy,
                    use_pruning: settings.prune,
                    per_node_limit: None,
                };
                greedy_bil(instance, targets, candidates, param, &options)?
            } else {
                greedy_grr(instance, targets, candidates, param)?
            };
            (sol.edges, sol.gain_per_step, sol.total_delta)
        }
        Method::HighDegree => {
            let edges = baseline_high_degree(&instance.graph, targets, param);
            let delta = evaluate(&edges);
            (edges, Vec::new(), delta)
        }
        Method::Random => {
            let edges = baseline_random(candidates, param, seed)?;
            let delta = evaluate(&edges);
            (edges, Vec::new(), delta)
        }
        Method::Ilm => {
            let eval = DeltaEvaluator::new(&instance.dags, targets, &instance.log, candidates);
            let cg = CgConfig { seed, ..settings.cg };
            let y = continuous_greedy(&eval, param, &cg)?;
            match settings.rounding {
                Rounding::Randomized => {
                    let out = randomized_round(&eval, &y.y, param, settings.trials, seed, cg.max_edges)?;
                    (out.edges, Vec::new(), out.delta)
                }
                Rounding::Swap => {
                    if cg.max_edges.is_some() {
                        return Err(Error::invalid("swap rounding does not support a total edge cap"));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let picked = swap_round(candidates, &y.y, param, &mut rng)?;
                    let members: Vec<bool> = {
                        let mut m = vec![false; candidates.len()];
                        picked.iter().for_each(|&i| m[i] = true);
                        m
                    };
                    let edges = picked.iter().map(|&i| candidates[i]).collect();
                    (edges, Vec::new(), eval.delta_members(&members))
                }
            }
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    if settings.verify {
        let removed: HashSet<Edge> = edges.iter().copied().collect();
        let reference = delta_set(instance, targets, &removed)?;
        if (reference - delta).abs() > VERIFY_TOL {
            return Err(Error::Verification(format!(
                "{method} with parameter {param}: reported Δ {delta}, rebuild gives {reference}"
            )));
        }
    }
    let top3_share = if edges.is_empty() {
        None
    } else {
        Some(concentration_report(&edges)?)
    };
    let (k, b) = if method.per_node() {
        (settings.cg.max_edges.filter(|_| method == Method::Ilm), Some(param))
    } else {
        (Some(param), None)
    };
    Ok(ExperimentReport {
        method,
        k,
        b,
        seed,
        di_percent: di_metric(sigma, sigma - delta)?,
        edges,
        per_step,
        delta,
        top3_share,
        wall_ms,
    })
}

/// Writes the reports as CSV with the schema tag on the first line.
pub fn write_reports(path: impl AsRef<Path>, reports: &[ExperimentReport]) -> Result<()> {
    let path = path.as_ref();
    let mut out = textio::create(path)?;
    writeln!(out, "{CSV_SCHEMA}").map_err(|e| Error::io(path, e))?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["method", "k", "b", "seed", "delta", "di_percent", "top3_share", "wall_ms"])?;
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        csv.write_record([
            r.method.to_string(),
            opt(r.k),
            opt(r.b),
            r.seed.to_string(),
            format!("{:.9}", r.delta),
            format!("{:.6}", r.di_percent),
            r.top3_share.map(|s| format!("{s:.3}")).unwrap_or_default(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    csv.flush().map_err(|e| Error::io(path, e))
}

/// A flat `key = value` experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub graph: PathBuf,
    pub actions: PathBuf,
    /// Inline list or file of target ids; sampled when absent.
    pub targets: Option<String>,
    pub target_size: usize,
    pub sampler: TargetSampler,
    pub candidates: Option<PathBuf>,
    pub scheme: CreditScheme,
    pub methods: Vec<Method>,
    pub k: Vec<usize>,
    pub b: Vec<usize>,
    pub seed: u64,
    pub settings: MethodSettings,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                message: format!("line {} is not key = value", n + 1),
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut take = |key: &str| map.remove(key);
        let path_of = |key: &str, value: Option<String>| -> Result<PathBuf> {
            let value = value.ok_or_else(|| Error::Config {
                key: key.to_string(),
                message: "missing".into(),
            })?;
            Ok(base.join(value))
        };
        fn parsed<T: FromStr>(key: &str, value: Option<String>, default: T) -> Result<T> {
            match value {
                None => Ok(default),
                Some(v) => v.parse().map_err(|_| Error::Config {
                    key: key.to_string(),
                    message: format!("cannot parse `{v}`"),
                }),
            }
        }
        fn list<T: FromStr>(key: &str, value: Option<String>, default: Vec<T>) -> Result<Vec<T>> {
            match value {
                None => Ok(default),
                Some(v) => v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse().map_err(|_| Error::Config {
                            key: key.to_string(),
                            message: format!("cannot parse `{s}`"),
                        })
                    })
                    .collect(),
            }
        }
        let graph = path_of("graph", take("graph"))?;
        let actions = path_of("actions", take("actions"))?;
        let targets = take("targets");
        let target_size = parsed("target_size", take("target_size"), 30)?;
        let pool = parsed("target_pool", take("target_pool"), 150)?;
        let sampler = match take("target_sampler").as_deref() {
            None | Some("top") => TargetSampler::TopActive { pool },
            Some("uniform") => TargetSampler::Uniform,
            Some(other) => {
                return Err(Error::Config {
                    key: "target_sampler".into(),
                    message: format!("unknown sampler `{other}`"),
                })
            }
        };
        let candidates = take("candidates").map(|c| base.join(c));
        let scheme = match take("scheme").as_deref() {
            None | Some("uniform") => CreditScheme::Uniform,
            Some("learned") => CreditScheme::NormalizedLearned,
            Some(other) => {
                return Err(Error::Config {
                    key: "scheme".into(),
                    message: format!("unknown scheme `{other}`"),
                })
            }
        };
        let methods = list(
            "methods",
            take("methods"),
            vec![Method::Greedy, Method::HighDegree, Method::Random],
        )?;
        let k = list("k", take("k"), vec![10, 20, 30])?;
        let b = list("b", take("b"), vec![1, 2])?;
        let seed = parsed("seed", take("seed"), 0)?;
        let defaults = MethodSettings::default();
        let settings = MethodSettings {
            lazy: parsed("lazy", take("lazy"), defaults.lazy)?,
            prune: parsed("prune", take("prune"), defaults.prune)?,
            cg: CgConfig {
                tau: parsed("tau", take("tau"), defaults.cg.tau)?,
                samples: parsed("samples", take("samples"), defaults.cg.samples)?,
                seed,
                max_edges: match take("ilm_edges") {
                    None => None,
                    v => Some(parsed("ilm_edges", v, 0usize)?),
                },
            },
            rounding: parsed("rounding", take("rounding"), defaults.rounding)?,
            trials: parsed("trials", take("trials"), defaults.trials)?,
            verify: parsed("verify", take("verify"), defaults.verify)?,
        };
        let output = take("output").map(|o| base.join(o));
        if let Some(key) = map.keys().next() {
            return Err(Error::Config {
                key: key.clone(),
                message: "unknown key".into(),
            });
        }
        Ok(ExperimentConfig {
            graph,
            actions,
            targets,
            target_size,
            sampler,
            candidates,
            scheme,
            methods,
            k,
            b,
            seed,
            settings,
            output,
        })
    }

    /// Every (method, parameter) pair of the grid, in method then parameter order.
    pub fn cells(&self) -> Vec<(Method, usize)> {
        self.methods
            .iter()
            .flat_map(|&m| {
                let grid = if m.per_node() { &self.b } else { &self.k };
                grid.iter().map(move |&p| (m, p))
            })
            .collect()
    }
}

/// Loads the inputs named by `config`, runs every grid cell and writes the
/// CSV when an output path is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    let (graph, stats) = SocialGraph::load(&config.graph).map_err(|e| Error::Config {
        key: "graph".into(),
        message: e.to_string(),
    })?;
    if stats.self_loops + stats.duplicates > 0 {
        log::info!("graph: dropped {} self-loops, {} duplicates", stats.self_loops, stats.duplicates);
    }
    let log = ActionLog::load(&config.actions, &graph).map_err(|e| Error::Config {
        key: "actions".into(),
        message: e.to_string(),
    })?;
    let instance = Instance::new(graph, log, &config.scheme)?;
    let targets = match &config.targets {
        Some(input) => TargetSet::parse(input, &instance.graph)?,
        None => sample_targets(&instance.log, config.target_size, config.sampler, config.seed)?,
    };
    let candidates = match &config.candidates {
        Some(path) => load_candidates(path, &instance.graph)?,
        None => instance.default_candidates(),
    };
    let reports = config
        .cells()
        .into_par_iter()
        .map(|(method, param)| {
            run_cell(&instance, &targets, &candidates, method, param, config.seed, &config.settings)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(out) = &config.output {
        write_reports(out, &reports)?;
    }
    Ok(reports)
}
