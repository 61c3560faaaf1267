//! Metropolis-Hastings over decomposable graphs.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{self, max_edges, EdgeMove, MoveKind, UndirectedGraph};
use crate::model::{self, Dataset, GraphScore, Hyperparameters};
use crate::numerics::{RngState, SymmetricMatrix};
use crate::search;

/// Proposal kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Add or delete with probability 1/2 each, a uniform edge, resampled
    /// until decomposable; the proposal ratio ignores the resampling.
    #[default]
    Paper,
    /// Uniform over decomposable single-edge neighbors with the exact ratio.
    Exact,
}

impl std::str::FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Kernel::Paper),
            "exact" => Ok(Kernel::Exact),
            other => Err(Error::InvalidInput(format!("unknown kernel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitGraph {
    Empty,
    /// Thresholded ridge precision, repaired to be decomposable.
    Threshold { ridge: f64, threshold: f64 },
    Graph(UndirectedGraph),
}

impl InitGraph {
    pub const DEFAULT_RIDGE: f64 = 0.1;
    pub const DEFAULT_THRESHOLD: f64 = 0.2;

    pub fn threshold_default() -> Self {
        InitGraph::Threshold {
            ridge: Self::DEFAULT_RIDGE,
            threshold: Self::DEFAULT_THRESHOLD,
        }
    }

    pub fn resolve(&self, data: &Dataset) -> Result<UndirectedGraph> {
        match self {
            InitGraph::Empty => Ok(UndirectedGraph::empty(data.p())),
            InitGraph::Threshold { ridge, threshold } => search::threshold_graph(data, *ridge, *threshold),
            InitGraph::Graph(g) => {
                if g.p() != data.p() {
                    return Err(Error::DimensionMismatch { expected: data.p(), found: g.p() });
                }
                if !graph::is_decomposable(g) {
                    return Err(Error::NotDecomposable);
                }
                Ok(g.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub init: InitGraph,
    pub kernel: Kernel,
    pub sample_precision: bool,
    /// Keep every `thin`-th post-burn-in precision draw.
    pub thin: usize,
    /// Count visits per graph after burn-in.
    pub record_visits: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 3000,
            burn_in: 3000,
            seed: 0,
            init: InitGraph::Empty,
            kernel: Kernel::Paper,
            sample_precision: false,
            thin: 1,
            record_visits: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidInput("thin must be positive".into()));
        }
        Ok(())
    }
}

/// Per-iteration trace, stored column-wise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub log_posterior: Vec<f64>,
    pub edge_count: Vec<usize>,
    pub accepted: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub p: usize,
    /// Post-burn-in edge inclusion frequencies; zero diagonal.
    pub inclusion: SymmetricMatrix,
    pub trace: Trace,
    pub best_graph: UndirectedGraph,
    pub best_score: GraphScore,
    pub precision_mean: Option<SymmetricMatrix>,
    pub precision_draws: usize,
    pub kept: usize,
    /// Visit counts after burn-in, sorted by graph, when requested.
    pub visits: Option<Vec<(UndirectedGraph, u64)>>,
}

impl ChainResult {
    pub fn acceptance_rate(&self) -> f64 {
        if self.trace.accepted.is_empty() {
            return 0.0;
        }
        self.trace.accepted.iter().filter(|&&a| a).count() as f64 / self.trace.accepted.len() as f64
    }

    /// JSON with the inclusion matrix as a dense row-major array and the
    /// trace as columns.
    pub fn to_json(&self) -> serde_json::Value {
        let dense = |m: &SymmetricMatrix| -> Vec<Vec<f64>> {
            (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect()
        };
        json!({
            "p": self.p,
            "kept": self.kept,
            "acceptance_rate": self.acceptance_rate(),
            "inclusion": dense(&self.inclusion),
            "trace": {
                "log_posterior": self.trace.log_posterior,
                "edge_count": self.trace.edge_count,
                "accepted": self.trace.accepted,
            },
            "best_graph": self.best_graph,
            "best_score": self.best_score,
            "precision_draws": self.precision_draws,
            "precision_mean": self.precision_mean.as_ref().map(dense),
        })
    }
}

/// Current graph with its cached score.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub graph: UndirectedGraph,
    pub score: GraphScore,
    neighbors: Option<Vec<EdgeMove>>,
}

impl ChainState {
    pub fn new(graph: UndirectedGraph, data: &Dataset, hyper: &Hyperparameters) -> Result<Self> {
        if !graph::is_decomposable(&graph) {
            return Err(Error::NotDecomposable);
        }
        let score = model::score_graph(data, &graph, hyper)?;
        if !score.is_supported() {
            return Err(Error::InvalidInput(format!(
                "initial graph has {} edges, above R = {}",
                graph.edge_count(),
                hyper.effective_max_edges(data.p())
            )));
        }
        Ok(ChainState { graph, score, neighbors: None })
    }
}

fn uniform_edge_proposal<R: RngCore + ?Sized>(g: &UndirectedGraph, rng: &mut R) -> Result<(UndirectedGraph, f64)> {
    let p = g.p();
    let m = max_edges(p);
    let k = g.edge_count();
    if m == 0 {
        return Err(Error::NoValidMove);
    }
    loop {
        let delete = rng.random_bool(0.5);
        if (delete && k == 0) || (!delete && k == m) {
            continue;
        }
        let (i, j) = loop {
            let i = rng.random_range(0..p);
            let j = rng.random_range(0..p);
            if i != j && g.has_edge(i, j) == delete {
                break graph::canonical(i, j);
            }
        };
        let kind = if delete { MoveKind::Delete } else { MoveKind::Add };
        if !graph::move_is_decomposable_fast(g, (i, j), kind)? {
            continue;
        }
        let mv = EdgeMove { edge: (i, j), kind };
        let ratio = if delete {
            (k as f64 / (m - k + 1) as f64).ln()
        } else {
            ((m - k) as f64 / (k + 1) as f64).ln()
        };
        return Ok((mv.apply(g)?, ratio));
    }
}

/// Proposes a decomposable neighbor of `g` and the log proposal ratio
/// `log q(G | G_new) - log q(G_new | G)`.
pub fn propose<R: RngCore + ?Sized>(
    g: &UndirectedGraph,
    kernel: Kernel,
    rng: &mut R,
) -> Result<(UndirectedGraph, f64)> {
    match kernel {
        Kernel::Paper => uniform_edge_proposal(g, rng),
        Kernel::Exact => {
            let moves = graph::decomposable_neighbors(g)?;
            exact_proposal(g, &moves, rng).map(|(g_new, ratio, _)| (g_new, ratio))
        }
    }
}

fn exact_proposal<R: RngCore + ?Sized>(
    g: &UndirectedGraph,
    moves: &[EdgeMove],
    rng: &mut R,
) -> Result<(UndirectedGraph, f64, Vec<EdgeMove>)> {
    let mv = moves.choose(rng).ok_or(Error::NoValidMove)?;
    let g_new = mv.apply(g)?;
    let new_moves = graph::decomposable_neighbors(&g_new)?;
    let ratio = (moves.len() as f64 / new_moves.len() as f64).ln();
    Ok((g_new, ratio, new_moves))
}

/// One Metropolis-Hastings update. Scores exactly one graph.
/// Returns whether the proposal was accepted.
pub fn mh_step<R: RngCore + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &Hyperparameters,
    kernel: Kernel,
    rng: &mut R,
) -> Result<bool> {
    let (g_new, log_q, new_moves) = match kernel {
        Kernel::Paper => {
            let (g, q) = uniform_edge_proposal(&state.graph, rng)?;
            (g, q, None)
        }
        Kernel::Exact => {
            if state.neighbors.is_none() {
                state.neighbors = Some(graph::decomposable_neighbors(&state.graph)?);
            }
            let moves = state.neighbors.as_deref().unwrap_or_default();
            let (g, q, nm) = exact_proposal(&state.graph, moves, rng)?;
            (g, q, Some(nm))
        }
    };
    let new_score = model::score_graph(data, &g_new, hyper)?;
    if !new_score.is_supported() {
        return Ok(false);
    }
    let log_alpha = new_score.log_posterior_unnorm - state.score.log_posterior_unnorm + log_q;
    let u: f64 = rng.random();
    let accept = log_alpha >= 0.0 || u.ln() < log_alpha;
    if accept {
        state.graph = g_new;
        state.score = new_score;
        state.neighbors = new_moves;
    }
    Ok(accept)
}

/// Runs one chain on stream 0 of `config.seed`.
pub fn run_chain(config: &ChainConfig, data: &Dataset, hyper: &Hyperparameters) -> Result<ChainResult> {
    run_chain_on_stream(config, data, hyper, 0)
}

pub fn run_chain_on_stream(
    config: &ChainConfig,
    data: &Dataset,
    hyper: &Hyperparameters,
    stream: u64,
) -> Result<ChainResult> {
    config.validate()?;
    hyper.validate(data.p())?;
    let p = data.p();
    let mut rng = RngState::new(config.seed, stream);
    let mut state = ChainState::new(config.init.resolve(data)?, data, hyper)?;
    let mut best_graph = state.graph.clone();
    let mut best_score = state.score;
    let total = config.burn_in + config.iterations;
    let mut trace = Trace {
        log_posterior: Vec::with_capacity(total),
        edge_count: Vec::with_capacity(total),
        accepted: Vec::with_capacity(total),
    };
    let mut counts = vec![0u64; p * p];
    let mut visits: HashMap<UndirectedGraph, u64> = HashMap::new();
    let mut omega_sum: Option<SymmetricMatrix> = config.sample_precision.then(|| SymmetricMatrix::zeros(p));
    let mut omega_draws = 0usize;
    // Precision draws use their own stream so that toggling them leaves the graph chain unchanged.
    let mut omega_rng = rng.fork(stream.wrapping_add(1 << 32));

    for s in 0..total {
        let accepted = if p >= 2 {
            mh_step(&mut state, data, hyper, config.kernel, &mut rng)?
        } else {
            false
        };
        trace.log_posterior.push(state.score.log_posterior_unnorm);
        trace.edge_count.push(state.graph.edge_count());
        trace.accepted.push(accepted);
        if state.score.log_posterior_unnorm > best_score.log_posterior_unnorm {
            best_score = state.score;
            best_graph = state.graph.clone();
        }
        if s < config.burn_in {
            continue;
        }
        for (i, j) in state.graph.edges() {
            counts[i * p + j] += 1;
        }
        if config.record_visits {
            *visits.entry(state.graph.clone()).or_insert(0) += 1;
        }
        if let Some(sum) = omega_sum.as_mut() {
            if (s - config.burn_in).is_multiple_of(config.thin) {
                let omega = model::sample_precision_given_graph(data, &state.graph, hyper, &mut omega_rng)?;
                *sum = sum.add(&omega)?;
                omega_draws += 1;
            }
        }
    }
    let kept = config.iterations;
    let inclusion = SymmetricMatrix::from_fn(p, |i, j| {
        if i == j || kept == 0 {
            0.0
        } else {
            counts[j * p + i] as f64 / kept as f64
        }
    });
    let precision_mean = omega_sum.and_then(|sum| (omega_draws > 0).then(|| sum.scaled(1.0 / omega_draws as f64)));
    let visits = config.record_visits.then(|| {
        let mut v: Vec<_> = visits.into_iter().collect();
        v.sort();
        v
    });
    Ok(ChainResult {
        p,
        inclusion,
        trace,
        best_graph,
        best_score,
        precision_mean,
        precision_draws: omega_draws,
        kept,
        visits,
    })
}

/// Runs `chains` independent chains in parallel; chain `c` uses stream `c`.
pub fn run_chains(
    config: &ChainConfig,
    data: &Dataset,
    hyper: &Hyperparameters,
    chains: usize,
) -> Result<Vec<ChainResult>> {
    use rayon::prelude::*;
    (0..chains as u64)
        .into_par_iter()
        .map(|c| run_chain_on_stream(config, data, hyper, c))
        .collect()
}

/// Average of per-chain inclusion matrices weighted by kept draws.
pub fn merged_inclusion(results: &[ChainResult]) -> Result<SymmetricMatrix> {
    let first = results.first().ok_or_else(|| Error::InvalidInput("no chains to merge".into()))?;
    let p = first.p;
    let total: usize = results.iter().map(|r| r.kept).sum();
    let mut out = SymmetricMatrix::zeros(p);
    if total == 0 {
        return Ok(out);
    }
    for r in results {
        if r.p != p {
            return Err(Error::DimensionMismatch { expected: p, found: r.p });
        }
        out = out.add(&r.inclusion.scaled(r.kept as f64 / total as f64))?;
    }
    Ok(out)
}

/// Edges with inclusion strictly above `threshold`, and whether the
/// resulting graph is decomposable.
pub fn median_probability_graph(inclusion: &SymmetricMatrix, threshold: f64) -> (UndirectedGraph, bool) {
    let p = inclusion.dim();
    let mut g = UndirectedGraph::empty(p);
    for i in 0..p {
        for j in 0..i {
            if inclusion.get(i, j) > threshold {
                g.add_edge(j, i).expect("indices in range");
            }
        }
    }
    let chordal = graph::is_decomposable(&g);
    (g, chordal)
}
