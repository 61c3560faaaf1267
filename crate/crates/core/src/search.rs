//! Posterior-mode search: thresholded ridge candidates, greedy decomposable
//! repair, and shotgun local search; plus the two Bayes estimators at a
//! fixed graph.

use std::collections::HashSet;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Edge, MoveKind, UndirectedGraph};
use crate::mcmc::{self, Kernel};
use crate::model::{self, Dataset, GraphScore, Hyperparameters};
use crate::numerics::SymmetricMatrix;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub ridge_grid: Vec<f64>,
    pub threshold_grid: Vec<f64>,
    pub max_candidates: usize,
}

impl Default for CandidateConfig {
    /// 50 ridge values on [0.01, 1.5] times 100 thresholds on [0, 0.5].
    fn default() -> Self {
        CandidateConfig::from_grid_sizes(50, 100)
    }
}

impl CandidateConfig {
    pub fn from_grid_sizes(ridges: usize, thresholds: usize) -> Self {
        CandidateConfig {
            ridge_grid: linspace(0.01, 1.5, ridges),
            threshold_grid: linspace(0.0, 0.5, thresholds),
            max_candidates: ridges * thresholds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ridge_grid.is_empty() || self.threshold_grid.is_empty() {
            return Err(Error::InvalidInput("candidate grids must be non-empty".into()));
        }
        if self.ridge_grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidInput("ridge values must be positive".into()));
        }
        if self.threshold_grid.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidInput("thresholds must be non-negative".into()));
        }
        if self.max_candidates == 0 {
            return Err(Error::InvalidInput("max_candidates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSearchResult {
    pub mode_graph: UndirectedGraph,
    pub mode_score: GraphScore,
    pub visited_count: usize,
    pub score_trace: Vec<f64>,
}

/// `(XᵀX/n + λI)⁻¹`.
pub fn ridge_precision(data: &Dataset, ridge: f64) -> Result<SymmetricMatrix> {
    let n = data.n().max(1) as f64;
    let mut s = data.gram().scaled(1.0 / n);
    for i in 0..data.p() {
        s.add_to(i, i, ridge);
    }
    s.inverse()
}

fn weighted_edges(prec: &SymmetricMatrix, threshold: f64) -> Vec<(Edge, f64)> {
    let p = prec.dim();
    let mut out = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let w = prec.get(i, j).abs();
            if w > threshold {
                out.push(((i, j), w));
            }
        }
    }
    out
}

/// Greedy insertion by descending weight (ties broken lexicographically),
/// skipping any edge whose addition would break decomposability. Skipped
/// edges are retried in further passes until none can be added, since a
/// later chord can make them admissible. A decomposable input is returned
/// unchanged.
pub fn repair_decomposable(edges: &[(Edge, f64)], p: usize) -> Result<UndirectedGraph> {
    let mut sorted: Vec<(Edge, f64)> = edges
        .iter()
        .map(|&((i, j), w)| (graph::canonical(i, j), w))
        .collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let full = UndirectedGraph::from_edges(p, sorted.iter().map(|&(e, _)| e))?;
    if graph::is_decomposable(&full) {
        return Ok(full);
    }
    let mut g = UndirectedGraph::empty(p);
    let mut pending: Vec<Edge> = sorted.into_iter().map(|(e, _)| e).collect();
    pending.dedup();
    loop {
        let before = pending.len();
        let mut skipped = Vec::new();
        for (i, j) in pending {
            if g.has_edge(i, j) {
                continue;
            }
            if graph::move_is_decomposable_fast(&g, (i, j), MoveKind::Add)? {
                g.add_edge(i, j)?;
            } else {
                skipped.push((i, j));
            }
        }
        if skipped.is_empty() || skipped.len() == before {
            break;
        }
        pending = skipped;
    }
    Ok(g)
}

/// Thresholded ridge precision at one `(λ, τ)`, repaired.
pub fn threshold_graph(data: &Dataset, ridge: f64, threshold: f64) -> Result<UndirectedGraph> {
    let prec = ridge_precision(data, ridge)?;
    repair_decomposable(&weighted_edges(&prec, threshold), data.p())
}

/// Distinct repaired graphs over the ridge × threshold grid, in grid order.
pub fn candidate_graphs(data: &Dataset, config: &CandidateConfig) -> Result<Vec<UndirectedGraph>> {
    config.validate()?;
    let p = data.p();
    let per_ridge: Vec<Vec<UndirectedGraph>> = config
        .ridge_grid
        .par_iter()
        .map(|&ridge| {
            let prec = ridge_precision(data, ridge)?;
            config
                .threshold_grid
                .iter()
                .map(|&t| repair_decomposable(&weighted_edges(&prec, t), p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for g in per_ridge.into_iter().flatten() {
        if out.len() >= config.max_candidates {
            break;
        }
        if seen.insert(g.clone()) {
            out.push(g);
        }
    }
    Ok(out)
}

/// Score, or `None` when a clique exceeds `n` and the graph cannot be scored.
fn try_score(data: &Dataset, g: &UndirectedGraph, hyper: &Hyperparameters) -> Result<Option<GraphScore>> {
    match model::score_graph(data, g, hyper) {
        Ok(s) => Ok(Some(s)),
        Err(Error::CliqueTooLarge { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn argmax_first(scores: &[Option<GraphScore>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, s) in scores.iter().enumerate() {
        if let Some(s) = s {
            if !s.is_supported() {
                continue;
            }
            match best {
                Some(b) if scores[b].unwrap().log_posterior_unnorm >= s.log_posterior_unnorm => {}
                _ => best = Some(k),
            }
        }
    }
    best
}

/// Greedy best-neighbor ascent with random restarts from perturbations of
/// the best graph found. Each iteration scores every decomposable
/// neighbor of the current graph. Returns the best graph ever scored.
pub fn shotgun_search<R: RngCore + ?Sized>(
    init: &UndirectedGraph,
    data: &Dataset,
    hyper: &Hyperparameters,
    max_iters: usize,
    rng: &mut R,
) -> Result<ModeSearchResult> {
    if !graph::is_decomposable(init) {
        return Err(Error::NotDecomposable);
    }
    let init_score = model::score_graph(data, init, hyper)?;
    let mut current = init.clone();
    let mut current_score = init_score;
    let mut best = init.clone();
    let mut best_score = init_score;
    let mut visited = 1;
    let mut trace = Vec::with_capacity(max_iters);
    for _ in 0..max_iters {
        let moves = if current.p() >= 2 { graph::decomposable_neighbors(&current)? } else { Vec::new() };
        let neighbors: Vec<UndirectedGraph> = moves.iter().map(|m| m.apply(&current)).collect::<Result<_>>()?;
        let scores: Vec<Option<GraphScore>> = neighbors
            .par_iter()
            .map(|g| try_score(data, g, hyper))
            .collect::<Result<_>>()?;
        visited += neighbors.len();
        let pick = argmax_first(&scores);
        match pick {
            Some(k) if scores[k].unwrap().log_posterior_unnorm > current_score.log_posterior_unnorm => {
                current = neighbors[k].clone();
                current_score = scores[k].unwrap();
            }
            _ => {
                if best.p() < 2 {
                    trace.push(best_score.log_posterior_unnorm);
                    break;
                }
                // Local optimum: restart from a short random walk away from the best graph.
                let mut g = best.clone();
                let steps = 2 + (rng.next_u32() % 3) as usize;
                for _ in 0..steps {
                    g = mcmc::propose(&g, Kernel::Exact, rng)?.0;
                }
                match try_score(data, &g, hyper)? {
                    Some(s) if s.is_supported() => {
                        current = g;
                        current_score = s;
                    }
                    _ => {
                        current = best.clone();
                        current_score = best_score;
                    }
                }
                visited += 1;
            }
        }
        if current_score.log_posterior_unnorm > best_score.log_posterior_unnorm {
            best = current.clone();
            best_score = current_score;
        }
        trace.push(best_score.log_posterior_unnorm);
    }
    Ok(ModeSearchResult {
        mode_graph: best,
        mode_score: best_score,
        visited_count: visited,
        score_trace: trace,
    })
}

/// Scores explicit candidates, keeps the best, and refines it by shotgun search.
pub fn mode_from_candidates<R: RngCore + ?Sized>(
    data: &Dataset,
    hyper: &Hyperparameters,
    candidates: &[UndirectedGraph],
    search_budget: usize,
    rng: &mut R,
) -> Result<ModeSearchResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty candidate set".into()));
    }
    let scores: Vec<Option<GraphScore>> = candidates
        .par_iter()
        .map(|g| try_score(data, g, hyper))
        .collect::<Result<_>>()?;
    let k = argmax_first(&scores).ok_or_else(|| {
        Error::InvalidInput("no candidate lies in the prior support with cliques of at most n vertices".into())
    })?;
    let mut res = shotgun_search(&candidates[k], data, hyper, search_budget, rng)?;
    res.visited_count += candidates.len();
    Ok(res)
}

/// Candidate generation, candidate scoring, and shotgun refinement.
pub fn hybrid_mode<R: RngCore + ?Sized>(
    data: &Dataset,
    hyper: &Hyperparameters,
    config: &CandidateConfig,
    search_budget: usize,
    rng: &mut R,
) -> Result<ModeSearchResult> {
    let candidates = candidate_graphs(data, config)?;
    mode_from_candidates(data, hyper, &candidates, search_budget, rng)
}

/// Posterior mean of `Ω` given `Ĝ` (squared-error loss).
pub fn bayes_estimator_l2(data: &Dataset, g_hat: &UndirectedGraph, hyper: &Hyperparameters) -> Result<SymmetricMatrix> {
    model::posterior_mean_precision(data, g_hat, hyper)
}

/// `(E[Ω⁻¹ | Ĝ, X])⁻¹` (Stein's loss), the inner mean estimated from
/// `mc_draws` posterior draws.
pub fn bayes_estimator_l1_stein<R: RngCore + ?Sized>(
    data: &Dataset,
    g_hat: &UndirectedGraph,
    hyper: &Hyperparameters,
    mc_draws: usize,
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    if mc_draws == 0 {
        return Err(Error::InvalidInput("mc_draws must be positive".into()));
    }
    let mut sum = SymmetricMatrix::zeros(data.p());
    for _ in 0..mc_draws {
        let omega = model::sample_precision_given_graph(data, g_hat, hyper, rng)?;
        sum = sum.add(&omega.inverse()?)?;
    }
    sum.scaled(1.0 / mc_draws as f64).inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;
    use crate::simulate::{build_truth, generate_data, TrueModelSpec, TruthKind};
    use approx::assert_relative_eq;

    fn ar1(p: usize, n: usize, seed: u64) -> Dataset {
        let t = build_truth(TrueModelSpec::new(TruthKind::Ar1, p).unwrap()).unwrap();
        generate_data(&t, n, &mut RngState::new(seed, 0)).unwrap()
    }

    fn enumerated_map(data: &Dataset, hyper: &Hyperparameters) -> UndirectedGraph {
        let mut best: Option<(f64, UndirectedGraph)> = None;
        for g in graph::enumerate_decomposable(data.p()) {
            let s = model::score_graph(data, &g, hyper).unwrap().log_posterior_unnorm;
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, g));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn repair_examples() {
        let tree = vec![((0, 1), 0.9), ((1, 2), 0.5), ((1, 3), 0.7)];
        let g = repair_decomposable(&tree, 4).unwrap();
        assert_eq!(g, UndirectedGraph::from_edges(4, [(0, 1), (1, 2), (1, 3)]).unwrap());

        let cycle = vec![((2, 3), 1.0), ((0, 1), 1.0), ((1, 2), 1.0), ((0, 3), 1.0)];
        let g = repair_decomposable(&cycle, 4).unwrap();
        assert_eq!(g, UndirectedGraph::from_edges(4, [(0, 1), (0, 3), (1, 2)]).unwrap());

        assert_eq!(repair_decomposable(&[], 3).unwrap(), UndirectedGraph::empty(3));
    }

    #[test]
    fn repair_is_idempotent_on_decomposable_graphs() {
        for g in graph::enumerate_decomposable(5) {
            let edges: Vec<(Edge, f64)> = g.edges().into_iter().map(|e| (e, 1.0)).collect();
            assert_eq!(repair_decomposable(&edges, 5).unwrap(), g);
        }
    }

    #[test]
    fn candidate_extremes_and_truth() {
        let data = ar1(10, 200, 1);
        let cfg = CandidateConfig {
            ridge_grid: vec![0.05],
            threshold_grid: vec![0.0, 1e6],
            max_candidates: 10,
        };
        let c = candidate_graphs(&data, &cfg).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.contains(&UndirectedGraph::empty(10)));
        assert!(c.iter().all(graph::is_decomposable));

        let all = candidate_graphs(&data, &CandidateConfig::default()).unwrap();
        assert!(all.len() <= 5000);
        assert!(all.contains(&UndirectedGraph::path(10)));
        assert_eq!(all, candidate_graphs(&data, &CandidateConfig::default()).unwrap());
    }

    #[test]
    fn invalid_candidate_config() {
        let data = ar1(4, 20, 1);
        let mut cfg = CandidateConfig::default();
        cfg.ridge_grid.clear();
        assert!(candidate_graphs(&data, &cfg).is_err());
        let cfg = CandidateConfig { ridge_grid: vec![0.0], ..CandidateConfig::default() };
        assert!(candidate_graphs(&data, &cfg).is_err());
    }

    #[test]
    fn shotgun_finds_enumerated_map() {
        let hyper = Hyperparameters::with_g(0.05);
        for seed in 0..3 {
            let data = ar1(4, 200, seed);
            let map = enumerated_map(&data, &hyper);
            let mut rng = RngState::new(seed, 1);
            let res = shotgun_search(&UndirectedGraph::empty(4), &data, &hyper, 40, &mut rng).unwrap();
            assert_eq!(res.mode_graph, map);
            assert!(res.score_trace.windows(2).all(|w| w[0] <= w[1]));
            let again = shotgun_search(&map, &data, &hyper, 10, &mut rng).unwrap();
            assert_eq!(again.mode_graph, map);
        }
    }

    #[test]
    fn exhaustive_candidates_give_exact_map() {
        let hyper = Hyperparameters::with_g(0.05);
        let data = ar1(4, 100, 7);
        let all = graph::enumerate_decomposable(4);
        let mut rng = RngState::new(0, 0);
        let res = mode_from_candidates(&data, &hyper, &all, 0, &mut rng).unwrap();
        assert_eq!(res.mode_graph, enumerated_map(&data, &hyper));
    }

    #[test]
    fn hybrid_recovers_truth_and_is_deterministic() {
        let data = ar1(10, 400, 3);
        let hyper = Hyperparameters::from_preset(model::ScalePreset::PaperSim1, 10);
        let cfg = CandidateConfig::from_grid_sizes(10, 20);
        let a = hybrid_mode(&data, &hyper, &cfg, 20, &mut RngState::new(5, 0)).unwrap();
        let b = hybrid_mode(&data, &hyper, &cfg, 20, &mut RngState::new(5, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mode_graph, UndirectedGraph::path(10));
        let fresh = model::score_graph(&data, &a.mode_graph, &hyper).unwrap();
        assert_relative_eq!(fresh.log_posterior_unnorm, a.mode_score.log_posterior_unnorm, max_relative = 1e-12);
    }

    #[test]
    fn single_candidate_never_gets_worse() {
        let data = ar1(6, 50, 2);
        let hyper = Hyperparameters::with_g(0.05);
        let g = UndirectedGraph::from_edges(6, [(0, 3), (2, 5)]).unwrap();
        let s0 = model::score_graph(&data, &g, &hyper).unwrap().log_posterior_unnorm;
        let res = mode_from_candidates(&data, &hyper, &[g], 15, &mut RngState::new(1, 0)).unwrap();
        assert!(res.mode_score.log_posterior_unnorm >= s0);
    }

    #[test]
    fn l2_estimator_is_posterior_mean() {
        let data = ar1(5, 40, 3);
        let hyper = Hyperparameters::with_g(0.1);
        let g = UndirectedGraph::path(5);
        let a = bayes_estimator_l2(&data, &g, &hyper).unwrap();
        assert_eq!(a, model::posterior_mean_precision(&data, &g, &hyper).unwrap());
        for i in 0..5 {
            for j in 0..i {
                if !g.has_edge(i, j) {
                    assert_eq!(a.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn stein_estimator_converges_on_complete_graph() {
        let data = ar1(2, 30, 4);
        let hyper = Hyperparameters::with_g(0.2);
        let g = UndirectedGraph::complete(2);
        let mut rng = RngState::new(8, 0);
        let est = bayes_estimator_l1_stein(&data, &g, &hyper, 100_000, &mut rng).unwrap();
        // Σ ~ IW_std(n+ν+1, D) has mean D/(n+ν+1-2-1), so the estimator tends to (n+ν-2)D⁻¹.
        let d = data.gram().scaled(1.0 + hyper.g);
        let want = d.inverse().unwrap().scaled(data.n() as f64 + hyper.nu - 2.0);
        for i in 0..2 {
            for j in 0..=i {
                assert_relative_eq!(est.get(i, j), want.get(i, j), max_relative = 0.02);
            }
        }
        let l2 = bayes_estimator_l2(&data, &g, &hyper).unwrap();
        assert!((l2.get(0, 0) - est.get(0, 0)).abs() > 1e-3);
        assert!(est.cholesky().is_ok());
    }

    #[test]
    fn stein_differs_from_l2_on_three_vertices() {
        let data = ar1(3, 25, 5);
        let hyper = Hyperparameters::with_g(0.1);
        let g = UndirectedGraph::complete(3);
        let mut rng = RngState::new(9, 0);
        let s = bayes_estimator_l1_stein(&data, &g, &hyper, 2000, &mut rng).unwrap();
        let m = bayes_estimator_l2(&data, &g, &hyper).unwrap();
        assert!(s.sub(&m).unwrap().max_abs() > 1e-2 * m.max_abs());
        assert!(bayes_estimator_l1_stein(&data, &g, &hyper, 0, &mut rng).is_err());
    }
}
