//! Ground-truth precision matrices, data generation, and the
//! posterior-ratio experiment over perturbed graphs.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, canonical, max_edges, Edge, MoveKind, UndirectedGraph};
use crate::model::{self, Dataset, Hyperparameters};
use crate::numerics::{sample_mvn, RngState, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthKind {
    /// `Σ₀,ij = 0.5^|i-j|`.
    Sim1Ar1Cov,
    Ar1,
    Ar2,
    Ar4,
    Star,
    Circle,
}

impl TruthKind {
    pub const ALL: [TruthKind; 6] = [
        TruthKind::Sim1Ar1Cov,
        TruthKind::Ar1,
        TruthKind::Ar2,
        TruthKind::Ar4,
        TruthKind::Star,
        TruthKind::Circle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TruthKind::Sim1Ar1Cov => "sim1-ar1-cov",
            TruthKind::Ar1 => "ar1",
            TruthKind::Ar2 => "ar2",
            TruthKind::Ar4 => "ar4",
            TruthKind::Star => "star",
            TruthKind::Circle => "circle",
        }
    }

    pub fn min_p(self) -> usize {
        match self {
            TruthKind::Ar4 => 5,
            _ => 2,
        }
    }
}

impl std::str::FromStr for TruthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TruthKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown truth kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueModelSpec {
    pub kind: TruthKind,
    pub p: usize,
}

impl TrueModelSpec {
    pub fn new(kind: TruthKind, p: usize) -> Result<Self> {
        if p < kind.min_p() {
            return Err(Error::InvalidInput(format!(
                "{} needs p >= {}, got {p}",
                kind.name(),
                kind.min_p()
            )));
        }
        Ok(TrueModelSpec { kind, p })
    }
}

/// `(Ω₀, Σ₀, G₀)` for a simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: TrueModelSpec,
    pub omega: SymmetricMatrix,
    pub sigma: SymmetricMatrix,
    pub graph: UndirectedGraph,
}

fn banded_precision(p: usize, bands: &[f64]) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(p, |i, j| match i - j {
        0 => 1.0,
        d if d <= bands.len() => bands[d - 1],
        _ => 0.0,
    })
}

fn support(omega: &SymmetricMatrix) -> UndirectedGraph {
    let p = omega.dim();
    let mut g = UndirectedGraph::empty(p);
    for i in 0..p {
        for j in 0..i {
            if omega.get(i, j) != 0.0 {
                g.add_edge(j, i).expect("indices in range");
            }
        }
    }
    g
}

pub fn build_truth(spec: TrueModelSpec) -> Result<Truth> {
    let spec = TrueModelSpec::new(spec.kind, spec.p)?;
    let p = spec.p;
    let (omega, sigma) = match spec.kind {
        TruthKind::Sim1Ar1Cov => {
            let rho: f64 = 0.5;
            let sigma = SymmetricMatrix::from_fn(p, |i, j| rho.powi((i - j) as i32));
            let s = 1.0 / (1.0 - rho * rho);
            let omega = SymmetricMatrix::from_fn(p, |i, j| match i - j {
                0 if i == 0 || i == p - 1 => s,
                0 => s * (1.0 + rho * rho),
                1 => -rho * s,
                _ => 0.0,
            });
            (omega, sigma)
        }
        kind => {
            let omega = match kind {
                TruthKind::Ar1 => banded_precision(p, &[0.5]),
                TruthKind::Ar2 => banded_precision(p, &[0.5, 0.25]),
                TruthKind::Ar4 => banded_precision(p, &[0.4, 0.2, 0.2, 0.1]),
                TruthKind::Star => SymmetricMatrix::from_fn(p, |i, j| match (i, j) {
                    _ if i == j => 1.0,
                    (_, 0) => 0.2,
                    _ => 0.0,
                }),
                TruthKind::Circle => {
                    let mut m = banded_precision(p, &[0.5]);
                    if p > 2 {
                        m.set(p - 1, 0, 0.4);
                    }
                    m
                }
                TruthKind::Sim1Ar1Cov => unreachable!(),
            };
            let sigma = omega.inverse()?;
            (omega, sigma)
        }
    };
    let graph = support(&omega);
    Ok(Truth { spec, omega, sigma, graph })
}

/// Draws `n` rows from `N_p(0, Σ₀)`.
pub fn generate_data<R: RngCore + ?Sized>(truth: &Truth, n: usize, rng: &mut R) -> Result<Dataset> {
    Dataset::new(sample_mvn(n, &truth.sigma, rng)?)?.with_truth(truth.clone())
}

/// `ρ_{ij|S}`, computed from the inverse of `Σ` restricted to `{i, j} ∪ S`.
pub fn partial_correlation(sigma: &SymmetricMatrix, i: usize, j: usize, s: &[usize]) -> Result<f64> {
    let p = sigma.dim();
    for &v in [i, j].iter().chain(s) {
        if v >= p {
            return Err(Error::IndexOutOfRange { index: v, dim: p });
        }
    }
    if i == j {
        return Err(Error::InvalidInput("partial correlation needs i != j".into()));
    }
    if s.contains(&i) || s.contains(&j) {
        return Err(Error::InvalidInput("conditioning set must exclude i and j".into()));
    }
    if s.is_empty() {
        let r = sigma.get(i, j) / (sigma.get(i, i) * sigma.get(j, j)).sqrt();
        return Ok(r.clamp(-1.0, 1.0));
    }
    let mut idx = vec![i, j];
    idx.extend_from_slice(s);
    let sub = SymmetricMatrix::from_fn(idx.len(), |a, b| sigma.get(idx[a], idx[b]));
    let prec = sub.inverse()?;
    let r = -prec.get(1, 0) / (prec.get(0, 0) * prec.get(1, 1)).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionsReport {
    pub min_partial_corr_sq: f64,
    pub max_partial_corr: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub true_edge_count: usize,
    /// `log(n ∨ p) / n`, the scale the beta-min condition compares against.
    pub beta_min_scale: f64,
    pub sets_evaluated: usize,
}

fn subsets_up_to(items: &[usize], max_size: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, start: usize) {
    out.push(cur.clone());
    if cur.len() == max_size {
        return;
    }
    for k in start..items.len() {
        cur.push(items[k]);
        subsets_up_to(items, max_size, out, cur, k + 1);
        cur.pop();
    }
}

fn count_subsets(m: usize, max_size: usize) -> f64 {
    let mut total = 0.0;
    let mut c = 1.0;
    for k in 0..=max_size.min(m) {
        total += c;
        c = c * (m - k) as f64 / (k + 1) as f64;
    }
    total
}

/// Partial-correlation and eigenvalue summaries over true edges. Conditioning
/// sets of size at most `max_s` are enumerated when there are at most
/// `samples` of them per edge; otherwise `samples` random sets are drawn.
pub fn conditions_report<R: RngCore + ?Sized>(
    truth: &Truth,
    n: usize,
    max_s: usize,
    samples: usize,
    rng: &mut R,
) -> Result<ConditionsReport> {
    let p = truth.spec.p;
    let eig = SymmetricEigen::new(truth.omega.to_dense());
    let lambda_min = eig.eigenvalues.min();
    let lambda_max = eig.eigenvalues.max();
    let mut min_sq = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    let mut evaluated = 0;
    for (i, j) in truth.graph.edges() {
        let rest: Vec<usize> = (0..p).filter(|&v| v != i && v != j).collect();
        let sets: Vec<Vec<usize>> = if count_subsets(rest.len(), max_s) <= samples as f64 {
            let mut out = Vec::new();
            subsets_up_to(&rest, max_s, &mut out, &mut Vec::new(), 0);
            out
        } else {
            (0..samples)
                .map(|_| {
                    let size = rng.random_range(0..=max_s.min(rest.len()));
                    let mut s: Vec<usize> = rest.choose_multiple(rng, size).copied().collect();
                    s.sort_unstable();
                    s
                })
                .collect()
        };
        for s in sets {
            let r = partial_correlation(&truth.sigma, i, j, &s)?;
            min_sq = min_sq.min(r * r);
            max_abs = max_abs.max(r.abs());
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        min_sq = 0.0;
    }
    let m = n.max(p).max(2) as f64;
    Ok(ConditionsReport {
        min_partial_corr_sq: min_sq,
        max_partial_corr: max_abs,
        lambda_min,
        lambda_max,
        true_edge_count: truth.graph.edge_count(),
        beta_min_scale: if n > 0 { m.ln() / n as f64 } else { f64::INFINITY },
        sets_evaluated: evaluated,
    })
}

/// How the non-true graph is built from `G₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RatioCase {
    /// Decomposable supergraph with `2|G₀|` edges.
    Supergraph = 1,
    /// Subgraph with `⌊|G₀|/2⌋` edges.
    Subgraph = 2,
    /// `2|G₀|` edges, not a supergraph.
    LargeNonNested = 3,
    /// `⌊|G₀|/2⌋` edges, not a subgraph.
    SmallNonNested = 4,
}

impl RatioCase {
    pub const ALL: [RatioCase; 4] = [
        RatioCase::Supergraph,
        RatioCase::Subgraph,
        RatioCase::LargeNonNested,
        RatioCase::SmallNonNested,
    ];

    pub fn from_index(k: usize) -> Result<Self> {
        match k {
            1 => Ok(RatioCase::Supergraph),
            2 => Ok(RatioCase::Subgraph),
            3 => Ok(RatioCase::LargeNonNested),
            4 => Ok(RatioCase::SmallNonNested),
            _ => Err(Error::InvalidInput(format!("case must be 1..=4, got {k}"))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

fn random_pair<R: RngCore + ?Sized>(p: usize, rng: &mut R) -> Edge {
    loop {
        let i = rng.random_range(0..p);
        let j = rng.random_range(0..p);
        if i != j {
            return canonical(i, j);
        }
    }
}

/// Adds one uniformly chosen edge whose addition keeps `g` decomposable,
/// skipping edges in `forbid`. Returns false when none exists.
fn add_random_edge<R: RngCore + ?Sized>(
    g: &mut UndirectedGraph,
    forbid: &UndirectedGraph,
    rng: &mut R,
) -> Result<bool> {
    let p = g.p();
    for _ in 0..50 * max_edges(p).max(1) {
        let (i, j) = random_pair(p, rng);
        if g.has_edge(i, j) || forbid.has_edge(i, j) {
            continue;
        }
        if graph::move_is_decomposable_fast(g, (i, j), MoveKind::Add)? {
            g.add_edge(i, j)?;
            return Ok(true);
        }
    }
    let options: Vec<Edge> = graph::decomposable_neighbors(g)?
        .into_iter()
        .filter(|m| m.kind == MoveKind::Add && !forbid.has_edge(m.edge.0, m.edge.1))
        .map(|m| m.edge)
        .collect();
    match options.choose(rng) {
        Some(&(i, j)) => {
            g.add_edge(i, j)?;
            Ok(true)
        }
        None => Ok(false),
    }
}

/// Removes one uniformly chosen edge whose removal keeps `g` decomposable.
fn remove_random_edge<R: RngCore + ?Sized>(g: &mut UndirectedGraph, rng: &mut R) -> Result<bool> {
    let mut edges = g.edges();
    edges.shuffle(rng);
    for (i, j) in edges {
        if graph::move_is_decomposable_fast(g, (i, j), MoveKind::Delete)? {
            g.remove_edge(i, j)?;
            return Ok(true);
        }
    }
    Ok(false)
}

fn grow_to<R: RngCore + ?Sized>(g: &mut UndirectedGraph, target: usize, forbid: &UndirectedGraph, rng: &mut R) -> Result<()> {
    while g.edge_count() < target {
        if !add_random_edge(g, forbid, rng)? {
            break;
        }
    }
    Ok(())
}

fn shrink_to<R: RngCore + ?Sized>(g: &mut UndirectedGraph, target: usize, rng: &mut R) -> Result<()> {
    while g.edge_count() > target {
        if !remove_random_edge(g, rng)? {
            break;
        }
    }
    Ok(())
}

/// Builds the non-true decomposable graph for `case` from a decomposable `g0`.
///
/// Cases 1 and 2 walk away from `G₀` by random additions or deletions.
/// Case 3 deletes half of `G₀` and then adds random edges up to `2|G₀|`;
/// case 4 deletes down to `⌊|G₀|/4⌋` and adds random edges up to `⌊|G₀|/2⌋`.
/// Both retry until the result is not nested in the required direction.
pub fn perturb_graph<R: RngCore + ?Sized>(g0: &UndirectedGraph, case: RatioCase, rng: &mut R) -> Result<UndirectedGraph> {
    if !graph::is_decomposable(g0) {
        return Err(Error::NotDecomposable);
    }
    let k = g0.edge_count();
    let p = g0.p();
    let none = UndirectedGraph::empty(p);
    let big = (2 * k).min(max_edges(p));
    let small = k / 2;
    match case {
        RatioCase::Supergraph => {
            let mut g = g0.clone();
            grow_to(&mut g, big, &none, rng)?;
            Ok(g)
        }
        RatioCase::Subgraph => {
            let mut g = g0.clone();
            shrink_to(&mut g, small, rng)?;
            Ok(g)
        }
        RatioCase::LargeNonNested | RatioCase::SmallNonNested => {
            let (low, high) = if case == RatioCase::LargeNonNested {
                (k - k / 2, big)
            } else {
                (k / 4, small)
            };
            for _ in 0..100 {
                let mut g = g0.clone();
                shrink_to(&mut g, low, rng)?;
                let forbid = if case == RatioCase::LargeNonNested {
                    // Keep the deleted true edges out so the result cannot contain G₀.
                    let mut f = UndirectedGraph::empty(p);
                    for (i, j) in g0.edges() {
                        if !g.has_edge(i, j) {
                            f.add_edge(i, j)?;
                        }
                    }
                    f
                } else {
                    none.clone()
                };
                grow_to(&mut g, high, &forbid, rng)?;
                let nested = match case {
                    RatioCase::LargeNonNested => g0.is_subgraph_of(&g),
                    _ => g.is_subgraph_of(g0),
                };
                if !nested && g != *g0 {
                    return Ok(g);
                }
            }
            Err(Error::InvalidInput(format!(
                "could not build a non-nested graph for case {} at p = {p}",
                case.index()
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub case: usize,
    pub p: usize,
    pub n: usize,
    pub log_ratio: f64,
    pub seed: u64,
    pub true_edges: usize,
    pub graph_edges: usize,
}

/// For each `p`: sim1-ar1-cov truth, `n` rows of data, the case-`case`
/// perturbation of `G₀`, and `log π(G | X) - log π(G₀ | X)`.
///
/// Each `p` uses stream `p` of `seed`, so rows do not depend on the order
/// or parallelism of the grid.
pub fn posterior_ratio_experiment(
    p_list: &[usize],
    n: usize,
    case: RatioCase,
    hyper_for_p: &(dyn Fn(usize) -> Hyperparameters + Sync),
    seed: u64,
) -> Result<Vec<RatioRow>> {
    use rayon::prelude::*;
    p_list
        .par_iter()
        .map(|&p| {
            let hyper = hyper_for_p(p);
            hyper.validate(p)?;
            let truth = build_truth(TrueModelSpec::new(TruthKind::Sim1Ar1Cov, p)?)?;
            let mut rng = RngState::new(seed, p as u64);
            let data = generate_data(&truth, n, &mut rng)?;
            let g = perturb_graph(&truth.graph, case, &mut rng)?;
            let log_ratio = model::log_posterior_ratio(&data, &g, &truth.graph, &hyper)?;
            Ok(RatioRow {
                case: case.index(),
                p,
                n,
                log_ratio,
                seed,
                true_edges: truth.graph.edge_count(),
                graph_edges: g.edge_count(),
            })
        })
        .collect()
}

/// Dense copy of `Ω₀` for callers that want nalgebra operations.
pub fn dense_omega(truth: &Truth) -> DMatrix<f64> {
    truth.omega.to_dense()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn truth(kind: TruthKind, p: usize) -> Truth {
        build_truth(TrueModelSpec::new(kind, p).unwrap()).unwrap()
    }

    #[test]
    fn ar1_and_star_examples() {
        let t = truth(TruthKind::Ar1, 4);
        assert_eq!(t.graph, UndirectedGraph::path(4));
        assert_eq!(t.omega.get(1, 0), 0.5);
        assert_eq!(t.omega.get(2, 0), 0.0);
        assert_eq!(t.omega.get(3, 3), 1.0);

        let s = truth(TruthKind::Star, 4);
        for i in 1..4 {
            assert_eq!(s.omega.get(i, 0), 0.2);
            assert!(s.graph.has_edge(0, i));
        }
        assert_eq!(s.graph.edge_count(), 3);
    }

    #[test]
    fn sim1_example() {
        let t = truth(TruthKind::Sim1Ar1Cov, 3);
        let want = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.sigma.get(i, j), want[i][j]);
            }
        }
        assert_eq!(t.omega.get(2, 0), 0.0);
        assert_eq!(t.graph, UndirectedGraph::path(3));
    }

    #[test]
    fn truths_invert_and_report_decomposability() {
        for kind in TruthKind::ALL {
            for p in [5, 8, 12] {
                let t = truth(kind, p);
                let prod = t.omega.to_dense() * t.sigma.to_dense();
                let err = (prod - DMatrix::identity(p, p)).abs().max();
                assert!(err < 1e-10, "{kind:?} p={p}: {err}");
                let chordal = graph::is_decomposable(&t.graph);
                match kind {
                    TruthKind::Ar1 | TruthKind::Star | TruthKind::Sim1Ar1Cov => assert!(chordal),
                    TruthKind::Circle => assert!(!chordal),
                    TruthKind::Ar2 | TruthKind::Ar4 => assert!(chordal),
                }
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(TrueModelSpec::new(TruthKind::Ar4, 4).is_err());
        assert!(TrueModelSpec::new(TruthKind::Ar1, 1).is_err());
        assert_eq!("star".parse::<TruthKind>().unwrap(), TruthKind::Star);
    }

    #[test]
    fn partial_correlation_examples() {
        let t = truth(TruthKind::Sim1Ar1Cov, 3);
        assert_relative_eq!(partial_correlation(&t.sigma, 0, 1, &[]).unwrap(), 0.5);
        assert!(partial_correlation(&t.sigma, 0, 2, &[1]).unwrap().abs() < 1e-14);
        assert!(partial_correlation(&t.sigma, 1, 1, &[]).is_err());
        assert!(partial_correlation(&t.sigma, 0, 1, &[1]).is_err());
    }

    #[test]
    fn markov_property_exhaustive() {
        for p in 3..=6 {
            let t = truth(TruthKind::Sim1Ar1Cov, p);
            for i in 0..p {
                for j in (i + 1)..p {
                    let rest: Vec<usize> = (0..p).filter(|&v| v != i && v != j).collect();
                    let mut sets = Vec::new();
                    subsets_up_to(&rest, rest.len(), &mut sets, &mut Vec::new(), 0);
                    for s in sets {
                        let r = partial_correlation(&t.sigma, i, j, &s).unwrap();
                        let r2 = partial_correlation(&t.sigma, j, i, &s).unwrap();
                        assert_relative_eq!(r, r2, epsilon = 1e-14);
                        if s.iter().any(|&k| i < k && k < j) {
                            assert!(r.abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn conditions_examples() {
        let mut rng = RngState::new(1, 0);
        let t = truth(TruthKind::Ar1, 6);
        let rep = conditions_report(&t, 100, 4, 1000, &mut rng).unwrap();
        assert!(rep.min_partial_corr_sq > 0.0);
        assert!(rep.min_partial_corr_sq <= rep.max_partial_corr.powi(2) + 1e-15);
        assert!(rep.max_partial_corr <= 1.0);

        let t = truth(TruthKind::Ar1, 10);
        let rep = conditions_report(&t, 100, 3, 50, &mut rng).unwrap();
        assert!(rep.lambda_min > 0.0 && rep.lambda_max.is_finite());

        let t = truth(TruthKind::Star, 10);
        assert_eq!(conditions_report(&t, 100, 2, 20, &mut rng).unwrap().true_edge_count, 9);
    }

    #[test]
    fn perturbations_have_requested_shape() {
        let g0 = truth(TruthKind::Sim1Ar1Cov, 21).graph;
        let k = g0.edge_count();
        let mut rng = RngState::new(3, 0);
        for case in RatioCase::ALL {
            let g = perturb_graph(&g0, case, &mut rng).unwrap();
            assert!(graph::is_decomposable(&g));
            match case {
                RatioCase::Supergraph => {
                    assert_eq!(g.edge_count(), 2 * k);
                    assert!(g0.is_subgraph_of(&g));
                }
                RatioCase::Subgraph => {
                    assert_eq!(g.edge_count(), k / 2);
                    assert!(g.is_subgraph_of(&g0));
                }
                RatioCase::LargeNonNested => {
                    assert_eq!(g.edge_count(), 2 * k);
                    assert!(!g0.is_subgraph_of(&g));
                }
                RatioCase::SmallNonNested => {
                    assert_eq!(g.edge_count(), k / 2);
                    assert!(!g.is_subgraph_of(&g0));
                }
            }
        }
    }

    #[test]
    fn ratio_experiment_is_deterministic_and_negative() {
        let hyper = |p: usize| Hyperparameters::from_preset(model::ScalePreset::PaperSim1, p);
        let a = posterior_ratio_experiment(&[20, 30], 150, RatioCase::Supergraph, &hyper, 5).unwrap();
        let b = posterior_ratio_experiment(&[20, 30], 150, RatioCase::Supergraph, &hyper, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.log_ratio < 0.0));
    }
}
