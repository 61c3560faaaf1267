//! Undirected graphs, chordality testing, perfect clique sequences, and
//! decomposability-preserving single-edge moves.
//!
//! Vertices are 0-based; the edge-list text format is 1-based.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered vertex pair stored as `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

#[inline]
pub fn canonical(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Number of unordered vertex pairs, `p(p-1)/2`.
#[inline]
pub fn max_edges(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Simple undirected graph on vertices `0..p`, stored as an adjacency bitset.
///
/// Two graphs compare equal iff they have the same vertex count and edge set.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "EdgeListRepr", try_from = "EdgeListRepr")]
pub struct UndirectedGraph {
    p: usize,
    words: usize,
    bits: Vec<u64>,
    n_edges: usize,
}

#[derive(Serialize, Deserialize)]
struct EdgeListRepr {
    p: usize,
    edges: Vec<Edge>,
}

impl From<UndirectedGraph> for EdgeListRepr {
    fn from(g: UndirectedGraph) -> Self {
        EdgeListRepr {
            p: g.p,
            edges: g.edges(),
        }
    }
}

impl TryFrom<EdgeListRepr> for UndirectedGraph {
    type Error = Error;
    fn try_from(r: EdgeListRepr) -> Result<Self> {
        UndirectedGraph::from_edges(r.p, r.edges)
    }
}

impl fmt::Debug for UndirectedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UndirectedGraph(p={}, {:?})", self.p, self.edges())
    }
}

impl UndirectedGraph {
    pub fn empty(p: usize) -> Self {
        let words = p.div_ceil(64).max(1);
        UndirectedGraph {
            p,
            words,
            bits: vec![0; p * words],
            n_edges: 0,
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in (i + 1)..p {
                g.insert(i, j);
            }
        }
        g
    }

    pub fn from_edges(p: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut g = Self::empty(p);
        for (i, j) in edges {
            g.check_pair(i, j)?;
            g.insert(i, j);
        }
        Ok(g)
    }

    /// Path `0 - 1 - ... - (p-1)`.
    pub fn path(p: usize) -> Self {
        Self::from_edges(p, (1..p).map(|i| (i - 1, i))).expect("valid path")
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidInput(format!("self-loop on vertex {i}")));
        }
        for v in [i, j] {
            if v >= self.p {
                return Err(Error::IndexOutOfRange { index: v, dim: self.p });
            }
        }
        Ok(())
    }

    #[inline]
    fn bit(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    fn set_bit(&mut self, i: usize, j: usize, on: bool) {
        let w = &mut self.bits[i * self.words + j / 64];
        if on {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    fn insert(&mut self, i: usize, j: usize) -> bool {
        if self.bit(i, j) {
            return false;
        }
        self.set_bit(i, j, true);
        self.set_bit(j, i, true);
        self.n_edges += 1;
        true
    }

    fn remove(&mut self, i: usize, j: usize) -> bool {
        if !self.bit(i, j) {
            return false;
        }
        self.set_bit(i, j, false);
        self.set_bit(j, i, false);
        self.n_edges -= 1;
        true
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// `|G|`, the number of edges.
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.n_edges
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && i < self.p && j < self.p && self.bit(i, j)
    }

    /// Adds `{i, j}`; returns whether the edge was new.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_pair(i, j)?;
        Ok(self.insert(i, j))
    }

    /// Removes `{i, j}`; returns whether the edge was present.
    pub fn remove_edge(&mut self, i: usize, j: usize) -> Result<bool> {
        self.check_pair(i, j)?;
        Ok(self.remove(i, j))
    }

    pub fn with_edge(&self, i: usize, j: usize) -> Result<Self> {
        let mut g = self.clone();
        g.add_edge(i, j)?;
        Ok(g)
    }

    pub fn without_edge(&self, i: usize, j: usize) -> Result<Self> {
        let mut g = self.clone();
        g.remove_edge(i, j)?;
        Ok(g)
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.bits[v * self.words..(v + 1) * self.words];
        row.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
        })
    }

    pub fn degree(&self, v: usize) -> usize {
        self.bits[v * self.words..(v + 1) * self.words]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.n_edges);
        for i in 0..self.p {
            out.extend(self.neighbors(i).filter(|&j| j > i).map(|j| (i, j)));
        }
        out
    }

    /// Whether every pair in `vertices` is adjacent.
    pub fn is_complete_on(&self, vertices: &[usize]) -> bool {
        vertices
            .iter()
            .enumerate()
            .all(|(a, &u)| vertices[a + 1..].iter().all(|&v| self.has_edge(u, v)))
    }

    pub fn is_subgraph_of(&self, other: &Self) -> bool {
        self.p == other.p && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// Applies a vertex relabeling: vertex `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: perm.len(),
            });
        }
        Self::from_edges(self.p, self.edges().into_iter().map(|(i, j)| canonical(perm[i], perm[j])))
    }

    /// Complement graph on the same vertex set.
    pub fn complement(&self) -> Self {
        let mut g = Self::empty(self.p);
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if !self.has_edge(i, j) {
                    g.insert(i, j);
                }
            }
        }
        g
    }
}

/// Ordered cliques `P_1..P_h` and separators `S_2..S_h` of a decomposable graph.
///
/// `separators[l - 1]` is the separator of `cliques[l]`; every vertex set is
/// sorted ascending. Separators may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfectSequence {
    pub cliques: Vec<Vec<usize>>,
    pub separators: Vec<Vec<usize>>,
}

impl PerfectSequence {
    pub fn max_clique_size(&self) -> usize {
        self.cliques.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Checks the running-intersection and completeness invariants against `g`.
    pub fn validate(&self, g: &UndirectedGraph) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(format!("invalid perfect sequence: {m}")));
        if self.cliques.is_empty() && g.p() > 0 {
            return fail("no cliques");
        }
        if self.separators.len() + 1 != self.cliques.len().max(1) {
            return fail("separator count");
        }
        let mut seen = vec![false; g.p()];
        for (l, clique) in self.cliques.iter().enumerate() {
            if !g.is_complete_on(clique) {
                return fail("clique not complete");
            }
            // maximality: no outside vertex adjacent to the whole clique
            let maximal = (0..g.p())
                .filter(|v| !clique.contains(v))
                .all(|v| !clique.iter().all(|&u| g.has_edge(u, v)));
            if !maximal {
                return fail("clique not maximal");
            }
            if l > 0 {
                let expected: Vec<usize> = clique.iter().copied().filter(|&v| seen[v]).collect();
                if self.separators[l - 1] != expected {
                    return fail("running intersection");
                }
                if !g.is_complete_on(&expected) {
                    return fail("separator not complete");
                }
            }
            for &v in clique {
                seen[v] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return fail("cliques do not cover the vertex set");
        }
        Ok(())
    }
}

/// Maximum cardinality search. Ties go to the vertex with the smallest
/// `rank`; the identity rank gives lowest-index tie-breaking.
///
/// Returns the visit order and, for each visited vertex, its earlier-visited neighbors.
fn mcs(g: &UndirectedGraph, rank: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let p = g.p();
    let mut weight = vec![0usize; p];
    let mut visited = vec![false; p];
    let mut order = Vec::with_capacity(p);
    let mut madj = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best: Option<usize> = None;
        for v in 0..p {
            if visited[v] {
                continue;
            }
            best = match best {
                None => Some(v),
                Some(b) if weight[v] > weight[b] || (weight[v] == weight[b] && rank[v] < rank[b]) => {
                    Some(v)
                }
                keep => keep,
            };
        }
        let v = best.expect("unvisited vertex remains");
        visited[v] = true;
        let mut earlier = Vec::new();
        for u in g.neighbors(v) {
            if visited[u] {
                if u != v {
                    earlier.push(u);
                }
            } else {
                weight[u] += 1;
            }
        }
        order.push(v);
        madj.push(earlier);
    }
    (order, madj)
}

/// Fill-in check on an MCS order: each vertex's earlier neighbors, minus the
/// latest of them, must all be adjacent to that latest one.
fn mcs_order_is_perfect(g: &UndirectedGraph, order: &[usize], madj: &[Vec<usize>]) -> bool {
    let mut position = vec![0usize; g.p()];
    for (k, &v) in order.iter().enumerate() {
        position[v] = k;
    }
    madj.iter().all(|earlier| {
        let Some(&parent) = earlier.iter().max_by_key(|&&u| position[u]) else {
            return true;
        };
        earlier.iter().all(|&w| w == parent || g.has_edge(w, parent))
    })
}

fn identity_rank(p: usize) -> Vec<usize> {
    (0..p).collect()
}

/// True iff every cycle of length at least four has a chord.
pub fn is_decomposable(g: &UndirectedGraph) -> bool {
    let (order, madj) = mcs(g, &identity_rank(g.p()));
    mcs_order_is_perfect(g, &order, &madj)
}

/// Perfect sequence from MCS with lowest-index tie-breaking.
pub fn perfect_sequence(g: &UndirectedGraph) -> Result<PerfectSequence> {
    perfect_sequence_with_rank(g, &identity_rank(g.p()))
}

/// Perfect sequence from MCS with ties broken by smallest `rank[v]`.
///
/// Different ranks yield different (equally valid) perfect sequences.
pub fn perfect_sequence_with_rank(g: &UndirectedGraph, rank: &[usize]) -> Result<PerfectSequence> {
    if rank.len() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            found: rank.len(),
        });
    }
    let (order, madj) = mcs(g, rank);
    if !mcs_order_is_perfect(g, &order, &madj) {
        return Err(Error::NotDecomposable);
    }
    let p = g.p();
    let mut cliques = Vec::new();
    for k in 0..p {
        let closes = k + 1 == p || madj[k + 1].len() <= madj[k].len();
        if closes {
            let mut c = madj[k].clone();
            c.push(order[k]);
            c.sort_unstable();
            cliques.push(c);
        }
    }
    let mut seen = vec![false; p];
    let mut separators = Vec::with_capacity(cliques.len().saturating_sub(1));
    for (l, c) in cliques.iter().enumerate() {
        if l > 0 {
            separators.push(c.iter().copied().filter(|&v| seen[v]).collect());
        }
        for &v in c {
            seen[v] = true;
        }
    }
    Ok(PerfectSequence { cliques, separators })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Add,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeMove {
    pub edge: Edge,
    pub kind: MoveKind,
}

impl EdgeMove {
    pub fn apply(&self, g: &UndirectedGraph) -> Result<UndirectedGraph> {
        check_move(g, self.edge, self.kind)?;
        let (i, j) = self.edge;
        match self.kind {
            MoveKind::Add => g.with_edge(i, j),
            MoveKind::Delete => g.without_edge(i, j),
        }
    }
}

fn check_move(g: &UndirectedGraph, edge: Edge, kind: MoveKind) -> Result<()> {
    let (i, j) = edge;
    if i == j || i >= g.p() || j >= g.p() {
        return Err(Error::InvalidMove(format!("({i}, {j}) is not a vertex pair of the graph")));
    }
    match (kind, g.has_edge(i, j)) {
        (MoveKind::Add, true) => Err(Error::InvalidMove(format!("edge ({i}, {j}) already present"))),
        (MoveKind::Delete, false) => Err(Error::InvalidMove(format!("edge ({i}, {j}) not present"))),
        _ => Ok(()),
    }
}

/// Whether applying the move leaves a decomposable graph (full recheck).
pub fn move_is_decomposable(g: &UndirectedGraph, edge: Edge, kind: MoveKind) -> Result<bool> {
    let next = EdgeMove { edge, kind }.apply(g)?;
    Ok(is_decomposable(&next))
}

/// Local test for a move from a graph already known to be decomposable.
///
/// Deleting `{u, v}` keeps chordality iff the edge lies in exactly one
/// maximal clique, i.e. the common neighborhood of `u` and `v` is complete.
/// Adding `{u, v}` keeps chordality iff `u` and `v` are disconnected once
/// their common neighbors are removed (no induced `u`–`v` path of length ≥ 3).
pub fn move_is_decomposable_fast(g: &UndirectedGraph, edge: Edge, kind: MoveKind) -> Result<bool> {
    check_move(g, edge, kind)?;
    let (u, v) = edge;
    let common: Vec<usize> = g.neighbors(u).filter(|&w| g.has_edge(w, v)).collect();
    Ok(match kind {
        MoveKind::Delete => g.is_complete_on(&common),
        MoveKind::Add => {
            let mut blocked = vec![false; g.p()];
            for &w in &common {
                blocked[w] = true;
            }
            blocked[u] = true;
            let mut stack = vec![u];
            let mut reached = false;
            while let Some(x) = stack.pop() {
                for y in g.neighbors(x) {
                    if y == v {
                        reached = true;
                        break;
                    }
                    if !blocked[y] {
                        blocked[y] = true;
                        stack.push(y);
                    }
                }
                if reached {
                    break;
                }
            }
            !reached
        }
    })
}

/// All single-edge additions and deletions that keep `g` decomposable,
/// in lexicographic edge order.
pub fn decomposable_neighbors(g: &UndirectedGraph) -> Result<Vec<EdgeMove>> {
    if !is_decomposable(g) {
        return Err(Error::NotDecomposable);
    }
    let p = g.p();
    let mut out = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            let kind = if g.has_edge(i, j) {
                MoveKind::Delete
            } else {
                MoveKind::Add
            };
            if move_is_decomposable_fast(g, (i, j), kind)? {
                out.push(EdgeMove { edge: (i, j), kind });
            }
        }
    }
    Ok(out)
}

/// Every graph on `p` vertices, indexed by the bitmask over lexicographic pairs.
pub fn all_graphs(p: usize) -> impl Iterator<Item = UndirectedGraph> {
    let pairs: Vec<Edge> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    assert!(pairs.len() < 32, "enumeration only supported for p <= 8");
    (0u64..(1u64 << pairs.len())).map(move |mask| {
        UndirectedGraph::from_edges(
            p,
            pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &e)| e),
        )
        .expect("valid pairs")
    })
}

/// Every decomposable graph on `p` vertices (small `p` only).
pub fn enumerate_decomposable(p: usize) -> Vec<UndirectedGraph> {
    all_graphs(p).filter(is_decomposable).collect()
}

/// Parses the 1-based edge-list format. The vertex count comes from a
/// `p=<int>` header line or from `p`; if both are present they must agree.
pub fn parse_edge_list(text: &str, p: Option<usize>) -> Result<UndirectedGraph> {
    let mut header_p = None;
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p=") {
            let v = rest
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {}: bad header {line:?}", lineno + 1)))?;
            header_p = Some(v);
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |s: Option<&str>| -> Result<usize> {
            s.ok_or_else(|| Error::Parse(format!("line {}: expected two vertices", lineno + 1)))?
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {}: bad vertex in {line:?}", lineno + 1)))
        };
        let a = parse(it.next())?;
        let b = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::Parse(format!("line {}: trailing fields", lineno + 1)));
        }
        if a == 0 || b == 0 {
            return Err(Error::Parse(format!("line {}: vertices are 1-based", lineno + 1)));
        }
        pairs.push((a - 1, b - 1));
    }
    let p = match (header_p, p) {
        (Some(h), Some(o)) if h != o => {
            return Err(Error::DimensionMismatch { expected: o, found: h })
        }
        (Some(h), _) => h,
        (None, Some(o)) => o,
        (None, None) => {
            return Err(Error::Parse("vertex count missing: add a p=<int> header".into()))
        }
    };
    let mut g = UndirectedGraph::empty(p);
    for (a, b) in pairs {
        g.add_edge(a, b)
            .map_err(|e| Error::Parse(format!("edge ({}, {}): {e}", a + 1, b + 1)))?;
    }
    Ok(g)
}

/// Writes the 1-based edge-list format with a `p=<int>` header.
pub fn write_edge_list(g: &UndirectedGraph) -> String {
    let mut s = format!("p={}\n", g.p());
    for (i, j) in g.edges() {
        s.push_str(&format!("{} {}\n", i + 1, j + 1));
    }
    s
}
