//! The hierarchical G-Wishart model.
//!
//! Prior: `π(G) ∝ C(p(p-1)/2, |G|)⁻¹ · exp(-|G| C_τ log p)` on decomposable
//! graphs with at most `R` edges, and `Ω | G ~ W_G(ν, A)` with `A = g·XᵀX`.
//! The posterior is `Ω | G, X ~ W_G(n + ν, (1 + g)·XᵀX)`.
//!
//! `A` is never formed as a full matrix: every quantity is assembled from
//! clique and separator blocks of `XᵀX`, which stay positive definite when
//! `n < p` as long as each clique has at most `n` vertices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, max_edges, PerfectSequence, UndirectedGraph};
use crate::numerics::{
    self, inverse_wishart_from_scale_factor, log_gamma, log_multivariate_gamma, standard_normal,
    SymmetricMatrix,
};
use crate::simulate::Truth;

/// Hyperparameters `(ν, g, C_τ, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub nu: f64,
    pub g: f64,
    pub c_tau: f64,
    /// Maximum edge count `R`; `None` means `p(p-1)/2` (inactive).
    pub max_edges: Option<usize>,
}

impl Hyperparameters {
    pub const DEFAULT_NU: f64 = 3.0;
    pub const DEFAULT_C_TAU: f64 = 0.5;

    /// `ν = 3`, `C_τ = 0.5`, inactive `R`.
    pub fn with_g(g: f64) -> Self {
        Hyperparameters {
            nu: Self::DEFAULT_NU,
            g,
            c_tau: Self::DEFAULT_C_TAU,
            max_edges: None,
        }
    }

    pub fn from_preset(preset: ScalePreset, dim: usize) -> Self {
        Self::with_g(preset.g(dim))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.nu > 2.0) || !self.nu.is_finite() {
            return Err(Error::InvalidInput(format!("nu must exceed 2, got {}", self.nu)));
        }
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::InvalidInput(format!("g must be positive, got {}", self.g)));
        }
        if !(self.c_tau > 0.0) || !self.c_tau.is_finite() {
            return Err(Error::InvalidInput(format!("C_tau must be positive, got {}", self.c_tau)));
        }
        if let Some(r) = self.max_edges {
            if r == 0 || r > max_edges(p) {
                return Err(Error::InvalidInput(format!(
                    "R must lie in 1..={} for p = {p}, got {r}",
                    max_edges(p)
                )));
            }
        }
        Ok(())
    }

    pub fn effective_max_edges(&self, p: usize) -> usize {
        self.max_edges.unwrap_or_else(|| max_edges(p))
    }
}

/// Named rules for the scale multiplier `g` in `A = g·XᵀX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalePreset {
    /// `g = 0.1 δ⁻¹ d^(-2.5-δ)`, `δ = 0.01`.
    PaperSim1,
    /// `g = (0.1 δ)⁻¹ d^(-2.5-δ)`, `δ = 0.001`.
    PaperSim2,
}

impl ScalePreset {
    pub fn delta(self) -> f64 {
        match self {
            ScalePreset::PaperSim1 => 0.01,
            ScalePreset::PaperSim2 => 0.001,
        }
    }

    /// `g` for dimension basis `dim` (normally `p`).
    pub fn g(self, dim: usize) -> f64 {
        let delta = self.delta();
        let lead = match self {
            ScalePreset::PaperSim1 => 0.1 / delta,
            ScalePreset::PaperSim2 => 1.0 / (0.1 * delta),
        };
        lead * (dim as f64).powf(-2.5 - delta)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalePreset::PaperSim1 => "paper-sim1",
            ScalePreset::PaperSim2 => "paper-sim2",
        }
    }
}

impl std::str::FromStr for ScalePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-sim1" => Ok(ScalePreset::PaperSim1),
            "paper-sim2" => Ok(ScalePreset::PaperSim2),
            other => Err(Error::InvalidInput(format!("unknown preset {other:?}"))),
        }
    }
}

/// Theory-scaled edge cap `R = C_r {n / log(n ∨ p)}^(ξ/2)`, at least 1.
pub fn theory_max_edges(n: usize, p: usize, c_r: f64, xi: f64) -> usize {
    let m = n.max(p).max(2) as f64;
    let r = c_r * (n as f64 / m.ln()).powf(xi / 2.0);
    (r.floor() as usize).clamp(1, max_edges(p).max(1))
}

/// An `n × p` data matrix with its cached Gram matrix `XᵀX`.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    gram: SymmetricMatrix,
    truth: Option<Truth>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("data contain non-finite values".into()));
        }
        let gram = numerics::gram(&x);
        Ok(Dataset { x, gram, truth: None })
    }

    pub fn with_truth(mut self, truth: Truth) -> Result<Self> {
        if truth.graph.p() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: truth.graph.p(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn gram(&self) -> &SymmetricMatrix {
        &self.gram
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.truth.as_ref()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// First `n` rows as a new dataset (truth carried over).
    pub fn head(&self, n: usize) -> Result<Self> {
        if n > self.n() {
            return Err(Error::InvalidInput(format!("requested {n} rows of {}", self.n())));
        }
        let mut d = Dataset::new(self.x.rows(0, n).into_owned())?;
        d.truth = self.truth.clone();
        Ok(d)
    }

    /// Reorders columns so that new column `perm[j]` holds old column `j`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        let p = self.p();
        if perm.len() != p {
            return Err(Error::DimensionMismatch { expected: p, found: perm.len() });
        }
        let mut x = DMatrix::<f64>::zeros(self.n(), p);
        for j in 0..p {
            x.set_column(perm[j], &self.x.column(j));
        }
        Dataset::new(x)
    }
}

/// Unnormalized log posterior of a graph split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphScore {
    pub log_marginal: f64,
    pub log_prior: f64,
    pub log_posterior_unnorm: f64,
}

impl GraphScore {
    fn new(log_marginal: f64, log_prior: f64) -> Self {
        GraphScore {
            log_marginal,
            log_prior,
            log_posterior_unnorm: log_marginal + log_prior,
        }
    }

    /// Score of a graph outside the prior support.
    fn excluded() -> Self {
        GraphScore::new(f64::NEG_INFINITY, f64::NEG_INFINITY)
    }

    pub fn is_supported(&self) -> bool {
        self.log_prior.is_finite()
    }
}

/// `log I(ν, A)` for the complete graph on `q` vertices given `log det A`.
pub fn log_norm_const_complete_from_logdet(q: usize, nu: f64, log_det: f64) -> f64 {
    if q == 0 {
        return 0.0;
    }
    let qf = q as f64;
    let a = nu + qf - 1.0;
    a * qf / 2.0 * std::f64::consts::LN_2 + log_multivariate_gamma(q, a / 2.0) - a / 2.0 * log_det
}

/// `log I(ν, A)` for the complete graph on `q = dim(A)` vertices; `q = 0` gives 0.
pub fn log_norm_const_complete(q: usize, nu: f64, a_sub: &SymmetricMatrix) -> Result<f64> {
    if a_sub.dim() != q {
        return Err(Error::DimensionMismatch { expected: q, found: a_sub.dim() });
    }
    if q == 0 {
        return Ok(0.0);
    }
    Ok(log_norm_const_complete_from_logdet(q, nu, a_sub.log_det()?))
}

/// `log I_G(ν, A)` as clique terms minus separator terms along `seq`.
pub fn log_norm_const(
    g: &UndirectedGraph,
    seq: &PerfectSequence,
    nu: f64,
    a: &SymmetricMatrix,
) -> Result<f64> {
    if a.dim() != g.p() {
        return Err(Error::DimensionMismatch { expected: g.p(), found: a.dim() });
    }
    let term = |set: &Vec<usize>| -> Result<f64> {
        log_norm_const_complete(set.len(), nu, &a.submatrix(set)?)
    };
    let cliques: f64 = seq.cliques.iter().map(term).sum::<Result<f64>>()?;
    let seps: f64 = seq.separators.iter().map(term).sum::<Result<f64>>()?;
    Ok(cliques - seps)
}

/// `log I(n+ν, (1+g)X_C) - log I(ν, g X_C)` for one complete block.
fn block_marginal_term(data: &Dataset, set: &[usize], hyper: &Hyperparameters) -> Result<f64> {
    let q = set.len();
    if q == 0 {
        return Ok(0.0);
    }
    if q > data.n() {
        return Err(Error::CliqueTooLarge { size: q, n: data.n() });
    }
    let ld = data.gram().submatrix(set)?.log_det()?;
    let qf = q as f64;
    let post = log_norm_const_complete_from_logdet(
        q,
        data.n() as f64 + hyper.nu,
        qf * (1.0 + hyper.g).ln() + ld,
    );
    let prior = log_norm_const_complete_from_logdet(q, hyper.nu, qf * hyper.g.ln() + ld);
    Ok(post - prior)
}

fn sequence_for(g: &UndirectedGraph, data: &Dataset) -> Result<PerfectSequence> {
    if g.p() != data.p() {
        return Err(Error::DimensionMismatch { expected: data.p(), found: g.p() });
    }
    let seq = graph::perfect_sequence(g)?;
    let largest = seq.max_clique_size();
    if largest > data.n() {
        return Err(Error::CliqueTooLarge { size: largest, n: data.n() });
    }
    Ok(seq)
}

/// `log I_G(n+ν, XᵀX+A) - log I_G(ν, A)`, the marginal likelihood without
/// its `-np/2 log 2π` constant.
fn log_marginal_ratio(data: &Dataset, g: &UndirectedGraph, hyper: &Hyperparameters) -> Result<f64> {
    let seq = sequence_for(g, data)?;
    log_marginal_ratio_seq(data, &seq, hyper)
}

fn log_marginal_ratio_seq(
    data: &Dataset,
    seq: &PerfectSequence,
    hyper: &Hyperparameters,
) -> Result<f64> {
    let mut total = 0.0;
    for c in &seq.cliques {
        total += block_marginal_term(data, c, hyper)?;
    }
    for s in &seq.separators {
        total -= block_marginal_term(data, s, hyper)?;
    }
    Ok(total)
}

/// `log f(X | G)` under the G-Wishart prior with `A = g·XᵀX`.
pub fn log_marginal_likelihood(
    data: &Dataset,
    g: &UndirectedGraph,
    hyper: &Hyperparameters,
) -> Result<f64> {
    let np = (data.n() * data.p()) as f64;
    Ok(-np / 2.0 * (2.0 * PI).ln() + log_marginal_ratio(data, g, hyper)?)
}

fn log_binomial(m: usize, k: usize) -> f64 {
    log_gamma(m as f64 + 1.0) - log_gamma(k as f64 + 1.0) - log_gamma((m - k) as f64 + 1.0)
}

/// Unnormalized log graph prior; `-∞` outside decomposable graphs with `|G| ≤ R`.
pub fn log_graph_prior(g: &UndirectedGraph, hyper: &Hyperparameters, p: usize) -> f64 {
    let k = g.edge_count();
    if g.p() != p || k > hyper.effective_max_edges(p) || !graph::is_decomposable(g) {
        return f64::NEG_INFINITY;
    }
    -log_binomial(max_edges(p), k) - k as f64 * hyper.c_tau * (p as f64).ln()
}

/// Marginal likelihood and prior of `g`. Graphs outside the prior support
/// (non-decomposable or `|G| > R`) score `-∞` without touching the data.
pub fn score_graph(data: &Dataset, g: &UndirectedGraph, hyper: &Hyperparameters) -> Result<GraphScore> {
    let log_prior = log_graph_prior(g, hyper, data.p());
    if !log_prior.is_finite() {
        if g.p() != data.p() {
            return Err(Error::DimensionMismatch { expected: data.p(), found: g.p() });
        }
        return Ok(GraphScore::excluded());
    }
    let log_ml = log_marginal_likelihood(data, g, hyper)?;
    Ok(GraphScore::new(log_ml, log_prior))
}

/// `log f(X | G1) - log f(X | G0)`.
pub fn log_pairwise_bayes_factor(
    data: &Dataset,
    g1: &UndirectedGraph,
    g0: &UndirectedGraph,
    hyper: &Hyperparameters,
) -> Result<f64> {
    if g1 == g0 {
        sequence_for(g1, data)?;
        return Ok(0.0);
    }
    Ok(log_marginal_ratio(data, g1, hyper)? - log_marginal_ratio(data, g0, hyper)?)
}

/// `log π(G1 | X) - log π(G0 | X)`.
pub fn log_posterior_ratio(
    data: &Dataset,
    g1: &UndirectedGraph,
    g0: &UndirectedGraph,
    hyper: &Hyperparameters,
) -> Result<f64> {
    let bf = log_pairwise_bayes_factor(data, g1, g0, hyper)?;
    let p = data.p();
    Ok(bf + log_graph_prior(g1, hyper, p) - log_graph_prior(g0, hyper, p))
}

type BlockFn<'a> = dyn Fn(&[usize]) -> Result<SymmetricMatrix> + 'a;

fn dense_block(m: &SymmetricMatrix, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m.get(rows[a], cols[b]))
}

/// Draws `Ω ~ W_G(df, D)` clique by clique along `seq`.
///
/// The clique covariances `Σ_C = (Ω⁻¹)_C` form a hyper-inverse-Wishart
/// chain: the first clique is an inverse-Wishart draw; each later clique
/// draws its residual block `R = C \ S` given the separator `S` through
/// `Σ_{R·S} ~ IW(df+|C|-1, D_{R·S})` and the regression
/// `Σ_S⁻¹Σ_{SR} ~ MN(D_S⁻¹D_{SR}, D_S⁻¹, Σ_{R·S})`. The precision is then
/// `Σ_C {Σ_C⁻¹}⁰ - Σ_S {Σ_S⁻¹}⁰`, exactly zero off the edge set.
fn sample_gwishart_blocks<R: RngCore + ?Sized>(
    p: usize,
    seq: &PerfectSequence,
    df: f64,
    block: &BlockFn<'_>,
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    let mut sigma = SymmetricMatrix::zeros(p);
    let empty = Vec::new();
    for (l, clique) in seq.cliques.iter().enumerate() {
        let d_c = block(clique)?;
        let q = clique.len();
        let df_std = df + q as f64 - 1.0;
        let sep = if l == 0 { &empty } else { &seq.separators[l - 1] };
        if sep.is_empty() {
            let s = inverse_wishart_from_scale_factor(&d_c.cholesky()?, df_std, rng);
            for a in 0..q {
                for b in 0..=a {
                    sigma.set(clique[a], clique[b], s.get(a, b));
                }
            }
            continue;
        }
        let pos_s: Vec<usize> = (0..q).filter(|&a| sep.contains(&clique[a])).collect();
        let pos_r: Vec<usize> = (0..q).filter(|&a| !sep.contains(&clique[a])).collect();
        let resid: Vec<usize> = pos_r.iter().map(|&a| clique[a]).collect();
        let (s, r) = (pos_s.len(), pos_r.len());

        let d_ss = d_c.submatrix(&pos_s)?;
        let d_sr = dense_block(&d_c, &pos_s, &pos_r);
        let d_rr = dense_block(&d_c, &pos_r, &pos_r);
        let chol_ss = d_ss.cholesky()?;
        let d_ss_inv = chol_ss.inverse().to_dense();
        let mean = &d_ss_inv * &d_sr;
        let d_r_given_s = SymmetricMatrix::symmetrize(&(d_rr - d_sr.transpose() * &mean))?;
        let sigma_r_given_s =
            inverse_wishart_from_scale_factor(&d_r_given_s.cholesky()?, df_std, rng);

        let row_factor = chol_ss.factor_inverse().transpose();
        let col_factor = sigma_r_given_s.cholesky()?.factor().clone();
        let z = DMatrix::from_fn(s, r, |_, _| standard_normal(rng));
        let bt = mean + row_factor * z * col_factor.transpose();

        let sigma_ss = dense_block(&sigma, sep, sep);
        let sigma_sr = &sigma_ss * &bt;
        let sigma_rr = sigma_r_given_s.to_dense() + bt.transpose() * &sigma_ss * &bt;
        for a in 0..r {
            for b in 0..s {
                sigma.set(resid[a], sep[b], sigma_sr[(b, a)]);
            }
            for b in 0..=a {
                sigma.set(resid[a], resid[b], 0.5 * (sigma_rr[(a, b)] + sigma_rr[(b, a)]));
            }
        }
    }
    let mut omega = SymmetricMatrix::zeros(p);
    for c in &seq.cliques {
        omega.scatter_add(c, &sigma.submatrix(c)?.inverse()?, 1.0);
    }
    for s in seq.separators.iter().filter(|s| !s.is_empty()) {
        omega.scatter_add(s, &sigma.submatrix(s)?.inverse()?, -1.0);
    }
    Ok(omega)
}

/// `E[Ω]` for `Ω ~ W_G(df, D)`: `Σ_C (df+|C|-1){D_C⁻¹}⁰ - Σ_S (df+|S|-1){D_S⁻¹}⁰`.
fn gwishart_mean_blocks(p: usize, seq: &PerfectSequence, df: f64, block: &BlockFn<'_>) -> Result<SymmetricMatrix> {
    let mut mean = SymmetricMatrix::zeros(p);
    for c in &seq.cliques {
        let w = df + c.len() as f64 - 1.0;
        mean.scatter_add(c, &block(c)?.inverse()?, w);
    }
    for s in seq.separators.iter().filter(|s| !s.is_empty()) {
        let w = df + s.len() as f64 - 1.0;
        mean.scatter_add(s, &block(s)?.inverse()?, -w);
    }
    Ok(mean)
}

/// Draws `Ω ~ W_G(df, scale)` for a decomposable `g`.
pub fn sample_gwishart<R: RngCore + ?Sized>(
    g: &UndirectedGraph,
    df: f64,
    scale: &SymmetricMatrix,
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    if scale.dim() != g.p() {
        return Err(Error::DimensionMismatch { expected: g.p(), found: scale.dim() });
    }
    if !(df > 2.0) {
        return Err(Error::InvalidInput(format!("G-Wishart df must exceed 2, got {df}")));
    }
    let seq = graph::perfect_sequence(g)?;
    sample_gwishart_blocks(g.p(), &seq, df, &|set| scale.submatrix(set), rng)
}

/// `E[Ω]` for `Ω ~ W_G(df, scale)` with decomposable `g`.
pub fn gwishart_mean(g: &UndirectedGraph, df: f64, scale: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if scale.dim() != g.p() {
        return Err(Error::DimensionMismatch { expected: g.p(), found: scale.dim() });
    }
    let seq = graph::perfect_sequence(g)?;
    gwishart_mean_blocks(g.p(), &seq, df, &|set| scale.submatrix(set))
}

/// One draw from the posterior `W_G(n + ν, (1 + g)·XᵀX)`.
pub fn sample_precision_given_graph<R: RngCore + ?Sized>(
    data: &Dataset,
    g: &UndirectedGraph,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    let seq = sequence_for(g, data)?;
    let c = 1.0 + hyper.g;
    sample_gwishart_blocks(
        data.p(),
        &seq,
        data.n() as f64 + hyper.nu,
        &|set| Ok(data.gram().submatrix(set)?.scaled(c)),
        rng,
    )
}

/// Closed-form `E[Ω | G, X]`.
pub fn posterior_mean_precision(
    data: &Dataset,
    g: &UndirectedGraph,
    hyper: &Hyperparameters,
) -> Result<SymmetricMatrix> {
    let seq = sequence_for(g, data)?;
    let c = 1.0 + hyper.g;
    gwishart_mean_blocks(data.p(), &seq, data.n() as f64 + hyper.nu, &|set| {
        Ok(data.gram().submatrix(set)?.scaled(c))
    })
}

/// Draws from the prior `W_G(ν, g·XᵀX)`; used by Monte Carlo checks of the marginal likelihood.
pub fn sample_prior_precision<R: RngCore + ?Sized>(
    data: &Dataset,
    g: &UndirectedGraph,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    let seq = sequence_for(g, data)?;
    sample_gwishart_blocks(
        data.p(),
        &seq,
        hyper.nu,
        &|set| Ok(data.gram().submatrix(set)?.scaled(hyper.g)),
        rng,
    )
}

/// `log f(X | Ω) = -np/2 log 2π + n/2 log det Ω - tr(Ω XᵀX)/2`.
pub fn log_likelihood(data: &Dataset, omega: &SymmetricMatrix) -> Result<f64> {
    let p = data.p();
    if omega.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, found: omega.dim() });
    }
    let n = data.n() as f64;
    let ld = omega.log_det()?;
    let mut tr = 0.0;
    for i in 0..p {
        for j in 0..p {
            tr += omega.get(i, j) * data.gram().get(j, i);
        }
    }
    Ok(-n * p as f64 / 2.0 * (2.0 * PI).ln() + n / 2.0 * ld - tr / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_mvn, RngState};
    use approx::assert_relative_eq;

    fn ar1_sigma(p: usize) -> SymmetricMatrix {
        SymmetricMatrix::from_fn(p, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()))
    }

    fn ar1_data(p: usize, n: usize, seed: u64) -> Dataset {
        let mut rng = RngState::new(seed, 0);
        Dataset::new(sample_mvn(n, &ar1_sigma(p), &mut rng).unwrap()).unwrap()
    }

    #[test]
    fn complete_constant_examples() {
        let a = SymmetricMatrix::from_diagonal(&[2.0]);
        assert_relative_eq!(
            log_norm_const_complete(1, 3.0, &a).unwrap(),
            -0.12078223763524522,
            epsilon = 1e-12
        );
        let i2 = SymmetricMatrix::identity(2);
        let direct = 4.0 * 2f64.ln() + 0.5 * PI.ln() + log_gamma(2.0) + log_gamma(1.5);
        assert_relative_eq!(log_norm_const_complete(2, 3.0, &i2).unwrap(), direct, epsilon = 1e-12);
        assert_relative_eq!(direct, 3.2242, epsilon = 1e-4);
        assert_eq!(log_norm_const_complete(0, 3.0, &SymmetricMatrix::zeros(0)).unwrap(), 0.0);
    }

    #[test]
    fn decomposed_constant_examples() {
        let a = SymmetricMatrix::from_fn(3, |i, j| if i == j { 2.0 } else { 0.3 });
        let k3 = UndirectedGraph::complete(3);
        let seq = graph::perfect_sequence(&k3).unwrap();
        assert_relative_eq!(
            log_norm_const(&k3, &seq, 3.5, &a).unwrap(),
            log_norm_const_complete(3, 3.5, &a).unwrap(),
            max_relative = 1e-14
        );

        let e2 = UndirectedGraph::empty(2);
        let i2 = SymmetricMatrix::identity(2);
        let v = log_norm_const(&e2, &graph::perfect_sequence(&e2).unwrap(), 3.0, &i2).unwrap();
        assert_relative_eq!(v, 2.0 * log_gamma(1.5) + 3.0 * 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(v, 1.838, epsilon = 1e-3);

        let path = UndirectedGraph::path(3);
        let i3 = SymmetricMatrix::identity(3);
        let v = log_norm_const(&path, &graph::perfect_sequence(&path).unwrap(), 3.0, &i3).unwrap();
        let i01 = log_norm_const_complete(2, 3.0, &i2).unwrap();
        let i1 = log_norm_const_complete(1, 3.0, &SymmetricMatrix::identity(1)).unwrap();
        assert_relative_eq!(v, 2.0 * i01 - i1, epsilon = 1e-12);
    }

    #[test]
    fn path_constant_matches_monte_carlo_integral() {
        // I_G(ν, I) for the path 0-1-2: integrate det(Ω)^{(ν-2)/2} e^{-tr Ω/2} over
        // (ω00, ω11, ω22, ω01, ω12) with Ω ∈ P_G, by importance sampling with
        // Gamma diagonals and Gaussian off-diagonals.
        use rand_distr::{Distribution, Gamma, Normal};
        let nu = 3.0;
        let path = UndirectedGraph::path(3);
        let exact = log_norm_const(
            &path,
            &graph::perfect_sequence(&path).unwrap(),
            nu,
            &SymmetricMatrix::identity(3),
        )
        .unwrap();
        let mut rng = RngState::new(77, 0);
        let gamma = Gamma::new(2.0, 1.0).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let draws = 400_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..draws {
            let d: Vec<f64> = (0..3).map(|_| gamma.sample(&mut rng)).collect();
            let o01: f64 = normal.sample(&mut rng);
            let o12: f64 = normal.sample(&mut rng);
            let det = d[0] * d[1] * d[2] - d[0] * o12 * o12 - d[2] * o01 * o01;
            let w = if det > 0.0 {
                let target = det.powf((nu - 2.0) / 2.0) * (-(d[0] + d[1] + d[2]) / 2.0).exp();
                let q_diag: f64 = d.iter().map(|&x| x * (-x).exp()).product();
                let q_off = (-(o01 * o01 + o12 * o12) / 2.0).exp() / (2.0 * PI);
                target / (q_diag * q_off)
            } else {
                0.0
            };
            sum += w;
            sum_sq += w * w;
        }
        let mean = sum / draws as f64;
        let se = ((sum_sq / draws as f64 - mean * mean) / draws as f64).sqrt();
        let truth = exact.exp();
        assert!((mean - truth).abs() < 4.0 * se, "MC {mean} ± {se} vs exact {truth}");
    }

    #[test]
    fn one_dimensional_marginal_matches_quadrature() {
        let x = DMatrix::from_column_slice(5, 1, &[0.3, -1.2, 0.8, 2.1, -0.4]);
        let data = Dataset::new(x).unwrap();
        let hyper = Hyperparameters { nu: 3.0, g: 0.7, c_tau: 0.5, max_edges: None };
        let g = UndirectedGraph::empty(1);
        let exact = log_marginal_likelihood(&data, &g, &hyper).unwrap();
        // ∫ Π N(x_i | 0, 1/ω) · ω^{(ν-2)/2} e^{-ω a/2} / I(ν, a) dω,  a = g Σx²
        let s = data.gram().get(0, 0);
        let a = hyper.g * s;
        let log_i = log_norm_const_complete_from_logdet(1, hyper.nu, a.ln());
        let n = data.n() as f64;
        let integrand = |w: f64| -> f64 {
            (-n / 2.0 * (2.0 * PI).ln() + n / 2.0 * w.ln() - w * s / 2.0
                + (hyper.nu - 2.0) / 2.0 * w.ln()
                - w * a / 2.0
                - log_i)
                .exp()
        };
        // Simpson on [0, 40] with a √ substitution to tame the endpoint.
        let m = 200_000;
        let upper = 40f64.sqrt();
        let h = upper / m as f64;
        let f = |t: f64| if t == 0.0 { 0.0 } else { integrand(t * t) * 2.0 * t };
        let mut acc = f(0.0) + f(upper);
        for k in 1..m {
            let t = k as f64 * h;
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(t);
        }
        let quad = acc * h / 3.0;
        assert!((quad.ln() - exact).abs() < 1e-6, "quad {} exact {}", quad.ln(), exact);
    }

    #[test]
    fn independent_pair_prefers_empty_graph() {
        let mut rng = RngState::new(8, 0);
        let data = Dataset::new(sample_mvn(2000, &SymmetricMatrix::identity(2), &mut rng).unwrap()).unwrap();
        let hyper = Hyperparameters::with_g(0.01);
        let full = log_marginal_likelihood(&data, &UndirectedGraph::complete(2), &hyper).unwrap();
        let empty = log_marginal_likelihood(&data, &UndirectedGraph::empty(2), &hyper).unwrap();
        assert!(full < empty);
    }

    #[test]
    fn scores_are_permutation_invariant() {
        let data = ar1_data(5, 40, 2);
        let hyper = Hyperparameters::with_g(0.05);
        let g = UndirectedGraph::from_edges(5, [(0, 1), (1, 2), (0, 2), (3, 4)]).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let gp = g.relabel(&perm).unwrap();
        let dp = data.permute_columns(&perm).unwrap();
        let a = log_marginal_likelihood(&data, &g, &hyper).unwrap();
        let b = log_marginal_likelihood(&dp, &gp, &hyper).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn marginal_errors() {
        let data = ar1_data(4, 2, 3);
        let hyper = Hyperparameters::with_g(0.1);
        let c4 = UndirectedGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(log_marginal_likelihood(&data, &c4, &hyper).unwrap_err(), Error::NotDecomposable);
        assert_eq!(
            log_marginal_likelihood(&data, &UndirectedGraph::complete(4), &hyper).unwrap_err(),
            Error::CliqueTooLarge { size: 4, n: 2 }
        );
        assert!(log_marginal_likelihood(&data, &UndirectedGraph::path(4), &hyper).is_ok());
    }

    #[test]
    fn prior_examples() {
        let hyper = Hyperparameters::with_g(1.0);
        let p = 10;
        let a = UndirectedGraph::path(6).relabel(&[0, 1, 2, 3, 4, 5]).unwrap();
        let a = UndirectedGraph::from_edges(p, a.edges()).unwrap();
        let b = UndirectedGraph::from_edges(p, [(0, 9), (1, 9), (2, 9), (3, 9), (4, 9)]).unwrap();
        assert_relative_eq!(log_graph_prior(&a, &hyper, p), log_graph_prior(&b, &hyper, p));

        let capped = Hyperparameters { max_edges: Some(4), ..hyper };
        assert_eq!(log_graph_prior(&b, &capped, p), f64::NEG_INFINITY);

        let six = b.with_edge(5, 9).unwrap();
        let diff = log_graph_prior(&six, &hyper, p) - log_graph_prior(&b, &hyper, p);
        assert_relative_eq!(diff, (6.0f64 / 40.0).ln() - 0.5 * 10f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(diff, -3.0484, epsilon = 1e-4);

        let c4 = UndirectedGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(log_graph_prior(&c4, &hyper, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn prior_edge_step_is_bounded() {
        let hyper = Hyperparameters::with_g(1.0);
        for p in 2..=5 {
            let bound = hyper.c_tau * (p as f64).ln() + (max_edges(p) as f64).ln();
            for g in graph::enumerate_decomposable(p) {
                for m in graph::decomposable_neighbors(&g).unwrap() {
                    let h = m.apply(&g).unwrap();
                    let d = log_graph_prior(&h, &hyper, p) - log_graph_prior(&g, &hyper, p);
                    assert!(d.abs() <= bound + 1e-12);
                }
            }
        }
    }

    #[test]
    fn bayes_factor_and_ratio_identities() {
        let data = ar1_data(5, 60, 4);
        let hyper = Hyperparameters::with_g(0.05);
        let g0 = UndirectedGraph::path(5);
        let g1 = g0.with_edge(0, 2).unwrap();
        let g2 = UndirectedGraph::from_edges(5, [(0, 1), (1, 2), (2, 3), (0, 4)]).unwrap();
        assert_eq!(log_pairwise_bayes_factor(&data, &g0, &g0, &hyper).unwrap(), 0.0);
        assert_eq!(log_posterior_ratio(&data, &g0, &g0, &hyper).unwrap(), 0.0);
        let ab = log_pairwise_bayes_factor(&data, &g1, &g0, &hyper).unwrap();
        let ba = log_pairwise_bayes_factor(&data, &g0, &g1, &hyper).unwrap();
        assert_relative_eq!(ab + ba, 0.0, epsilon = 1e-9);
        let direct = log_marginal_likelihood(&data, &g1, &hyper).unwrap()
            - log_marginal_likelihood(&data, &g0, &hyper).unwrap();
        assert_relative_eq!(ab, direct, max_relative = 1e-9);
        assert_relative_eq!(
            log_posterior_ratio(&data, &g2, &g0, &hyper).unwrap(),
            log_pairwise_bayes_factor(&data, &g2, &g0, &hyper).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn sampler_support_and_positive_definite() {
        let data = ar1_data(6, 30, 5);
        let hyper = Hyperparameters::with_g(0.1);
        let g = UndirectedGraph::from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (4, 5)]).unwrap();
        let mut rng = RngState::new(1, 2);
        for _ in 0..20 {
            let om = sample_precision_given_graph(&data, &g, &hyper, &mut rng).unwrap();
            assert!(om.cholesky().is_ok());
            for i in 0..6 {
                for j in 0..i {
                    if !g.has_edge(i, j) {
                        assert_eq!(om.get(i, j), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn complete_graph_sampler_matches_wishart_moments() {
        let data = ar1_data(3, 20, 6);
        let hyper = Hyperparameters::with_g(0.2);
        let g = UndirectedGraph::complete(3);
        let mean = posterior_mean_precision(&data, &g, &hyper).unwrap();
        let scale = data.gram().scaled(1.0 + hyper.g);
        let want = scale.inverse().unwrap().scaled(data.n() as f64 + hyper.nu + 2.0);
        for i in 0..3 {
            for j in 0..=i {
                assert_relative_eq!(mean.get(i, j), want.get(i, j), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn empty_graph_mean_is_diagonal() {
        let data = ar1_data(4, 25, 7);
        let hyper = Hyperparameters::with_g(0.3);
        let mean = posterior_mean_precision(&data, &UndirectedGraph::empty(4), &hyper).unwrap();
        for i in 0..4 {
            let want = (data.n() as f64 + hyper.nu) / ((1.0 + hyper.g) * data.gram().get(i, i));
            assert_relative_eq!(mean.get(i, i), want, max_relative = 1e-12);
            for j in 0..i {
                assert_eq!(mean.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn presets() {
        let g1 = ScalePreset::PaperSim1.g(100);
        assert_relative_eq!(g1, 10.0 * 100f64.powf(-2.51), max_relative = 1e-12);
        let g2 = ScalePreset::PaperSim2.g(100);
        assert_relative_eq!(g2, 1e4 * 100f64.powf(-2.501), max_relative = 1e-12);
        assert_eq!("paper-sim2".parse::<ScalePreset>().unwrap(), ScalePreset::PaperSim2);
        assert!(Hyperparameters::with_g(0.0).validate(3).is_err());
        assert!(Hyperparameters { nu: 2.0, ..Hyperparameters::with_g(1.0) }.validate(3).is_err());
        assert!(Hyperparameters { max_edges: Some(4), ..Hyperparameters::with_g(1.0) }
            .validate(3)
            .is_err());
        assert!(theory_max_edges(100, 30, 1.0, 1.0) >= 1);
    }
}
