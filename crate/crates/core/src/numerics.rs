//! Dense linear algebra and random-variate primitives.
//!
//! Wishart conventions: every sampler here follows the G-Wishart density
//! convention used throughout the crate,
//!
//! ```text
//! p(B) ∝ det(B)^((df - 2) / 2) · exp(-tr(B · scale) / 2)
//! ```
//!
//! For a complete q-dimensional block this is the textbook Wishart with
//! `df_std = df + q - 1` degrees of freedom and scale matrix `scale⁻¹`, so
//! its mean is `(df + q - 1) · scale⁻¹`. Passing a textbook df straight into
//! [`sample_wishart_complete`] silently shifts the mean by `q - 1`.

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Symmetric matrix stored as its packed lower triangle (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` on the lower triangle (`i >= j`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        SymmetricMatrix { dim, data }
    }

    /// Takes the lower triangle of a square dense matrix; the upper triangle is ignored.
    pub fn from_lower(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(Self::from_fn(m.nrows(), |i, j| m[(i, j)]))
    }

    /// Averages `m` with its transpose.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    /// Accepts a dense matrix only if it is symmetric to within `tol` (absolute).
    pub fn from_dense_checked(m: &DMatrix<f64>, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > tol {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Self::symmetrize(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed_index(i, j)] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed_index(i, j)] += v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymmetricMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(SymmetricMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// The principal submatrix on `indices`, taken in ascending index order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if let Some(&bad) = idx.iter().find(|&&k| k >= self.dim) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                dim: self.dim,
            });
        }
        Ok(Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b])))
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(self)
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(self.cholesky()?.log_det())
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(self.cholesky()?.inverse())
    }

    /// Adds `weight * block` into the rows/columns listed in `indices`.
    pub fn scatter_add(&mut self, indices: &[usize], block: &SymmetricMatrix, weight: f64) {
        debug_assert_eq!(indices.len(), block.dim());
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate().take(a + 1) {
                self.add_to(i, j, weight * block.get(a, b));
            }
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = M`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn new(m: &SymmetricMatrix) -> Result<Self> {
        let n = m.dim();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { dim: n, pivot: j });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Inverse of the lower factor, `L⁻¹` (lower triangular).
    pub fn factor_inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::<f64>::zeros(n, n);
        for c in 0..n {
            inv[(c, c)] = 1.0 / self.l[(c, c)];
            for i in (c + 1)..n {
                let mut s = 0.0;
                for k in c..i {
                    s -= self.l[(i, k)] * inv[(k, c)];
                }
                inv[(i, c)] = s / self.l[(i, i)];
            }
        }
        inv
    }

    /// `M⁻¹ = L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> SymmetricMatrix {
        let li = self.factor_inverse();
        let n = self.dim();
        SymmetricMatrix::from_fn(n, |i, j| {
            // (L⁻ᵀ L⁻¹)_ij = Σ_k Li[k,i] Li[k,j], k ≥ max(i,j) = i
            (i..n).map(|k| li[(k, i)] * li[(k, j)]).sum()
        })
    }
}

/// `(L, log det M)` for a symmetric positive definite `M`.
pub fn cholesky_logdet(m: &SymmetricMatrix) -> Result<(DMatrix<f64>, f64)> {
    let c = m.cholesky()?;
    let ld = c.log_det();
    Ok((c.l, ld))
}

/// `Σ_{i=0}^{q-1} ln Γ(a - i/2)`; the multivariate log-gamma without its π term.
pub fn log_gamma_product(q: usize, a: f64) -> f64 {
    (0..q).map(|i| ln_gamma(a - 0.5 * i as f64)).sum()
}

/// Multivariate log-gamma, `ln Γ_q(a) = q(q-1)/4 · ln π + Σ_{i<q} ln Γ(a - i/2)`.
pub fn log_multivariate_gamma(q: usize, a: f64) -> f64 {
    let qf = q as f64;
    qf * (qf - 1.0) / 4.0 * std::f64::consts::PI.ln() + log_gamma_product(q, a)
}

pub use statrs::function::gamma::ln_gamma as log_gamma;

/// Reproducible random stream keyed by `(seed, stream)`.
///
/// Backed by ChaCha8, a counter-based generator: distinct stream ids under
/// the same seed give independent sequences.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh generator on another stream under the same seed.
    pub fn fork(&self, stream: u64) -> Self {
        RngState::new(self.seed, stream)
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub(crate) fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Lower-triangular Bartlett factor `T` with `T Tᵀ ~ W_std(df_std, I_q)`.
fn bartlett_factor<R: RngCore + ?Sized>(q: usize, df_std: f64, rng: &mut R) -> DMatrix<f64> {
    let mut t = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        let chi = ChiSquared::new(df_std - i as f64).expect("Bartlett df must be positive");
        t[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            t[(i, j)] = standard_normal(rng);
        }
    }
    t
}

/// Draws `B` from the complete-graph G-Wishart `W(df, scale)`, i.e. the
/// textbook Wishart with `df + q - 1` degrees of freedom and scale `scale⁻¹`.
pub fn sample_wishart_complete<R: RngCore + ?Sized>(
    q: usize,
    df: f64,
    scale: &SymmetricMatrix,
    rng: &mut R,
) -> Result<SymmetricMatrix> {
    if scale.dim() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: scale.dim(),
        });
    }
    if !(df > 2.0) {
        return Err(Error::InvalidInput(format!("Wishart df must exceed 2, got {df}")));
    }
    let chol = scale.cholesky()?;
    Ok(wishart_from_scale_factor(&chol, df + q as f64 - 1.0, rng))
}

/// `W = L⁻ᵀ T Tᵀ L⁻¹` where `scale = L Lᵀ`; distributed as `W_std(df_std, scale⁻¹)`.
pub(crate) fn wishart_from_scale_factor<R: RngCore + ?Sized>(
    scale_chol: &Cholesky,
    df_std: f64,
    rng: &mut R,
) -> SymmetricMatrix {
    let q = scale_chol.dim();
    let t = bartlett_factor(q, df_std, rng);
    let f = scale_chol.factor_inverse().transpose() * t;
    let w = &f * f.transpose();
    SymmetricMatrix::from_fn(q, |i, j| w[(i, j)])
}

/// `Σ = W⁻¹` for `W ~ W_std(df_std, scale⁻¹)`, i.e. an inverse-Wishart draw
/// `IW_std(df_std, scale)`, computed as `(L T⁻ᵀ)(L T⁻ᵀ)ᵀ` without inverting `W`.
pub(crate) fn inverse_wishart_from_scale_factor<R: RngCore + ?Sized>(
    scale_chol: &Cholesky,
    df_std: f64,
    rng: &mut R,
) -> SymmetricMatrix {
    let q = scale_chol.dim();
    let t = bartlett_factor(q, df_std, rng);
    let t_inv = Cholesky { l: t }.factor_inverse();
    let f = scale_chol.factor() * t_inv.transpose();
    let s = &f * f.transpose();
    SymmetricMatrix::from_fn(q, |i, j| s[(i, j)])
}

/// `n` i.i.d. rows from `N_p(0, sigma)`.
pub fn sample_mvn<R: RngCore + ?Sized>(
    n: usize,
    sigma: &SymmetricMatrix,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let p = sigma.dim();
    let chol = sigma.cholesky()?;
    let l = chol.factor();
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut z = vec![0.0; p];
    for r in 0..n {
        for v in z.iter_mut() {
            *v = standard_normal(rng);
        }
        for i in 0..p {
            let mut s = 0.0;
            for k in 0..=i {
                s += l[(i, k)] * z[k];
            }
            x[(r, i)] = s;
        }
    }
    Ok(x)
}

/// `XᵀX` for an `n × p` data matrix.
pub fn gram(x: &DMatrix<f64>) -> SymmetricMatrix {
    let p = x.ncols();
    let n = x.nrows();
    SymmetricMatrix::from_fn(p, |i, j| (0..n).map(|r| x[(r, i)] * x[(r, j)]).sum())
}
