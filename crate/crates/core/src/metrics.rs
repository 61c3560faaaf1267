//! Edge-selection and estimation quality metrics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Edgewise comparison of an estimate against the truth.
pub fn confusion(g_hat: &UndirectedGraph, g_true: &UndirectedGraph) -> Result<ConfusionCounts> {
    if g_hat.p() != g_true.p() {
        return Err(Error::DimensionMismatch { expected: g_true.p(), found: g_hat.p() });
    }
    let p = g_true.p();
    let mut c = ConfusionCounts::default();
    for i in 0..p {
        for j in (i + 1)..p {
            match (g_hat.has_edge(i, j), g_true.has_edge(i, j)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub mcc: f64,
    /// Set when any ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

impl SelectionReport {
    pub const CSV_HEADER: &'static str = "precision,sensitivity,specificity,mcc";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.precision, self.sensitivity, self.specificity, self.mcc)
    }
}

pub fn selection_report(c: &ConfusionCounts) -> SelectionReport {
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let precision = ratio(tp, tp + fp);
    let sensitivity = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, den).clamp(-1.0, 1.0);
    SelectionReport { precision, sensitivity, specificity, mcc, degenerate }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixNorm {
    /// Maximum absolute column sum.
    L1,
    /// Largest singular value.
    Spectral,
    Frobenius,
    /// Largest absolute entry.
    Max,
}

impl MatrixNorm {
    pub const ALL: [MatrixNorm; 4] = [MatrixNorm::L1, MatrixNorm::Spectral, MatrixNorm::Frobenius, MatrixNorm::Max];
}

pub fn matrix_norm(m: &DMatrix<f64>, which: MatrixNorm) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match which {
        MatrixNorm::L1 => m
            .column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        MatrixNorm::Spectral => {
            let scale = m.amax();
            if scale == 0.0 {
                return 0.0;
            }
            let a = m / scale;
            let ata = a.transpose() * &a;
            let eig = SymmetricEigen::try_new(ata, 1e-14, 0).expect("symmetric eigendecomposition converges");
            eig.eigenvalues.max().max(0.0).sqrt() * scale
        }
        MatrixNorm::Frobenius => m.norm(),
        MatrixNorm::Max => m.amax(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

impl RelativeErrors {
    pub const CSV_HEADER: &'static str = "e1,e2,e3,e4";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.e1, self.e2, self.e3, self.e4)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.e1, self.e2, self.e3, self.e4]
    }
}

/// `‖Ω₀ - Ω̂‖ / ‖Ω₀‖` under the ℓ₁, spectral, Frobenius and max norms.
pub fn relative_errors(omega_hat: &DMatrix<f64>, omega0: &DMatrix<f64>) -> Result<RelativeErrors> {
    if omega_hat.shape() != omega0.shape() {
        return Err(Error::DimensionMismatch { expected: omega0.nrows(), found: omega_hat.nrows() });
    }
    let diff = omega0 - omega_hat;
    let rel = |w| matrix_norm(&diff, w) / matrix_norm(omega0, w);
    Ok(RelativeErrors {
        e1: rel(MatrixNorm::L1),
        e2: rel(MatrixNorm::Spectral),
        e3: rel(MatrixNorm::Frobenius),
        e4: rel(MatrixNorm::Max),
    })
}

/// Largest number of nonzero entries in any column, diagonal included.
pub fn max_column_support(omega: &DMatrix<f64>) -> usize {
    omega
        .column_iter()
        .map(|c| c.iter().filter(|&&v| v != 0.0).count())
        .max()
        .unwrap_or(0)
}
