//! Bayesian structure learning for decomposable Gaussian graphical models
//! under a hierarchical G-Wishart prior.

pub mod error;
pub mod graph;
pub mod io;
pub mod mcmc;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod search;
pub mod simulate;

pub use error::{Error, Result};
pub use graph::{EdgeMove, MoveKind, PerfectSequence, UndirectedGraph};
pub use mcmc::{ChainConfig, ChainResult, InitGraph, Kernel};
pub use model::{Dataset, GraphScore, Hyperparameters, ScalePreset};
pub use numerics::{RngState, SymmetricMatrix};
pub use search::{CandidateConfig, ModeSearchResult};
pub use simulate::{TrueModelSpec, Truth, TruthKind};
