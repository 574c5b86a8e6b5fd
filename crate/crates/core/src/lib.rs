//! Lagrange coded computing on Chebyshev nodes with a profiled worker pool:
//! encoding, DCT-code Byzantine decoding, leakage and localization metrics,
//! and the search for the evaluation indices handed to unreliable workers.
//!
//! Numerical code is generic over [`scalar::Scalar`]; the aliases below fix
//! it to `f64`. Use [`Wide`] when the noise-to-data ratio exceeds what
//! `f64` can resolve.

pub mod cheb;
pub mod error;
pub mod linalg;
pub mod scalar;
pub mod subsets;
pub mod codec;
pub mod worker;
pub mod decoder;
pub mod metrics;
pub mod assign;
pub mod sim;
pub mod config;
pub mod report;
pub mod experiments;

pub use assign::{ComplexityCounters, Method, SearchProblem, SearchResult, SearchTables};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use scalar::{Scalar, Wide};
pub use sim::{Precision, Scenario, TrialMode};
pub use subsets::IndexSet;

pub type Matrix = linalg::Mat<f64>;
pub type Grid = cheb::ChebyshevGrid<f64>;
pub type Basis = cheb::BasisTable<f64>;
pub type Poly = cheb::ChebPoly<f64>;
pub type Codeword = cheb::RealVectorCodeword<f64>;
pub type Dct = cheb::DctPlan<f64>;
pub type Syndromes = decoder::SyndromeVector<f64>;
pub type Locator = decoder::ErrorLocator<f64>;
pub type Shares = codec::SharesBundle<f64>;
