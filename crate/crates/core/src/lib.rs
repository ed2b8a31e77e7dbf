//! Exact-arithmetic engine for linear Dirac structures, graded brackets,
//! Courant algebroids and their formal deformation theory.

pub mod ratlin;
pub mod superalg;
pub mod brackets;

pub use ratlin::{MatrixQ, SubspaceQ, Q};
pub mod multilinear;
pub mod series;
pub mod lie_deform;
pub mod dirac_linear;
pub mod courant;
pub mod ihs;

pub use brackets::BracketContext;
pub use courant::{CourantInput, ThetaStructure};
pub use dirac_linear::LinearDirac;
pub use multilinear::MultiMap;
pub use series::FormalSeries;
pub use superalg::{GeneratorSet, SuperElement};

/// Version string embedded in every report.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
