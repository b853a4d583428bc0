//! Copulas, the Markov *-product, Sobolev norms and shuffle-based dependence measures.

pub mod affine;
pub mod dependence;
pub mod descriptor;
pub mod empirical;
pub mod engine;
pub mod error;
pub mod exchange;
pub mod grid;
pub mod interval;
pub mod io;
pub mod norms;
pub mod star;

pub use affine::{AffinePiece, PiecewiseAffineMap};
pub use dependence::{
    check_shuffle_invariance, omega, omega_from_norm_sq, omega_star_lower, DependenceReport, InvarianceReport,
    SearchOptions, TracePoint,
};
pub use descriptor::{Check, CopulaDescriptor, Parametric, Partial, ValidationReport};
pub use empirical::{checkerboard, pseudo_observations, EmpiricalCopula, PseudoObservations, SamplePairs};
pub use engine::{
    approx_by_shuffles, diagonalize, off_diagonal_mass, right_diagonalize, selfsimilar, sorting_shuffle, DiagonalStep,
    DiagonalizationTrace, ShuffleApproximation,
};
pub use error::{CopulaError, Result};
pub use exchange::{ExchangePiece, IntervalExchange, Segment, Slope};
pub use grid::GridCopula;
pub use interval::IntervalUnion;
pub use io::{descriptor_to_json, parse_descriptor, read_descriptor, write_descriptor, write_report};
pub use norms::{
    graph_l1_distance, inner_product, shuffle_dist_sq, sobolev_dist_sq, sobolev_norm_sq, DistReport, NormReport, Scheme,
};
pub use star::{shuffle_of, star, transpose, Exactness, Side, StarResult, DEFAULT_GRID};
