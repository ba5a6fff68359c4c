//! Soft-partition Gaussian RBF collocation for steady linear ODEs and PDEs.
//!
//! A partition of the domain into weighted intervals (or tensor blocks)
//! deterministically fixes Gaussian centers and widths. The PDE residual is
//! enforced at the centers, boundary data is added as weighted rows, and the
//! coefficients come from one dense least-squares solve. An outer Bayesian
//! optimizer can tune the partition lengths against a validation residual.

pub mod assembly;
pub mod bench;
pub mod cases;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod kernel;
mod pivoted_qr;
pub mod problem;
pub mod sampling;
pub mod solver;
pub mod tuner;

pub use assembly::{assemble, LeastSquaresSystem, RowTag};
pub use bench::{run_all, run_case, spectra_report, CaseConfig, CaseReport, SpectraReport};
pub use cases::{builtin_case, builtin_problem, BuiltinCase, CaseId, CaseSettings, ExactSolution};
pub use error::{Error, Result};
pub use geometry::{
    clip_centers, extract_boundary, flower_sdf, pde_weight, Boundary, FlowerParams, RampKind, SdfField, SdfWeightParams,
};
pub use kernel::{fourier_magnitude, gauss_deriv_1d, gauss_partial_2d, MultiIndex};
pub use problem::{
    apply_operator, BoundaryConstraint, Coefficient, ConstraintKind, LinearOperator, OperatorTerm, ProblemSpec,
    ScalarField,
};
pub use sampling::{
    partition_boundaries, sample_1d, sample_2d, softmax_lengths, CenterTag, Dimension, DomainBounds, PartitionSpec1D,
    PartitionSpec2D, SampledBasis,
};
pub use solver::{error_metrics, evaluate_solution, solve, ErrorMetrics, SolveMethod, SolveOptions, SolveReport};
pub use tuner::{
    expected_improvement, optimize, optimize_case, BoOutcome, BoRecord, BoTrace, GpSurrogate, SearchSpace,
    ValidationObjective,
};
