//! Finite-alphabet machinery for sequential empirical coordination.
//!
//! The crate is organized around five concerns:
//!
//! - [`prob`]: exact discrete probability — distributions, Markov and
//!   directed kernels, strategic measures, entropies, mutual and directed
//!   information, conditional information densities.
//! - [`seminorm`]: worst-case test-function seminorms ‖P − Q‖ over the
//!   supported function classes (total variation, finite tables, cost level
//!   sets, bounded-Lipschitz balls), plus Kolmogorov–Smirnov and
//!   Wasserstein-1 distances computed by exact linear programming.
//! - [`solver`]: the sequential rate-distortion function for empirical
//!   coordination R_T(Δ), a grid-search oracle for it, the remote
//!   test-channel upper bound, and AWGN capacity bounds.
//! - [`tree`]: random tree codes — codebook sampling (eager and lazy),
//!   greedy typicality assignment, parameter choice, exact output entropy,
//!   and typical-set probability estimates.
//! - [`sim`]: end-to-end experiments measuring achieved distortion and
//!   output entropy of constructed codes against the solver reference.
//!
//! All logarithms are natural; rates and entropies are in nats.

pub mod acceptance;
pub mod error;
pub mod index;
pub mod prob;
pub mod rng;
pub mod seminorm;
pub mod sim;
mod simplex;
pub mod solver;
pub mod tree;

pub use error::{CoordError, Result};
pub use prob::{
    assemble_strategic_measure, directed_information, exact_entropy, info_density,
    mutual_information, relative_entropy, Alphabet, DirectedKernel, Distribution,
    InfoDensityTable, MarkovKernel, SourceLaw, StrategicMeasure,
};
pub use seminorm::{
    bounded_lipschitz, cost_pushforward, ks_distance, seminorm, wasserstein1, CostGrid,
    FunctionClass, MetricMatrix, SignedMeasure,
};
pub use sim::{
    converse_check, empirical_distribution, exact_code_distortion, run_experiment, BlockRecord,
    ConverseReport, EntropyMode, ExperimentConfig, ExperimentResult,
};
pub use solver::{
    awgn_capacity_avg, awgn_capacity_peak, feasibility_gap, kop_bound, solve_rate,
    solve_rate_bruteforce, uniform_lipschitz_holds, KopBound, PeakCapacity, PeakGrid, RdInstance,
    RdSolution, SolverOptions,
};
pub use tree::{
    assign, assign_traced, choose_parameters, choose_parameters_capped, exact_code_entropy,
    sample_codebook, typicality_probability, CodeParameters, CodeTree, MonteCarloEstimate,
    SequentialCode, TreeCodebook, TypicalSetSpec, VirtualTreeCode,
};

/// Probability vectors and joint tensors must sum to one within this.
pub const MASS_TOL: f64 = 1e-12;

/// Causality defect allowed in a strategic measure.
pub const CAUSALITY_TOL: f64 = 1e-10;
