//! Simulation and verification primitives for linearly coupled temporal networks.
//!
//! The crate models networks of heterogeneous, time-dependent agents
//!
//! ```text
//! x_i' = f_i(t, x_i) + c * sum_k a_ik(t) (x_k - x_i)
//! ```
//!
//! where the weights `a_ik(t)` may be negative and may switch in time. On top of
//! a fixed-step / adaptive Runge-Kutta integrator it builds the linear
//! comparison system that dominates the vector of squared pairwise errors
//! `xi_ij = |x_i - x_j|^2`, and evaluates the row-dominance certificates for
//! full-network and cluster synchronization, coupling thresholds for static
//! networks and sufficient conditions for the existence of attracting
//! trajectories.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, scenarios and the
//! command line front end live in the `tempsync` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attractor;
pub mod certificate;
pub mod comparison;
pub mod integrator;
pub mod matrix;
pub mod model;
pub mod window;

pub use attractor::{
    coupled_comparison_check, coupled_comparison_matrix, dissipativity_from_onesided, fit_sl2_envelope, pullback_trajectory,
    ultimate_bound, AttractorError, CoupledComparison, Dissipativity, PullbackEstimate,
    Sl2Envelope,
};
pub use certificate::{
    certificate_grid, check_cluster_sync, check_full_sync, combined_mu, margins_from,
    persistence_margins, refined_bounds, static_hypothesis, static_threshold, suggest_bound_m,
    CertError, CertParams, ClusterCertificate, Condition, PersistenceMargins, RefinedBounds,
    SyncCertificate, Verdict,
};
pub use comparison::{
    comparison_solve, dominance_decay_check, eta, evaluate_comparison, ComparisonSample,
    ComparisonSystem, DecayCheck,
};
pub use integrator::{
    coupled_rhs, integrate, pairwise_errors, solve, CoupledRhs, ErrorSeries, IntegrationError, Method,
    NumericError, Provenance, Solution, SolverConfig, Trajectory,
};
pub use matrix::Matrix;
pub use model::{
    build_switching_schedule, pair_bounds_for_identical_nodes, pair_count, pair_index, pairs,
    sample_adjacency, AdjacencySchedule, ClusterSpec, Extension, ModelError, NetworkSystem,
    NodeDynamics, PairBoundSet, Piece,
};
pub use window::{compute_mu1, compute_mu1_on, compute_mu2, sliding_window_sup, WindowGrid};
