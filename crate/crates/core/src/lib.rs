//! Local search for k-median and k-means clustering, together with tools to
//! measure how "stable" an instance is around a reference clustering.
//!
//! The crate is organised bottom-up:
//!
//! - [`instance`]: clients, facilities, the cost model and [`Solution`] bookkeeping.
//! - [`local_search`]: the multi-swap local search solver and its local-optimality
//!   certifier, plus [`lloyd`] as a k-means baseline.
//! - [`stability`]: distribution stability (β), spectral separation (γ), the
//!   OPT_k/OPT_{k-1} ratio, inner-ring structure reports and perturbation
//!   resilience checks.
//! - [`spectral`]: rank-m projection, JL embedding, ε-net candidate centers and the
//!   combined spectral pipeline.
//! - [`generators`], [`oracle`], [`lp`], [`experiment`]: synthetic instances,
//!   exact solvers, LP relaxation export and the experiment harness.

pub mod error;
pub mod experiment;
pub mod generators;
pub mod instance;
pub mod io;
pub mod linalg;
pub mod lloyd;
pub mod local_search;
pub mod lp;
pub mod oracle;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
pub use generators::{build_lb_instance, generate_gmm, GmmConfig, LbInstance};
pub use instance::{
    centroid_cost_decomposition, evaluate_cost, powered_triangle_check, Center, Instance,
    LabeledClustering, Point, Solution,
};
pub use lloyd::{lloyd, LloydOutcome};
pub use local_search::{
    find_improving_move, local_search, locally_optimal, ImprovementRule, Init, Move,
    SearchConfig, SearchTrace, Strategy,
};
pub use oracle::{branch_and_bound_opt, brute_force_opt, brute_force_opt_with_cap};
pub use stability::{
    measure_beta, measure_gamma, orss_ratio, resilience_falsifier, structure_report,
    verify_local_optima, PerturbationResult, StabilityReport, StructureReport,
};

/// Caps the global pool used by the parallel routines at `workers` threads.
/// Only the first call in a process has an effect; later calls return `false`.
pub fn configure_workers(workers: usize) -> bool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build_global()
        .is_ok()
}
