//! Monte Carlo functionals and diagnostics built on the engine.
//!
//! Every estimator simulates independent paths keyed by `path_index`,
//! collects the per-path results in index order and reduces them
//! sequentially, so reports do not depend on the worker count.

mod convergence;
mod gradient;
mod ibp;
mod krylov;
mod moments;
mod report;

pub use convergence::{family_convergence, holder_modulus, ConvergenceRow, ConvergenceTable, HolderRow, HolderTable};
pub use gradient::{bel_gradient, bel_gradient_with_limit, fd_gradient};
pub use ibp::{ibp_residual, BumpFunction, IbpBox, IbpStats};
pub use krylov::{krylov_check, CylinderFunction, KrylovReport, KrylovSpec};
pub use moments::{derivative_moment, flow_moment_bound_check, MomentBoundCheck, MomentBoundRow, MomentWindow};
pub use report::{format_number, run_paths, sample_stats, EstimateReport, McConfig, Payoff, PathTally, CSV_HEADER};
