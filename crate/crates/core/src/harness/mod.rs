//! Verification and demonstration tools: finite-difference oracle, sparsity
//! statistics, RK4 integration and native C execution.

pub mod fd;
pub mod integrate;
pub mod native;
pub mod refeval;
pub mod stats;

pub use fd::{
    check_jacobian, check_jacobian_args, finite_difference_jacobian, FdError, JacobianReport, Step,
};
pub use integrate::{integrate, variational_initial, IntegrateError, Trajectory};
pub use stats::{report_stats, SparsityStats};
