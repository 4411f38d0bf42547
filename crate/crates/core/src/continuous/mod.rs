//! Continuous-time limit: the a priori hierarchy and its jump (counting) and
//! diffusive (homodyne) unravelings.

pub mod diffusive;
pub mod hierarchy;
pub mod jump;
mod kernel;
pub mod monte_carlo;

pub use diffusive::{
    diffusion_coefficients, diffusive_step, homodyne_rate, simulate_diffusive_trajectory,
    simulate_diffusive_trajectory_with, DiffusivePath, DiffusiveSimulator,
};
pub use hierarchy::{integrate_master, master_derivative, Hierarchy, HierarchyOperators, MasterPath};
pub use jump::{
    jump_intensity, jump_update, no_jump_drift, no_jump_flow, no_jump_step, simulate_jump_trajectory,
    simulate_jump_trajectory_with, JumpPath, JumpSimulator, StepOptions,
};
pub use monte_carlo::{monte_carlo_average, McSummary, Unraveling};
