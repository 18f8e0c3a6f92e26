//! SLOPE: least squares penalized by the sorted-L1 norm.

pub mod error;
pub mod isotonic;
pub mod sorted_l1;
pub mod weights;

pub use error::{Result, SlopeError};
pub use sorted_l1::{
    magnitude_order, majorizes, majorizes_within, prox_norm_bound_holds, prox_sorted_l1, prox_sorted_l1_with,
    sorted_l1_norm, sorted_magnitudes, ProxMethod, WeightVector,
};
pub mod linalg;
pub mod solver;

pub use linalg::Design;
pub use solver::{duality_gap, fit_reduced_slope, fit_slope, lasso_fit, ReducedSlopeFit, SlopeFit, SolverOptions};
pub mod check;
pub mod estimators;
pub mod simulation;
