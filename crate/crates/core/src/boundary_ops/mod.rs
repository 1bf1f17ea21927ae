//! Boundary representations and the kernel operators acting on them.

mod cylinder_fn;
mod galerkin;
mod negtype;
mod representation;

pub use cylinder_fn::CylinderFunction;
pub use galerkin::{
    degeneration_check, degeneration_rate, fast_apply, fast_apply_exact, fast_apply_table, galerkin,
    intertwine_defect_exact, intertwine_residual, kernel_form, log_form, log_form_exact, log_norm,
    structured_zero_mean_spectrum, zero_mean_spectrum, DegenerationPoint, Eigenspace, GalerkinForm, Kernel,
    KernelTable,
};
pub use negtype::{
    distance_matrix, negative_type_check, negative_type_check_points, NegativeTypeReport, NEGATIVE_TYPE_TOL,
};
pub use representation::{pi_one_exact, pi_s_apply, pi_s_apply_complex, pi_zero};
pub(crate) use representation::pulled_prefix;
