//! Stage 1: power allocation coefficients for fixed beams and reflection.
//!
//! The rate of each user is replaced by the tight logarithmic lower bound of
//! [`sca`], the cluster EE ratio by its Dinkelbach parametric form, and the
//! resulting problem is solved through the closed-form Lagrangian maximiser
//! of [`pac`] with projected subgradient updates of the duals ([`dual`]).

pub mod dinkelbach;
pub mod dual;
pub mod pac;
pub mod sca;

pub use dinkelbach::{
    constraint_violation, dinkelbach_outer, is_feasible, minimal_power_allocation, Stage1State, Stage1TraceRecord,
};
pub use dual::{subgradient_update, ConstraintSlacks, StepSizes};
pub use pac::{closed_form_pac, stationary_pac, ClusterDuals, ClusterProblem, PacOutcome};
pub use sca::{sca_bound, ScaCoefficients};
