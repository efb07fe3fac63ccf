//! Physical model: parameters, dissipation, forcing, right-hand side and the
//! Galerkin reduction.

pub mod dissipation;
pub mod forcing;
pub mod galerkin;
pub mod params;
pub mod rhs;
pub mod state;

pub use dissipation::{
    dissipation_eval, validate_h2, validate_kc, DissipationKind, DissipationSpec, H2Report,
    KcReport,
};
pub use forcing::{Forcing, ForcingTarget, ForcingTerm, GriddedForcing, Shape, TrigPoly};
pub use galerkin::{build_galerkin_basis, GalerkinBasis};
pub use params::MaterialParams;
pub use rhs::{induction_term, lorentz_force, rhs, rhs_with_sources};
pub use state::State;
