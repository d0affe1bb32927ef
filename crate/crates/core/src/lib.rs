//! Numerical laboratory for stochastic flows of diffeomorphisms acting on
//! differential forms.
//!
//! The crate integrates Stratonovich systems together with their tangent
//! flows, integrates time-dependent forms over advected simplices by
//! positive-weight quadrature, and verifies — pathwise on a fixed noise
//! realization and statistically over ensembles — the change-of-variables
//! identity for forms, the stochastic transport theorem, the
//! expectation-derivative formula and the induced continuity system, with
//! a dedicated treatment of divergence-free Fourier fields on the flat
//! 2-torus.

pub mod brownian;
pub mod corpus;
pub mod error;
pub mod flow;
pub mod forms;
pub mod la;
pub mod quadrature;
pub mod stochastic;
pub mod torus;
pub mod verify;

pub use brownian::{derive_seed, refine_brownian, sample_brownian, BrownianPath};
pub use error::{Error, Result};
pub use flow::{integrate_ensemble, integrate_flow, FlowEnsemble, FlowTrajectory, SdeSystem};
pub use forms::{
    divergence, evaluate_form, exterior_derivative, interior_product, lie_derivative,
    lie_derivative_squared, pullback_value, scalar_times_field, Point, ScalarField, TimeForm,
    TimeVectorField, VolumeForm,
};
pub use quadrature::{
    chain_integrate, frame_states, integrate_form, integrate_pulled_form, standard_rule,
    ChainEntry, NodeState, QuadratureRule, Simplex,
};
pub use stochastic::{
    ito_integral, quadratic_covariation, stratonovich_integral, time_integral, RealPath,
};
pub use torus::{
    angle_grid, canonicalize_angles, check_divergence_free, density_constancy_experiment,
    fourier_field_a, fourier_field_b, ConstancyOutcome, ConstancyReport, DivergenceReport,
    FourierMode,
};
pub use verify::{
    continuity_residual, expectation_derivative_check, fubini_commutation_gap, integrand_path,
    identity_shapes_rhs_gap, martingale_check, mass_covariation_with_driver, transport_residual,
    verify_ito_identity_ito, verify_ito_identity_stratonovich, ContinuityReport, EnsembleParams,
    ExpectationCheckpoint, ExpectationReport, MartingaleCheckpoint, MartingaleReport,
    ResidualReport, TermValue,
};
