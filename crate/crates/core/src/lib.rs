//! Delay equations posed in `R^n x L2(-tau, 0)`.
//!
//! The crate provides a method-of-steps flow on a sampled history grid, its
//! exact linearization, volume and trace estimators, singular-value and
//! Lyapunov-dimension estimates, and frequency-domain tests for the scalar
//! Suarez-Schopf delayed oscillator.

pub mod dimension;
pub mod error;
pub mod hilbert;
pub mod integrator;
pub mod spectral;
pub mod suarez;
pub mod variational;

pub use dimension::{
    beta_numbers, check_trace_formula, check_trace_formula_with_frame, compatible_frame, discrete_generator, omega_d,
    omega_from_sigmas, singular_spectrum, squeezing_test, trace_on_span, trace_refinement, volume_k, w_orthonormalize,
    BetaReport, Derivative, RefinementRow, SingularSpectrum, SqueezingReport, TraceCheck, WeightedGram,
};
pub use error::{Error, Result};
pub use hilbert::{
    apply_functional, check_mes, e_norm, h_inner, mes_constant_delta, DelayModel, HState, HistoryGrid,
    LinearFunctional, MesReport, Nonlinearity, NonlinearityJacobian, PointMass,
};
pub use integrator::{check_ulip, evolve, evolve_fn, ulip_constants, Trajectory, UlipReport};
pub use spectral::{
    count_roots_in_box, count_roots_right_of, enumerate_roots, im_verdict, real_roots, region_sweep, spectral_scan,
    suarez_lambda, transfer_margin, CharFunction, ImVerdict, RegionCell, RegionGrid, SpectralScan, SuarezChar,
    TransferMargin, Verdict,
};
pub use suarez::{
    beta1_closed_form, check_absorbing, check_invariance, AbsorbingReport, Cutoff, InvarianceReport, SuarezModel,
};
pub use variational::{
    coord_weights, evolve_tangent, linear_semigroup_bound, quasi_differential, QuasiDifferential, SemigroupBound,
    TangentFlow, TangentFrame, TangentTrajectory,
};
