//! Spectral scattering theory for the one-dimensional Schrödinger operator
//! `-d^2/dx^2 + V(x)` and cubic NLS simulation built on it: Jost functions,
//! transmission/reflection coefficients, the distorted Fourier transform and
//! its partial branches, transfer operators between flat and distorted vector
//! fields, split-step time integration, and wave-packet asymptotics.

pub mod dft;
pub mod diagnostics;
pub mod error;
pub mod fitting;
pub mod grid;
pub mod io;
pub mod jost;
pub mod potential;
pub mod propagator;

pub use dft::{
    adjoint_partial_dft, adjoint_wave_operator, dft_forward, dft_inverse, partial_dft,
    transfer_t0v, transfer_tv0, wave_operator, Branch, DistortedBasis, HalfLine,
};
pub use diagnostics::{
    apply_j0, apply_jv, compute_alpha, decomposition_residual, extract_modified_scattering,
    jv_norm, profile_consistency, weighted_local_sup, AlphaSnapshot, ModifiedScattering,
    WavePacket,
};
pub use error::{CoreError, Result};
pub use propagator::{
    evolve, linear_propagate, nonlinear_phase_step, DiagnosticSchedule, EvolveOutput,
    LinearBackend, NlsSign, SimulationState, SolverConfig,
};
pub use grid::{
    derivative_k, derivative_x, quad_integrate, BoundaryKind, ComplexField, FrequencyGrid, Parity,
    SpatialGrid,
};
pub use jost::{
    dirichlet_kernel, jost_x_derivative, scattering_coefficients, solve_jost, wronskian, JostData,
    ScatteringCoefficients,
};
pub use potential::{
    classify_genericity, decay_weights, eval_potential, DecayWeights, Genericity, PotentialFamily,
    PotentialSpec,
};
