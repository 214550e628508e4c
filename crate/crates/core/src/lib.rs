//! Discretized direct-integral histories and Zeno-type survival sweeps.
//!
//! A state is a sequence of small auxiliary-space vectors on a uniform time
//! grid. The crate provides the evolution combining per-slot unitaries with
//! translation, history chains of slot projectors with their decoherence
//! functional, and survival-probability sweeps showing that frequent steps
//! stabilize a history.

pub mod aux_algebra;
pub mod direct_integral;
pub mod error;
pub mod histories;
pub mod rng;
pub mod zeno;

pub use error::{Error, Result};

pub use aux_algebra::{
    hermitian_exponential, inner_product, random_hermitian, truncated_propagator, variance, AuxState,
    HermitianOperator, Projector, UnitaryOperator,
};
pub use direct_integral::{
    apply_generator, evolve_step, generator_relation_check, history_inner_product, integral_inner_product, Boundary,
    DirectIntegralState, GeneratorSpec, Stencil, TimeGrid,
};
pub use histories::{
    apply_chain, branch_resolution, consistency_check, decoherence_functional, evolve_chain, history_expectation,
    history_trace, intertwining_check, HistoryChain, HistoryDensity, HistoryEvaluator, HistoryIndex, HistoryObservable,
    ProjectionFamily,
};
pub use zeno::{
    make_schroedinger_path, schroedinger_residual, stationarity_check, survival_amplitude_exact,
    survival_amplitude_truncated, survival_probability_predicted, zeno_sweep, HamiltonianSpec, SlopeFit, StateSpec,
    ZenoConfig, ZenoRecord, ZenoSweep,
};
