//! Simulation of quantum state transfer through a qubit chain whose first
//! and last bond couplings follow time-dependent ramp schedules.
//!
//! A single excitation injected at the sender site propagates under an XXZ
//! Hamiltonian; ramping the end bonds on the way in filters the wavepacket
//! and ramping the last bond off localizes the arrived state on the
//! receiver, where it keeps a higher fidelity than the static chain's
//! transient peak. The crate covers:
//!
//! - [`model`]: chain parameters, coupling schedules, and the
//!   single-excitation Hamiltonian.
//! - [`evolve`]: fixed-step fourth-order integration of the sector
//!   Schroedinger equation.
//! - [`fidelity`]: Bloch-averaged transfer fidelity, first-maximum and
//!   stationary readouts.
//! - [`transfer`]: end-to-end protocol runs.
//! - [`stochastic`]: seeded disorder and coupling-noise Monte Carlo
//!   ensembles.
//! - [`sweep`]: parameter grid scans and per-family optimization.
//! - [`oracle`]: brute-force full-Hilbert-space and quadrature references.

pub mod evolve;
pub mod fidelity;
pub mod model;
pub mod oracle;
pub mod stochastic;
pub mod sweep;
pub mod transfer;

use thiserror::Error;

pub use evolve::{convergence_check, evolve, EvolveError, IntegratorConfig, SectorState};
pub use fidelity::{
    fidelity_of_state, first_maximum, stationary_fidelity, transfer_summary, FidelityError,
    FidelityMode, FidelitySample, FidelityTrace, FirstMaximum, TraceMeta, TransferSummary,
};
pub use model::{build_hamiltonian, ChainSpec, CouplingSchedule, HamiltonianView, ModelError};
pub use oracle::{bloch_average_quadrature, full_space_evolve, full_space_fidelity_trace};
pub use stochastic::{
    disorder_ensemble, draw_disorder, fluctuation_ensemble, histogram, summary_stats,
    EnsembleReport, Histogram, NoiseTrack, SampleRecord, SummaryStats,
};
pub use sweep::{
    cell_summary, optimize_first_max, sweep_powerlaw, sweep_tau_tf, sweep_tau_tf_detailed,
    CellSummary, DetailedSweep, Optimum, PowerLawOptimum, SweepMatrix, SweepQuantity,
};
pub use transfer::{run_transfer, run_transfer_auto, suggested_t_end};

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Fidelity(#[from] FidelityError),
    #[error("{failed} of {total} ensemble samples failed (allowed: {limit})")]
    TooManyFailures { failed: usize, total: usize, limit: usize },
    #[error("fluctuation ensembles wrap logistic ramps; pass FermiOn/FermiOff schedules")]
    FluctuationNeedsFermi,
    #[error("parameter grid must be nonempty and strictly increasing")]
    BadGrid,
    #[error("power-law exponents must lie in [0.1, 1]")]
    ExponentOutOfRange,
    #[error("chain length {n} exceeds the full-space cap of {cap} qubits")]
    OracleTooLarge { n: usize, cap: usize },
}
