//! End-to-end transfer runs: sender excitation in, fidelity trace out.

use crate::evolve::{evolve, IntegratorConfig, SectorState};
use crate::fidelity::{FidelitySample, FidelityTrace, TraceMeta};
use crate::model::{build_hamiltonian, ChainSpec, CouplingSchedule};
use crate::Error;

/// Default trace window for first-maximum readout, in units of `1/j_xy`.
/// Long enough for the wavefront (speed ~ 2 j_xy) to arrive and the first
/// peak to fall off again.
pub fn default_window(spec: &ChainSpec) -> f64 {
    (2.0 * spec.n as f64).max(20.0) / spec.j_xy
}

/// Extra time past a schedule's decoupling completion before the stationary
/// readout. The logistic tail still moves `|f|` at the 1e-6 level right at
/// completion; four more time constants push the residual drift below the
/// stationarity tolerance.
pub fn stationary_margin(sched_last: &CouplingSchedule) -> f64 {
    match sched_last.ramp_scale() {
        Some(tau) => (4.0 * tau).max(1.0),
        None => 1.0,
    }
}

/// End time covering both the first maximum and, when the last bond
/// decouples, a settled stationary window.
pub fn suggested_t_end(spec: &ChainSpec, sched_last: &CouplingSchedule) -> f64 {
    let window = default_window(spec);
    match sched_last.decoupling_completion() {
        Some(tc) => window.max(tc + stationary_margin(sched_last)),
        None => window,
    }
}

/// Runs the transfer protocol from the sender excitation at `t = 0` and
/// records a fidelity sample at every integrator step.
pub fn run_transfer(
    spec: &ChainSpec,
    sched_first: CouplingSchedule,
    sched_last: CouplingSchedule,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<FidelityTrace, Error> {
    let h = build_hamiltonian(spec, sched_first.clone(), sched_last.clone())?;
    let initial = SectorState::sender_excitation(spec.n);
    let mut samples = Vec::new();
    evolve(&h, &initial, t_end, cfg, |s| {
        samples.push(FidelitySample::from_state_unchecked(s));
    })?;
    Ok(FidelityTrace {
        samples,
        meta: TraceMeta {
            spec: spec.clone(),
            sched_first,
            sched_last,
            integrator: *cfg,
        },
    })
}

/// `run_transfer` with the step size derived from the schedules and the
/// suggested end time.
pub fn run_transfer_auto(
    spec: &ChainSpec,
    sched_first: CouplingSchedule,
    sched_last: CouplingSchedule,
) -> Result<FidelityTrace, Error> {
    let cfg = IntegratorConfig::for_schedules(&[&sched_first, &sched_last]);
    let t_end = suggested_t_end(spec, &sched_last);
    run_transfer(spec, sched_first, sched_last, t_end, &cfg)
}
