//! Shared scenario builders for the benchmark suite.

use chainwave_core::{ChainSpec, CouplingSchedule};

/// The ten-site clean chain used throughout the benchmarks.
pub fn ten_site_chain() -> ChainSpec {
    ChainSpec::uniform(10)
}

/// The reference logistic ramp pair.
pub fn fermi_pair(tau: f64, t_f: f64) -> (CouplingSchedule, CouplingSchedule) {
    (
        CouplingSchedule::FermiOn { t_i: 0.0, tau },
        CouplingSchedule::FermiOff { t_f, tau },
    )
}
