//! Fixed-step integration of `i dc/dt = H(t) c` in the single-excitation
//! sector.
//!
//! The integrator is classical fourth-order Runge-Kutta with midpoint
//! evaluations of the time-dependent Hamiltonian; the order is fixed. All
//! schedule discontinuities (instant steps, power-law kinks, noise-step
//! edges) become hard step boundaries, so every step sees a smooth `H(t)`
//! and the method keeps its full order. The decoupled vacuum amplitude is
//! advanced analytically as `exp(-i E_g (t - t0))`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CouplingSchedule, HamiltonianView, Side};
use crate::stochastic::NOISE_STEP_FACTOR;

/// Base step size in units of `1/j_xy`; resolves the fastest coherent
/// oscillation (frequencies up to `2 j_xy`) with plenty of margin.
pub const BASE_DT: f64 = 5e-3;

/// Default allowed drift of the amplitude norm over a full run.
pub const DEFAULT_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum EvolveError {
    #[error("norm drifted by {drift:.3e} at t = {t:.6} (tolerance {tol:.1e}); reduce dt")]
    NormDrift { t: f64, drift: f64, tol: f64 },
    #[error("t_end = {t_end} precedes the state time t = {t0}")]
    TimeReversed { t0: f64, t_end: f64 },
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("norm tolerance must be positive, got {0}")]
    NonPositiveTol(f64),
}

/// The evolving sector state: exact vacuum phase plus the `n` complex
/// amplitudes on the single-excitation basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    pub t: f64,
    /// Amplitude factor of the all-down state; unit modulus.
    pub vac_phase: C64,
    pub amp: Vec<C64>,
}

impl SectorState {
    /// Excitation on site 1 at `t = 0`, the standard transfer input.
    pub fn sender_excitation(n: usize) -> Self {
        assert!(n >= 2);
        let mut amp = vec![C64::new(0.0, 0.0); n];
        amp[0] = C64::new(1.0, 0.0);
        Self { t: 0.0, vac_phase: C64::new(1.0, 0.0), amp }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Amplitude on the receiver site.
    pub fn transfer_amplitude(&self) -> C64 {
        *self.amp.last().expect("state has at least two sites")
    }
}

/// Step size and norm guard for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub norm_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: BASE_DT, norm_tol: DEFAULT_NORM_TOL }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, norm_tol: f64) -> Result<Self, EvolveError> {
        if !(dt > 0.0) {
            return Err(EvolveError::NonPositiveStep(dt));
        }
        if !(norm_tol > 0.0) {
            return Err(EvolveError::NonPositiveTol(norm_tol));
        }
        Ok(Self { dt, norm_tol })
    }

    pub fn with_dt(dt: f64) -> Result<Self, EvolveError> {
        Self::new(dt, DEFAULT_NORM_TOL)
    }

    /// Shrinks the base step to resolve the finest feature of the given
    /// schedules: `min(BASE_DT, 0.036 tau / 4)` over all ramped variants,
    /// i.e. a quarter of the noise step width a ramp of scale `tau` carries.
    pub fn for_schedules(schedules: &[&CouplingSchedule]) -> Self {
        let mut dt = BASE_DT;
        for s in schedules {
            if let Some(tau) = s.ramp_scale() {
                dt = dt.min(NOISE_STEP_FACTOR * tau / 4.0);
            }
        }
        Self { dt, norm_tol: DEFAULT_NORM_TOL }
    }

    fn halved(self) -> Self {
        Self { dt: self.dt / 2.0, ..self }
    }
}

/// Splits `[t0, t1]` at the given discontinuities and tiles every piece with
/// an integer number of uniform steps of size at most `dt`. Returns the step
/// edges including both endpoints.
pub(crate) fn step_edges(t0: f64, t1: f64, breakpoints: &[f64], dt: f64) -> Vec<f64> {
    let mut edges = vec![t0];
    let mut start = t0;
    for &b in breakpoints.iter().chain(std::iter::once(&t1)) {
        let len = b - start;
        if len <= 0.0 {
            continue;
        }
        let steps = (len / dt).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        for k in 1..steps {
            edges.push(start + k as f64 * h);
        }
        edges.push(b);
        start = b;
    }
    edges
}

/// Integrates the state to `t_end`, invoking `observer` on the initial state
/// and after every accepted step. Fails if the amplitude norm drifts from its
/// initial value by more than `cfg.norm_tol` at any step.
pub fn evolve<F>(
    h: &HamiltonianView,
    initial: &SectorState,
    t_end: f64,
    cfg: &IntegratorConfig,
    mut observer: F,
) -> Result<SectorState, EvolveError>
where
    F: FnMut(&SectorState),
{
    if !(cfg.dt > 0.0) {
        return Err(EvolveError::NonPositiveStep(cfg.dt));
    }
    if !(cfg.norm_tol > 0.0) {
        return Err(EvolveError::NonPositiveTol(cfg.norm_tol));
    }
    let t0 = initial.t;
    if t_end < t0 {
        return Err(EvolveError::TimeReversed { t0, t_end });
    }

    let mut state = initial.clone();
    observer(&state);
    if t_end == t0 {
        return Ok(state);
    }

    let n = h.n();
    let norm0 = state.norm_sqr();
    let vac0 = state.vac_phase;
    let e_g = h.vacuum_energy();

    let edges = step_edges(t0, t_end, &h.breakpoints(t0, t_end), cfg.dt);
    let mut k1 = vec![C64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut work = k1.clone();

    for w in edges.windows(2) {
        let (ts, te) = (w[0], w[1]);
        let hs = te - ts;
        let tm = 0.5 * (ts + te);

        h.derivative(ts, Side::Above, &state.amp, &mut k1);
        for j in 0..n {
            work[j] = state.amp[j] + 0.5 * hs * k1[j];
        }
        h.derivative(tm, Side::Above, &work, &mut k2);
        for j in 0..n {
            work[j] = state.amp[j] + 0.5 * hs * k2[j];
        }
        h.derivative(tm, Side::Above, &work, &mut k3);
        for j in 0..n {
            work[j] = state.amp[j] + hs * k3[j];
        }
        h.derivative(te, Side::Below, &work, &mut k4);
        for j in 0..n {
            state.amp[j] += hs / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }

        state.t = te;
        state.vac_phase = vac0 * C64::from_polar(1.0, -e_g * (te - t0));

        let drift = (state.norm_sqr() - norm0).abs();
        if drift > cfg.norm_tol {
            return Err(EvolveError::NormDrift { t: te, drift, tol: cfg.norm_tol });
        }
        observer(&state);
    }
    Ok(state)
}

/// Runs the same evolution with `dt` and `dt/2` and returns the maximum
/// amplitude discrepancy at `t_end`. Certifies that `dt` is converged.
pub fn convergence_check(
    h: &HamiltonianView,
    initial: &SectorState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, EvolveError> {
    let coarse = evolve(h, initial, t_end, cfg, |_| {})?;
    let fine = evolve(h, initial, t_end, &cfg.halved(), |_| {})?;
    Ok(coarse
        .amp
        .iter()
        .zip(&fine.amp)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, ChainSpec, CouplingSchedule};

    fn static_chain(n: usize) -> HamiltonianView {
        build_hamiltonian(
            &ChainSpec::uniform(n),
            CouplingSchedule::Static,
            CouplingSchedule::Static,
        )
        .unwrap()
    }

    #[test]
    fn two_site_transfer_matches_closed_form() {
        // H = -X in the sector, so amp(t) = (cos t, i sin t).
        let h = static_chain(2);
        let init = SectorState::sender_excitation(2);
        let cfg = IntegratorConfig::default();
        let mut worst = 0.0f64;
        let end = evolve(&h, &init, std::f64::consts::FRAC_PI_2, &cfg, |s| {
            let exact0 = C64::new(s.t.cos(), 0.0);
            let exact1 = C64::new(0.0, s.t.sin());
            worst = worst.max((s.amp[0] - exact0).norm()).max((s.amp[1] - exact1).norm());
        })
        .unwrap();
        assert!(worst < 1e-8, "worst deviation {worst:.2e}");
        assert!((end.transfer_amplitude().norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn three_site_transfer_matches_eigendecomposition() {
        // Transfer amplitude of the uniform 3-chain: (cos(sqrt(2) t) - 1)/2.
        let h = static_chain(3);
        let init = SectorState::sender_excitation(3);
        let cfg = IntegratorConfig::default();
        let t_end = std::f64::consts::PI / 2.0f64.sqrt();
        let mut worst = 0.0f64;
        let end = evolve(&h, &init, t_end, &cfg, |s| {
            let exact = ((2.0f64.sqrt() * s.t).cos() - 1.0) / 2.0;
            worst = worst.max((s.amp[2] - C64::new(exact, 0.0)).norm());
        })
        .unwrap();
        assert!(worst < 1e-8, "worst deviation {worst:.2e}");
        assert!((end.amp[2] - C64::new(-1.0, 0.0)).norm() < 1e-8);
        assert!((end.transfer_amplitude().norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn decoupled_sender_only_accumulates_phase() {
        let spec = ChainSpec::new(2, 1.0, 0.3, 0.2, vec![0.0]).unwrap();
        let h = build_hamiltonian(
            &spec,
            CouplingSchedule::InstantOff { t_f: -1.0 },
            CouplingSchedule::InstantOff { t_f: -1.0 },
        )
        .unwrap();
        let init = SectorState::sender_excitation(2);
        let t_end = 5.0;
        let end = evolve(&h, &init, t_end, &IntegratorConfig::default(), |_| {}).unwrap();
        assert!((end.amp[0].norm() - 1.0).abs() < 1e-12);
        assert!(end.amp[1].norm() < 1e-12);
        let expected = C64::from_polar(1.0, -h.diag()[0] * t_end);
        assert!((end.amp[0] - expected).norm() < 1e-8);
        let vac_expected = C64::from_polar(1.0, -h.vacuum_energy() * t_end);
        assert!((end.vac_phase - vac_expected).norm() < 1e-12);
    }

    #[test]
    fn norm_is_conserved_along_the_run() {
        let h = static_chain(10);
        let init = SectorState::sender_excitation(10);
        let mut worst = 0.0f64;
        evolve(&h, &init, 20.0, &IntegratorConfig::default(), |s| {
            worst = worst.max((s.norm_sqr() - 1.0).abs());
        })
        .unwrap();
        assert!(worst < 1e-8, "norm drift {worst:.2e}");
    }

    #[test]
    fn vacuum_phase_stays_unit_modulus() {
        let spec = ChainSpec::new(4, 1.0, 0.7, -0.4, vec![0.0; 3]).unwrap();
        let h = build_hamiltonian(&spec, CouplingSchedule::Static, CouplingSchedule::Static)
            .unwrap();
        let init = SectorState::sender_excitation(4);
        let mut worst = 0.0f64;
        evolve(&h, &init, 12.0, &IntegratorConfig::default(), |s| {
            worst = worst.max((s.vac_phase.norm() - 1.0).abs());
        })
        .unwrap();
        assert!(worst < 1e-12);
    }

    #[test]
    fn convergence_check_static_chain() {
        let h = static_chain(10);
        let init = SectorState::sender_excitation(10);
        let d = convergence_check(&h, &init, 20.0, &IntegratorConfig::with_dt(0.01).unwrap())
            .unwrap();
        assert!(d < 1e-7, "discrepancy {d:.2e}");

        let h2 = static_chain(2);
        let init2 = SectorState::sender_excitation(2);
        let d2 = convergence_check(
            &h2,
            &init2,
            std::f64::consts::FRAC_PI_2,
            &IntegratorConfig::with_dt(0.001).unwrap(),
        )
        .unwrap();
        assert!(d2 < 1e-10, "discrepancy {d2:.2e}");
    }

    #[test]
    fn single_giant_step_flags_nonconvergence() {
        let h = static_chain(3);
        let init = SectorState::sender_excitation(3);
        let t_end = std::f64::consts::PI / 2.0f64.sqrt();
        let cfg = IntegratorConfig { dt: t_end, norm_tol: 1e-8 };
        match convergence_check(&h, &init, t_end, &cfg) {
            Err(EvolveError::NormDrift { .. }) => {}
            Ok(d) => assert!(d > 1e-2, "single-step run should be visibly off, got {d:.2e}"),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn fourth_order_convergence_rate() {
        // Error vs a dt/8 reference must shrink by >= 8x when dt halves.
        let h = static_chain(10);
        let init = SectorState::sender_excitation(10);
        let t_end = 5.0;
        let run = |dt: f64| {
            let cfg = IntegratorConfig { dt, norm_tol: 1e-2 };
            evolve(&h, &init, t_end, &cfg, |_| {}).unwrap().amp
        };
        let reference = run(0.01);
        let err = |amp: &[C64]| -> f64 {
            amp.iter().zip(&reference).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        };
        let e1 = err(&run(0.08));
        let e2 = err(&run(0.04));
        assert!(e1 > 1e-9, "coarse error too small to measure: {e1:.2e}");
        assert!(e1 / e2 >= 8.0, "convergence factor {:.2}", e1 / e2);
    }

    #[test]
    fn evolution_is_linear() {
        let h = static_chain(6);
        let cfg = IntegratorConfig::default();
        let mut a = SectorState::sender_excitation(6);
        a.amp[3] = C64::new(0.0, 0.4);
        let mut b = SectorState::sender_excitation(6);
        b.amp[0] = C64::new(0.0, 0.0);
        b.amp[5] = C64::new(0.7, -0.1);
        let alpha = C64::new(0.3, 0.7);
        let beta = C64::new(-0.2, 0.45);
        let mut combo = SectorState::sender_excitation(6);
        for j in 0..6 {
            combo.amp[j] = alpha * a.amp[j] + beta * b.amp[j];
        }
        let ea = evolve(&h, &a, 4.0, &cfg, |_| {}).unwrap();
        let eb = evolve(&h, &b, 4.0, &cfg, |_| {}).unwrap();
        let ec = evolve(&h, &combo, 4.0, &cfg, |_| {}).unwrap();
        for j in 0..6 {
            let expect = alpha * ea.amp[j] + beta * eb.amp[j];
            assert!((ec.amp[j] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_reversed_time_and_bad_config() {
        let h = static_chain(3);
        let init = SectorState::sender_excitation(3);
        assert!(matches!(
            evolve(&h, &init, -1.0, &IntegratorConfig::default(), |_| {}),
            Err(EvolveError::TimeReversed { .. })
        ));
        assert!(matches!(
            evolve(&h, &init, 1.0, &IntegratorConfig { dt: 0.0, norm_tol: 1e-8 }, |_| {}),
            Err(EvolveError::NonPositiveStep(_))
        ));
        assert!(IntegratorConfig::new(0.01, -1.0).is_err());
    }

    #[test]
    fn step_edges_respect_breakpoints() {
        let edges = step_edges(0.0, 1.0, &[0.305], 0.1);
        assert_eq!(edges.first(), Some(&0.0));
        assert_eq!(edges.last(), Some(&1.0));
        assert!(edges.contains(&0.305));
        for w in edges.windows(2) {
            assert!(w[1] - w[0] <= 0.1 + 1e-12);
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn for_schedules_tracks_finest_ramp() {
        let fast = CouplingSchedule::FermiOff { t_f: 6.2, tau: 0.325 };
        let cfg = IntegratorConfig::for_schedules(&[&CouplingSchedule::Static, &fast]);
        assert!((cfg.dt - 0.036 * 0.325 / 4.0).abs() < 1e-15);
        let slow = CouplingSchedule::FermiOn { t_i: 0.0, tau: 1.0 };
        let cfg2 = IntegratorConfig::for_schedules(&[&slow]);
        assert_eq!(cfg2.dt, BASE_DT);
    }
}
