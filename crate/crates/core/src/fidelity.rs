//! Bloch-sphere-averaged transfer fidelity and trace analysis.
//!
//! For an input `alpha|0> + beta|1>` on the sender, the receiver's reduced
//! density matrix is determined by the transfer amplitude `f` (receiver
//! amplitude) and the vacuum phase. Averaging the overlap with the input over
//! all pure input states gives, in closed form,
//!
//! ```text
//! F = 1/2 + |f|^2/6 + |f| cos(delta) / 3,      delta = arg f - arg vac
//! ```
//!
//! `phase_optimized` mode sets `cos(delta) = 1`, i.e. assumes the receiver
//! compensates the known relative phase. The closed form is cross-validated
//! against direct spherical quadrature in the oracle tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::{IntegratorConfig, SectorState};
use crate::model::{ChainSpec, CouplingSchedule};

/// Local maxima below `1/2 + 0.05` are treated as ripple, not transfer peaks.
pub const FIRST_MAX_THRESHOLD: f64 = 0.5 + 0.05;

/// Allowed variation of `|f|` over the tail of a trace for the state to
/// count as localized.
pub const STATIONARY_DRIFT_TOL: f64 = 1e-6;

/// Fraction of the trace, measured from its end, over which stationarity is
/// checked.
pub const STATIONARY_WINDOW_FRACTION: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum FidelityError {
    #[error("state norm is {norm:.6}, expected 1 (unnormalized states carry no fidelity)")]
    Unnormalized { norm: f64 },
    #[error("no fidelity maximum above {threshold} in the trace", threshold = FIRST_MAX_THRESHOLD)]
    NoMaximum,
    #[error("fidelity is not stationary: {0}")]
    NotStationary(String),
}

/// Which fidelity curve an analysis reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FidelityMode {
    /// Raw average; the relative phase enters through `cos(delta)`.
    Averaged,
    /// Phase-compensated average, monotone in `|f|`.
    PhaseOptimized,
}

/// One point of a fidelity trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelitySample {
    pub t: f64,
    /// `|f|`, the transfer-amplitude magnitude.
    pub f_abs: f64,
    /// `arg f - arg vac`, in `(-pi, pi]`.
    pub rel_phase: f64,
    /// Raw Bloch-sphere average.
    pub f_avg: f64,
    /// Phase-optimized average, in `[1/2, 1]`.
    pub f_opt: f64,
}

impl FidelitySample {
    pub(crate) fn from_state_unchecked(s: &SectorState) -> Self {
        let f = s.transfer_amplitude();
        let f_abs = f.norm();
        let mut rel_phase = if f_abs == 0.0 { 0.0 } else { (f * s.vac_phase.conj()).arg() };
        if rel_phase == -std::f64::consts::PI {
            rel_phase = std::f64::consts::PI;
        }
        let f_avg = 0.5 + f_abs * f_abs / 6.0 + f_abs * rel_phase.cos() / 3.0;
        let f_opt = 0.5 + f_abs * f_abs / 6.0 + f_abs / 3.0;
        Self { t: s.t, f_abs, rel_phase, f_avg, f_opt }
    }

    pub fn value(&self, mode: FidelityMode) -> f64 {
        match mode {
            FidelityMode::Averaged => self.f_avg,
            FidelityMode::PhaseOptimized => self.f_opt,
        }
    }
}

/// Closed-form averaged fidelity of a normalized sector state.
pub fn fidelity_of_state(s: &SectorState) -> Result<FidelitySample, FidelityError> {
    let norm = s.norm_sqr();
    if (norm - 1.0).abs() > 1e-6 || (s.vac_phase.norm() - 1.0).abs() > 1e-6 {
        return Err(FidelityError::Unnormalized { norm });
    }
    Ok(FidelitySample::from_state_unchecked(s))
}

/// Run parameters carried alongside a trace so any output can be
/// regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub spec: ChainSpec,
    pub sched_first: CouplingSchedule,
    pub sched_last: CouplingSchedule,
    pub integrator: IntegratorConfig,
}

/// Time-ordered fidelity samples of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityTrace {
    pub samples: Vec<FidelitySample>,
    pub meta: TraceMeta,
}

impl FidelityTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The first transfer peak of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstMaximum {
    pub t: f64,
    pub value: f64,
    /// Full width of the peak at `(value + 1/2) / 2`, clamped to the trace if
    /// a flank never drops that far.
    pub half_width: f64,
}

/// Headline numbers of a transfer run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub t_first_max: f64,
    pub f_first_max: f64,
    pub half_width: f64,
    /// Post-decoupling fidelity, absent when the trace never localizes.
    pub f_stationary: Option<f64>,
}

/// Locates the earliest strict local maximum of the selected curve above
/// `FIRST_MAX_THRESHOLD`, refined by a parabola through the three
/// surrounding samples.
pub fn first_maximum(
    trace: &FidelityTrace,
    mode: FidelityMode,
) -> Result<FirstMaximum, FidelityError> {
    let s = &trace.samples;
    let v = |i: usize| s[i].value(mode);
    for i in 1..s.len().saturating_sub(1) {
        if v(i) > v(i - 1) && v(i) > v(i + 1) && v(i) > FIRST_MAX_THRESHOLD {
            let (t, value) = parabolic_vertex(
                (s[i - 1].t, v(i - 1)),
                (s[i].t, v(i)),
                (s[i + 1].t, v(i + 1)),
            );
            let half_width = peak_width(s, i, value, mode);
            return Ok(FirstMaximum { t, value, half_width });
        }
    }
    Err(FidelityError::NoMaximum)
}

fn parabolic_vertex(l: (f64, f64), c: (f64, f64), r: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = l;
    let (x1, y1) = c;
    let (x2, y2) = r;
    let d01 = x1 - x0;
    let d12 = x1 - x2;
    let num = d01 * d01 * (y1 - y2) - d12 * d12 * (y1 - y0);
    let den = d01 * (y1 - y2) - d12 * (y1 - y0);
    if den.abs() < 1e-300 {
        return (x1, y1);
    }
    let xv = (x1 - 0.5 * num / den).clamp(x0.min(x2), x0.max(x2));
    // Lagrange interpolation at the vertex.
    let yv = y0 * (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1));
    (xv, yv.max(y1))
}

fn peak_width(s: &[FidelitySample], peak: usize, peak_value: f64, mode: FidelityMode) -> f64 {
    let level = (peak_value + 0.5) / 2.0;
    let v = |i: usize| s[i].value(mode);
    let mut left = s[0].t;
    for i in (0..peak).rev() {
        if v(i) <= level {
            let frac = (level - v(i)) / (v(i + 1) - v(i));
            left = s[i].t + frac * (s[i + 1].t - s[i].t);
            break;
        }
    }
    let mut right = s[s.len() - 1].t;
    for i in peak + 1..s.len() {
        if v(i) <= level {
            let frac = (level - v(i - 1)) / (v(i) - v(i - 1));
            right = s[i - 1].t + frac * (s[i].t - s[i - 1].t);
            break;
        }
    }
    right - left
}

/// Phase-optimized fidelity of the localized state after the last bond has
/// fully decoupled.
///
/// Requires the trace to extend past the schedule's completion time and `|f|`
/// to be flat (within `STATIONARY_DRIFT_TOL`) over the trace's final 5%.
pub fn stationary_fidelity(
    trace: &FidelityTrace,
    sched_last: &CouplingSchedule,
) -> Result<f64, FidelityError> {
    let completion = sched_last.decoupling_completion().ok_or_else(|| {
        FidelityError::NotStationary("the last-bond schedule never decouples".into())
    })?;
    let s = &trace.samples;
    if s.is_empty() {
        return Err(FidelityError::NotStationary("empty trace".into()));
    }
    let t_last = s[s.len() - 1].t;
    if t_last < completion {
        return Err(FidelityError::NotStationary(format!(
            "trace ends at t = {t_last:.3} before decoupling completes at {completion:.3}"
        )));
    }
    let t_first = s[0].t;
    let window_start = t_last - STATIONARY_WINDOW_FRACTION * (t_last - t_first);
    let tail = s.iter().filter(|p| p.t >= window_start);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in tail {
        lo = lo.min(p.f_abs);
        hi = hi.max(p.f_abs);
    }
    let drift = hi - lo;
    if drift > STATIONARY_DRIFT_TOL {
        return Err(FidelityError::NotStationary(format!(
            "|f| still varies by {drift:.2e} over the final trace window"
        )));
    }
    Ok(s[s.len() - 1].f_opt)
}

/// First-maximum data plus the stationary fidelity when the run localizes.
pub fn transfer_summary(
    trace: &FidelityTrace,
    mode: FidelityMode,
) -> Result<TransferSummary, FidelityError> {
    let peak = first_maximum(trace, mode)?;
    let f_stationary = match stationary_fidelity(trace, &trace.meta.sched_last) {
        Ok(v) => Some(v),
        Err(FidelityError::NotStationary(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(TransferSummary {
        t_first_max: peak.t,
        f_first_max: peak.value,
        half_width: peak.half_width,
        f_stationary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;

    fn state_with(f: C64, vac: C64) -> SectorState {
        let rest = (1.0 - f.norm_sqr()).max(0.0).sqrt();
        SectorState { t: 0.0, vac_phase: vac, amp: vec![C64::new(rest, 0.0), f] }
    }

    fn trace_from(values: &[(f64, f64)]) -> FidelityTrace {
        let samples = values
            .iter()
            .map(|&(t, f_opt)| {
                // Invert f_opt = 1/2 + x^2/6 + x/3 for the magnitude.
                let x = (-1.0 + (1.0 + 6.0 * (2.0 * f_opt - 1.0)).sqrt()) / 2.0;
                FidelitySample { t, f_abs: x, rel_phase: 0.0, f_avg: f_opt, f_opt }
            })
            .collect();
        FidelityTrace {
            samples,
            meta: TraceMeta {
                spec: ChainSpec::uniform(2),
                sched_first: CouplingSchedule::Static,
                sched_last: CouplingSchedule::Static,
                integrator: IntegratorConfig::default(),
            },
        }
    }

    #[test]
    fn no_arrival_means_coin_flip() {
        let s = state_with(C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        let f = fidelity_of_state(&s).unwrap();
        assert_eq!(f.f_avg, 0.5);
        assert_eq!(f.f_opt, 0.5);
    }

    #[test]
    fn perfect_transfer_in_phase() {
        let s = state_with(C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        let f = fidelity_of_state(&s).unwrap();
        assert!((f.f_avg - 1.0).abs() < 1e-15);
        assert!((f.f_opt - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adversarial_phase_point_nine() {
        // |f| = 0.9 with the worst phase: raw average dips below 1/2 and is
        // reported as-is.
        let s = state_with(C64::new(-0.9, 0.0), C64::new(1.0, 0.0));
        let f = fidelity_of_state(&s).unwrap();
        assert!((f.f_avg - 0.335).abs() < 1e-12);
        assert!((f.f_opt - 0.935).abs() < 1e-12);
        assert!((f.rel_phase.abs() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_state() {
        let s = SectorState {
            t: 0.0,
            vac_phase: C64::new(1.0, 0.0),
            amp: vec![C64::new(0.9, 0.0), C64::new(0.0, 0.0)],
        };
        assert!(matches!(
            fidelity_of_state(&s),
            Err(FidelityError::Unnormalized { .. })
        ));
    }

    #[test]
    fn first_maximum_on_synthetic_peak() {
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, 0.5 + 0.45 * (-(t - 3.0) * (t - 3.0)).exp())
            })
            .collect();
        let peak = first_maximum(&trace_from(&pts), FidelityMode::PhaseOptimized).unwrap();
        assert!((peak.t - 3.0).abs() < 1e-3);
        assert!((peak.value - 0.95).abs() < 1e-3);
        // Gaussian width at (0.95 + 0.5)/2: |t - 3| = sqrt(ln(0.45/0.225)).
        let expect = 2.0 * (2.0f64.ln()).sqrt();
        assert!((peak.half_width - expect).abs() < 0.05);
    }

    #[test]
    fn constant_trace_has_no_maximum() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 * 0.1, 0.5)).collect();
        assert_eq!(
            first_maximum(&trace_from(&pts), FidelityMode::PhaseOptimized),
            Err(FidelityError::NoMaximum)
        );
    }

    #[test]
    fn ripple_below_threshold_is_ignored() {
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, 0.52 + 0.01 * (5.0 * t).sin())
            })
            .collect();
        assert_eq!(
            first_maximum(&trace_from(&pts), FidelityMode::PhaseOptimized),
            Err(FidelityError::NoMaximum)
        );
    }

    #[test]
    fn static_schedule_is_never_stationary() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 * 0.1, 0.8)).collect();
        let trace = trace_from(&pts);
        assert!(matches!(
            stationary_fidelity(&trace, &CouplingSchedule::Static),
            Err(FidelityError::NotStationary(_))
        ));
    }

    #[test]
    fn short_trace_is_not_stationary() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 * 0.1, 0.8)).collect();
        let trace = trace_from(&pts);
        let sched = CouplingSchedule::FermiOff { t_f: 6.2, tau: 1.0 };
        assert!(matches!(
            stationary_fidelity(&trace, &sched),
            Err(FidelityError::NotStationary(_))
        ));
    }

    #[test]
    fn drifting_tail_is_not_stationary() {
        let pts: Vec<(f64, f64)> = (0..600)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, 0.7 + 1e-4 * t)
            })
            .collect();
        let trace = trace_from(&pts);
        let sched = CouplingSchedule::InstantOff { t_f: 10.0 };
        assert!(matches!(
            stationary_fidelity(&trace, &sched),
            Err(FidelityError::NotStationary(_))
        ));
    }

    proptest! {
        #[test]
        fn optimized_dominates_averaged(f in 0.0..1.0f64, phase in -3.1..3.1f64) {
            let s = state_with(C64::from_polar(f, phase), C64::new(1.0, 0.0));
            let fs = fidelity_of_state(&s).unwrap();
            prop_assert!(fs.f_opt >= fs.f_avg - 1e-15);
            prop_assert!((0.5..=1.0 + 1e-12).contains(&fs.f_opt));
        }

        #[test]
        fn optimized_is_strictly_monotone_in_magnitude(
            f1 in 0.0..0.999f64,
            bump in 1e-6..0.3f64,
        ) {
            let f2 = (f1 + bump).min(1.0);
            let s1 = state_with(C64::new(f1, 0.0), C64::new(1.0, 0.0));
            let s2 = state_with(C64::new(f2, 0.0), C64::new(1.0, 0.0));
            let v1 = fidelity_of_state(&s1).unwrap().f_opt;
            let v2 = fidelity_of_state(&s2).unwrap().f_opt;
            prop_assert!(v2 > v1);
        }

        #[test]
        fn equality_only_in_phase_or_at_zero(f in 0.001..1.0f64, phase in 0.01..3.13f64) {
            let s = state_with(C64::from_polar(f, phase), C64::new(1.0, 0.0));
            let fs = fidelity_of_state(&s).unwrap();
            prop_assert!(fs.f_opt > fs.f_avg);
        }
    }
}
