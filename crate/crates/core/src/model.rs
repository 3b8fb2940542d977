//! Chain parameters, end-bond coupling schedules, and the single-excitation
//! Hamiltonian they generate.
//!
//! The chain is an XXZ model of `n` qubits with hopping `J_xy`, Ising
//! anisotropy `J_z` and uniform field `B`. Total magnetization is conserved,
//! so a transfer run lives entirely in the span of the vacuum (all spins
//! down) and the `n` single-excitation basis states `|j>` (spin up at site
//! `j`). In that sector the Hamiltonian is a real symmetric tridiagonal
//! matrix whose first and last off-diagonal entries follow time-dependent
//! multiplier schedules.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stochastic::NoiseTrack;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("chain must have at least 2 sites, got {0}")]
    ChainTooShort(usize),
    #[error("j_xy must be positive, got {0}")]
    NonPositiveCoupling(f64),
    #[error("bond_disorder must have n-1 = {expected} entries, got {got}")]
    DisorderLength { expected: usize, got: usize },
    #[error("bond {index}: disorder multiplier 1 + r = {multiplier} is not positive")]
    DisorderNotPositive { index: usize, multiplier: f64 },
    #[error("ramp time constant tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("ramp exponent a must be positive, got {0}")]
    NonPositiveExponent(f64),
}

/// Static parameters of the qubit chain.
///
/// Site 1 is the sender and site `n` the receiver. `j_xy` sets the unit of
/// energy, so all times are in units of `1/j_xy`. `bond_disorder[i]` is the
/// multiplicative offset `r_i` of bond `i` (between sites `i+1` and `i+2`,
/// zero-indexed): the bond carries `j_xy * (1 + r_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    pub j_xy: f64,
    pub j_z: f64,
    pub b: f64,
    pub bond_disorder: Vec<f64>,
}

impl ChainSpec {
    pub fn new(
        n: usize,
        j_xy: f64,
        j_z: f64,
        b: f64,
        bond_disorder: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let spec = Self { n, j_xy, j_z, b, bond_disorder };
        spec.validate()?;
        Ok(spec)
    }

    /// Clean uniform chain with `j_xy = 1`, `j_z = b = 0`.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 2, "chain needs at least 2 sites");
        Self { n, j_xy: 1.0, j_z: 0.0, b: 0.0, bond_disorder: vec![0.0; n - 1] }
    }

    /// Same chain with a different disorder vector.
    pub fn with_disorder(&self, bond_disorder: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(self.n, self.j_xy, self.j_z, self.b, bond_disorder)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 2 {
            return Err(ModelError::ChainTooShort(self.n));
        }
        if !(self.j_xy > 0.0) {
            return Err(ModelError::NonPositiveCoupling(self.j_xy));
        }
        if self.bond_disorder.len() != self.n - 1 {
            return Err(ModelError::DisorderLength {
                expected: self.n - 1,
                got: self.bond_disorder.len(),
            });
        }
        for (index, r) in self.bond_disorder.iter().enumerate() {
            if !(1.0 + r > 0.0) {
                return Err(ModelError::DisorderNotPositive { index, multiplier: 1.0 + r });
            }
        }
        Ok(())
    }
}

/// Which one-sided limit to take when a schedule is evaluated exactly at one
/// of its discontinuities. Stage evaluations at integrator segment boundaries
/// use this so a jump never leaks into the wrong segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Below,
    Above,
}

/// Time-dependent multiplier `g(t)` applied to an end bond.
///
/// The physical coupling of the bond is `j_xy * (1 + r) * g(t)`. For an
/// `n = 2` chain the single bond is simultaneously first and last, and both
/// end multipliers apply to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CouplingSchedule {
    /// `g = 1` for all times.
    Static,
    /// Logistic turn-on: `g(t) = 1 / (1 + exp((t_i - t)/tau))`.
    FermiOn { t_i: f64, tau: f64 },
    /// Logistic turn-off: `g(t) = 1 / (1 + exp((t - t_f)/tau))`.
    FermiOff { t_f: f64, tau: f64 },
    /// Power-law turn-on: 0 for `t < 0`, `(t/tau)^a` on `[0, tau]`, then 1.
    PowerOn { tau: f64, a: f64 },
    /// Power-law turn-off: 1 for `t < t_f`, `((t_f - t)/tau + 1)^a` on
    /// `[t_f, t_f + tau]`, then 0.
    PowerOff { t_f: f64, tau: f64, a: f64 },
    /// Step turn-on: `g = 1` for `t >= t_i`.
    InstantOn { t_i: f64 },
    /// Step turn-off: `g = 1` for `t <= t_f`.
    InstantOff { t_f: f64 },
    /// `inner.g(t) * (1 + r(t))` with a stored piecewise-constant sample
    /// path `r(t)`.
    Noisy { inner: Box<CouplingSchedule>, track: NoiseTrack },
}

impl CouplingSchedule {
    /// The multiplier at time `t`. Total function of `(self, t)`; instant
    /// steps use the closed conventions `g = 1` for `t >= t_i` (on) and
    /// `t <= t_f` (off).
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::InstantOff { t_f } => {
                if t <= *t_f {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Noisy { inner, track } => inner.value(t) * (1.0 + track.value(t)),
            _ => self.value_sided(t, Side::Above),
        }
    }

    pub(crate) fn value_sided(&self, t: f64, side: Side) -> f64 {
        match self {
            Self::Static => 1.0,
            // 1/(1+exp(x)) saturates gracefully: exp overflow gives 0.
            Self::FermiOn { t_i, tau } => 1.0 / (1.0 + ((t_i - t) / tau).exp()),
            Self::FermiOff { t_f, tau } => 1.0 / (1.0 + ((t - t_f) / tau).exp()),
            Self::PowerOn { tau, a } => {
                if t < 0.0 {
                    0.0
                } else if t <= *tau {
                    (t / tau).powf(*a)
                } else {
                    1.0
                }
            }
            Self::PowerOff { t_f, tau, a } => {
                if t < *t_f {
                    1.0
                } else if t <= t_f + tau {
                    // (t_f - t)/tau + 1, clamped so cancellation at the ramp
                    // end cannot leak a negative base into powf.
                    (1.0 - (t - t_f) / tau).max(0.0).powf(*a)
                } else {
                    0.0
                }
            }
            Self::InstantOn { t_i } => {
                if t > *t_i || (t == *t_i && side == Side::Above) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::InstantOff { t_f } => {
                if t < *t_f || (t == *t_f && side == Side::Below) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Noisy { inner, track } => {
                inner.value_sided(t, side) * (1.0 + track.value_sided(t, side))
            }
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Self::Static | Self::InstantOn { .. } | Self::InstantOff { .. } => Ok(()),
            Self::FermiOn { tau, .. } | Self::FermiOff { tau, .. } => {
                if !(*tau > 0.0) {
                    Err(ModelError::NonPositiveTau(*tau))
                } else {
                    Ok(())
                }
            }
            Self::PowerOn { tau, a } | Self::PowerOff { tau, a, .. } => {
                if !(*tau > 0.0) {
                    Err(ModelError::NonPositiveTau(*tau))
                } else if !(*a > 0.0) {
                    Err(ModelError::NonPositiveExponent(*a))
                } else {
                    Ok(())
                }
            }
            Self::Noisy { inner, .. } => inner.validate(),
        }
    }

    /// Times in the open interval `(t0, t1)` where `g` or its derivative
    /// jumps. Integrators place hard step boundaries there.
    ///
    /// Power ramps with `a < 1` have an integrable derivative singularity at
    /// one end (`t = 0` going on, `t = t_f + tau` going off); those ends are
    /// refined geometrically so every integrator segment sees a bounded
    /// relative variation of `g`, and the innermost segment is too short to
    /// matter.
    pub(crate) fn breakpoints(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        const GRADE_LEVELS: u32 = 30;
        let mut push = |t: f64| {
            if t > t0 && t < t1 {
                out.push(t);
            }
        };
        match self {
            Self::Static | Self::FermiOn { .. } | Self::FermiOff { .. } => {}
            Self::PowerOn { tau, .. } => {
                push(0.0);
                for k in (1..=GRADE_LEVELS).rev() {
                    push(tau * 0.5f64.powi(k as i32));
                }
                push(*tau);
            }
            Self::PowerOff { t_f, tau, .. } => {
                push(*t_f);
                for k in 1..=GRADE_LEVELS {
                    push(t_f + tau * (1.0 - 0.5f64.powi(k as i32)));
                }
                push(t_f + tau);
            }
            Self::InstantOn { t_i } => push(*t_i),
            Self::InstantOff { t_f } => push(*t_f),
            Self::Noisy { inner, track } => {
                inner.breakpoints(t0, t1, out);
                track.breakpoints(t0, t1, out);
            }
        }
    }

    /// Time after which an off-ramp has fully decoupled its bond, if this
    /// schedule decouples at all. Logistic tails are cut at `t_f + 12 tau`
    /// (`g < 7e-6` there); power-law ramps reach zero exactly at `t_f + tau`.
    pub fn decoupling_completion(&self) -> Option<f64> {
        match self {
            Self::FermiOff { t_f, tau } => Some(t_f + 12.0 * tau),
            Self::PowerOff { t_f, tau, .. } => Some(t_f + tau),
            Self::InstantOff { t_f } => Some(*t_f),
            Self::Noisy { inner, .. } => inner.decoupling_completion(),
            _ => None,
        }
    }

    /// Ramp time constant of the schedule, if it has one.
    pub fn ramp_scale(&self) -> Option<f64> {
        match self {
            Self::FermiOn { tau, .. }
            | Self::FermiOff { tau, .. }
            | Self::PowerOn { tau, .. }
            | Self::PowerOff { tau, .. } => Some(*tau),
            Self::Noisy { inner, .. } => inner.ramp_scale(),
            Self::Static | Self::InstantOn { .. } | Self::InstantOff { .. } => None,
        }
    }
}

/// The single-excitation Hamiltonian of a chain plus its end-bond schedules.
///
/// At any time the matrix is real symmetric tridiagonal: `diag[j]` is the
/// on-site energy of `|j>` and bond `i` couples `|i>` to `|i+1>` with
/// strength `offdiag[i] = -j_xy (1 + r_i) g_i(t)` (the end multipliers act
/// on bonds 0 and n-2). The decoupled vacuum energy is carried alongside so
/// the vacuum amplitude can be propagated exactly.
#[derive(Debug, Clone)]
pub struct HamiltonianView {
    n: usize,
    diag: Vec<f64>,
    bulk_bonds: Vec<f64>,
    vacuum_energy: f64,
    sched_first: CouplingSchedule,
    sched_last: CouplingSchedule,
}

/// Assemble the sector Hamiltonian for a chain and its two end schedules.
pub fn build_hamiltonian(
    spec: &ChainSpec,
    sched_first: CouplingSchedule,
    sched_last: CouplingSchedule,
) -> Result<HamiltonianView, ModelError> {
    spec.validate()?;
    sched_first.validate()?;
    sched_last.validate()?;

    let n = spec.n;
    let nf = n as f64;
    // Evaluating the ZZ and field terms on |j>: site j touches 1 bond at the
    // ends, 2 in the bulk, and the field picks up the flipped spin.
    let diag: Vec<f64> = (0..n)
        .map(|j| {
            let boundary_bonds = if j == 0 || j == n - 1 { 1.0 } else { 2.0 };
            -spec.j_z * (nf - 1.0 - 2.0 * boundary_bonds) + spec.b * (nf - 2.0)
        })
        .collect();
    let vacuum_energy = -spec.j_z * (nf - 1.0) + spec.b * nf;
    let bulk_bonds: Vec<f64> =
        spec.bond_disorder.iter().map(|r| -spec.j_xy * (1.0 + r)).collect();

    Ok(HamiltonianView { n, diag, bulk_bonds, vacuum_energy, sched_first, sched_last })
}

impl HamiltonianView {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Energy of the all-down state.
    pub fn vacuum_energy(&self) -> f64 {
        self.vacuum_energy
    }

    pub fn sched_first(&self) -> &CouplingSchedule {
        &self.sched_first
    }

    pub fn sched_last(&self) -> &CouplingSchedule {
        &self.sched_last
    }

    /// The n-1 instantaneous bond couplings at time `t`.
    pub fn offdiag(&self, t: f64) -> Vec<f64> {
        let mut out = self.bulk_bonds.clone();
        self.scale_end_bonds(t, Side::Above, &mut out);
        out
    }

    fn scale_end_bonds(&self, t: f64, side: Side, bonds: &mut [f64]) {
        bonds[0] *= self.sched_first.value_sided(t, side);
        let last = self.n - 2;
        bonds[last] *= self.sched_last.value_sided(t, side);
    }

    /// Writes `out = -i H(t) c`, the Schroedinger right-hand side.
    pub(crate) fn derivative(&self, t: f64, side: Side, c: &[C64], out: &mut [C64]) {
        let n = self.n;
        debug_assert_eq!(c.len(), n);
        let g_first = self.sched_first.value_sided(t, side);
        let g_last = self.sched_last.value_sided(t, side);
        let bond = |i: usize| {
            let mut v = self.bulk_bonds[i];
            if i == 0 {
                v *= g_first;
            }
            if i == n - 2 {
                v *= g_last;
            }
            v
        };
        for j in 0..n {
            let mut acc = self.diag[j] * c[j];
            if j > 0 {
                acc += bond(j - 1) * c[j - 1];
            }
            if j < n - 1 {
                acc += bond(j) * c[j + 1];
            }
            out[j] = C64::new(acc.im, -acc.re); // -i * acc
        }
    }

    /// Discontinuity times of either end schedule inside `(t0, t1)`, sorted
    /// and deduplicated.
    pub(crate) fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        merged_breakpoints(&self.sched_first, &self.sched_last, t0, t1)
    }
}

pub(crate) fn merged_breakpoints(
    first: &CouplingSchedule,
    last: &CouplingSchedule,
    t0: f64,
    t1: f64,
) -> Vec<f64> {
    let mut pts = Vec::new();
    first.breakpoints(t0, t1, &mut pts);
    last.breakpoints(t0, t1, &mut pts);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps = 1e-12 * (t1 - t0).abs().max(1.0);
    pts.dedup_by(|a, b| (*a - *b).abs() < eps);
    pts
}
