//! Grid scans over ramp parameters and per-exponent optimization of the
//! power-law family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fidelity::{
    first_maximum, stationary_fidelity, FidelityError, FidelityMode, FirstMaximum,
};
use crate::model::{ChainSpec, CouplingSchedule};
use crate::transfer::{run_transfer, suggested_t_end};
use crate::evolve::IntegratorConfig;
use crate::Error;

/// Default scan ranges for the logistic ramps.
pub const DEFAULT_TAU_RANGE: (f64, f64) = (0.05, 2.0);
pub const DEFAULT_TF_RANGE: (f64, f64) = (4.0, 9.0);

/// Smallest ramp constant a refinement probe may propose.
const TAU_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepQuantity {
    /// Post-decoupling fidelity of the localized state.
    Stationary,
    /// Height of the first fidelity maximum.
    FirstMax,
}

/// Values on a `tau x t_f` grid, row-major in `tau`. Cells whose run has no
/// peak or never localizes are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMatrix {
    pub tau: Vec<f64>,
    pub tf: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl SweepMatrix {
    pub fn get(&self, i_tau: usize, i_tf: usize) -> Option<f64> {
        self.values[i_tau * self.tf.len() + i_tf]
    }

    /// Largest present value with its grid position.
    pub fn max_cell(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.tau.len() {
            for j in 0..self.tf.len() {
                if let Some(v) = self.get(i, j) {
                    if best.map_or(true, |(_, _, b)| v > b) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        best
    }
}

/// Both per-cell quantities of one ramped run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub first_max: Option<f64>,
    pub stationary: Option<f64>,
}

fn validate_grid(grid: &[f64]) -> Result<(), Error> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid);
    }
    Ok(())
}

/// Runs one cell and extracts both quantities; `NoMaximum`/`NotStationary`
/// become `None`, anything else is fatal.
pub fn cell_summary(
    spec: &ChainSpec,
    sched_first: CouplingSchedule,
    sched_last: CouplingSchedule,
) -> Result<CellSummary, Error> {
    let cfg = IntegratorConfig::for_schedules(&[&sched_first, &sched_last]);
    let t_end = suggested_t_end(spec, &sched_last);
    let trace = run_transfer(spec, sched_first, sched_last.clone(), t_end, &cfg)?;
    let first_max = match first_maximum(&trace, FidelityMode::PhaseOptimized) {
        Ok(FirstMaximum { value, .. }) => Some(value),
        Err(FidelityError::NoMaximum) => None,
        Err(e) => return Err(e.into()),
    };
    let stationary = match stationary_fidelity(&trace, &sched_last) {
        Ok(v) => Some(v),
        Err(FidelityError::NotStationary(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(CellSummary { first_max, stationary })
}

fn fermi_pair(t_i: f64, tau: f64, t_f: f64) -> (CouplingSchedule, CouplingSchedule) {
    (
        CouplingSchedule::FermiOn { t_i, tau },
        CouplingSchedule::FermiOff { t_f, tau },
    )
}

/// Scans logistic ramps over the grids; each cell is an independent run with
/// `FermiOn(t_i, tau)` / `FermiOff(t_f, tau)`.
pub fn sweep_tau_tf(
    spec: &ChainSpec,
    tau_grid: &[f64],
    tf_grid: &[f64],
    t_i: f64,
    quantity: SweepQuantity,
) -> Result<SweepMatrix, Error> {
    let detailed = sweep_tau_tf_detailed(spec, tau_grid, tf_grid, t_i)?;
    let values = detailed
        .values
        .iter()
        .map(|c| match quantity {
            SweepQuantity::Stationary => c.stationary,
            SweepQuantity::FirstMax => c.first_max,
        })
        .collect();
    Ok(SweepMatrix { tau: tau_grid.to_vec(), tf: tf_grid.to_vec(), values })
}

/// Grid of full cell summaries, row-major in `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailedSweep {
    pub tau: Vec<f64>,
    pub tf: Vec<f64>,
    pub values: Vec<CellSummary>,
}

impl DetailedSweep {
    pub fn get(&self, i_tau: usize, i_tf: usize) -> CellSummary {
        self.values[i_tau * self.tf.len() + i_tf]
    }
}

pub fn sweep_tau_tf_detailed(
    spec: &ChainSpec,
    tau_grid: &[f64],
    tf_grid: &[f64],
    t_i: f64,
) -> Result<DetailedSweep, Error> {
    validate_grid(tau_grid)?;
    validate_grid(tf_grid)?;
    let cells: Vec<(f64, f64)> = tau_grid
        .iter()
        .flat_map(|&tau| tf_grid.iter().map(move |&tf| (tau, tf)))
        .collect();
    let values: Result<Vec<CellSummary>, Error> = cells
        .par_iter()
        .map(|&(tau, tf)| {
            let (on, off) = fermi_pair(t_i, tau, tf);
            cell_summary(spec, on, off)
        })
        .collect();
    Ok(DetailedSweep { tau: tau_grid.to_vec(), tf: tf_grid.to_vec(), values: values? })
}

/// Result of optimizing `(tau, t_f)` for one schedule family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub tau: f64,
    pub tf: f64,
    pub value: f64,
}

/// Maximizes the first-maximum fidelity over `(tau, t_f)` for an arbitrary
/// schedule family: coarse grid, then `refine_rounds` rounds of
/// coordinate-wise 3-point parabolic probing with halving step. The result
/// never falls below the best coarse cell.
pub fn optimize_first_max<F>(
    spec: &ChainSpec,
    make_scheds: F,
    tau_grid: &[f64],
    tf_grid: &[f64],
    refine_rounds: usize,
) -> Result<Optimum, Error>
where
    F: Fn(f64, f64) -> (CouplingSchedule, CouplingSchedule) + Sync,
{
    validate_grid(tau_grid)?;
    validate_grid(tf_grid)?;
    let eval = |tau: f64, tf: f64| -> Result<f64, Error> {
        let (on, off) = make_scheds(tau, tf);
        Ok(cell_summary(spec, on, off)?.first_max.unwrap_or(f64::NEG_INFINITY))
    };

    let cells: Vec<(f64, f64)> = tau_grid
        .iter()
        .flat_map(|&tau| tf_grid.iter().map(move |&tf| (tau, tf)))
        .collect();
    let coarse: Result<Vec<f64>, Error> =
        cells.par_iter().map(|&(tau, tf)| eval(tau, tf)).collect();
    let coarse = coarse?;
    let (mut best_idx, mut best_val) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in coarse.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best_idx = i;
        }
    }
    if !best_val.is_finite() {
        return Err(FidelityError::NoMaximum.into());
    }
    let (mut tau, mut tf) = cells[best_idx];
    let mut value = best_val;

    let mut h_tau = grid_spacing(tau_grid);
    let mut h_tf = grid_spacing(tf_grid);
    if h_tau == 0.0 || h_tf == 0.0 {
        return Ok(Optimum { tau, tf, value }); // single-cell grid: no refinement
    }

    for _ in 0..refine_rounds {
        let (t2, v2) = refine_axis(|x| eval(x, tf), tau, value, h_tau, TAU_FLOOR)?;
        tau = t2;
        value = v2;
        let (f2, v3) = refine_axis(|x| eval(tau, x), tf, value, h_tf, f64::NEG_INFINITY)?;
        tf = f2;
        value = v3;
        h_tau /= 2.0;
        h_tf /= 2.0;
    }
    Ok(Optimum { tau, tf, value })
}

fn grid_spacing(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        0.0
    } else {
        (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
    }
}

/// One 3-point parabolic probe along an axis; keeps the incumbent unless a
/// probe strictly improves it.
fn refine_axis<E>(
    eval: E,
    x0: f64,
    v0: f64,
    h: f64,
    floor: f64,
) -> Result<(f64, f64), Error>
where
    E: Fn(f64) -> Result<f64, Error>,
{
    let xl = (x0 - h).max(floor);
    let xr = x0 + h;
    let vl = eval(xl)?;
    let vr = eval(xr)?;
    let mut best = (x0, v0);
    for (x, v) in [(xl, vl), (xr, vr)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    let denom = vl - 2.0 * v0 + vr;
    if denom < 0.0 {
        // Concave triple: probe the parabola's vertex.
        let xv = (x0 + 0.5 * h * (vl - vr) / denom).clamp(xl, xr).max(floor);
        let vv = eval(xv)?;
        if vv > best.1 {
            best = (xv, vv);
        }
    }
    Ok(best)
}

/// Per-exponent optimum of the power-law family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawOptimum {
    pub a: f64,
    pub best_tau: f64,
    pub best_tf: f64,
    pub f_first_max: f64,
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 1);
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// For each exponent `a`, maximizes the first fidelity maximum of the
/// power-law ramp pair over `(tau, t_f)`. `budget` is the number of coarse
/// grid points per axis over the default ranges; `budget = 1` degenerates to
/// a single direct simulation.
pub fn sweep_powerlaw(
    spec: &ChainSpec,
    a_grid: &[f64],
    budget: usize,
) -> Result<Vec<PowerLawOptimum>, Error> {
    validate_grid(a_grid)?;
    if a_grid.iter().any(|&a| !(0.1..=1.0).contains(&a)) {
        return Err(Error::ExponentOutOfRange);
    }
    assert!(budget >= 1);
    let tau_grid = linspace(DEFAULT_TAU_RANGE.0, DEFAULT_TAU_RANGE.1, budget);
    let tf_grid = linspace(DEFAULT_TF_RANGE.0, DEFAULT_TF_RANGE.1, budget);
    a_grid
        .iter()
        .map(|&a| {
            let make = |tau: f64, tf: f64| {
                (
                    CouplingSchedule::PowerOn { tau, a },
                    CouplingSchedule::PowerOff { t_f: tf, tau, a },
                )
            };
            let opt = optimize_first_max(spec, make, &tau_grid, &tf_grid, 2)?;
            Ok(PowerLawOptimum {
                a,
                best_tau: opt.tau,
                best_tf: opt.tf,
                f_first_max: opt.value,
            })
        })
        .collect()
}
