//! Seeded static bond disorder, stepwise coupling noise, and Monte Carlo
//! ensembles over both.
//!
//! All randomness flows through `ChaCha8` streams seeded explicitly, with
//! per-sample seeds derived as `seed + sample_index`, so every ensemble is
//! reproducible bit-for-bit regardless of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fidelity::{first_maximum, stationary_fidelity, FidelityMode};
use crate::model::{ChainSpec, CouplingSchedule, Side};
use crate::transfer::{default_window, run_transfer, run_transfer_auto, suggested_t_end};
use crate::Error;

/// Noise step width as a fraction of the ramp time constant.
pub const NOISE_STEP_FACTOR: f64 = 0.036;

/// Upper edge of the uniform step-height distribution.
pub const NOISE_AMPLITUDE: f64 = 0.02;

/// Fraction of samples allowed to fail before an ensemble aborts.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// A stored piecewise-constant sample path `r(t) >= 0`.
///
/// `r(t) = heights[floor(t / step_width)]` for `t >= 0` and `heights[0]`
/// for `t < 0`; past the stored range the last step extends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrack {
    pub step_width: f64,
    pub heights: Vec<f64>,
    pub seed: u64,
}

impl NoiseTrack {
    /// Draws a track covering `[0, t_span]` for a ramp of time constant
    /// `tau`: step width `0.036 tau`, heights i.i.d. uniform on
    /// `[0, NOISE_AMPLITUDE]`.
    pub fn draw(tau: f64, t_span: f64, seed: u64) -> Self {
        assert!(tau > 0.0 && t_span > 0.0);
        let step_width = NOISE_STEP_FACTOR * tau;
        let steps = (t_span / step_width).ceil() as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heights = (0..steps).map(|_| rng.random::<f64>() * NOISE_AMPLITUDE).collect();
        Self { step_width, heights, seed }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_sided(t, Side::Above)
    }

    pub(crate) fn value_sided(&self, t: f64, side: Side) -> f64 {
        self.heights[self.index_sided(t, side)]
    }

    fn index_sided(&self, t: f64, side: Side) -> usize {
        if t < 0.0 {
            return 0;
        }
        let x = t / self.step_width;
        let r = x.round();
        // Step edges are hit exactly by integrator stage times; well inside a
        // step the rounding test can never fire.
        let k = if (x - r).abs() < 1e-9 {
            match side {
                Side::Above => r,
                Side::Below => (r - 1.0).max(0.0),
            }
        } else {
            x.floor()
        };
        (k as usize).min(self.heights.len() - 1)
    }

    pub(crate) fn breakpoints(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        let lo = (t0 / self.step_width).floor() as i64 + 1;
        let hi = (t1 / self.step_width).ceil() as i64;
        for k in lo.max(1)..hi {
            let t = k as f64 * self.step_width;
            if t > t0 && t < t1 {
                out.push(t);
            }
        }
    }
}

/// `n - 1` i.i.d. uniform draws on `[0, strength]`, one per bond.
pub fn draw_disorder(n: usize, strength: f64, seed: u64) -> Vec<f64> {
    assert!(n >= 2);
    assert!(strength >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n - 1).map(|_| rng.random::<f64>() * strength).collect()
}

/// One Monte Carlo realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub seed: u64,
    /// Stationary fidelity of the ramped protocol for this realization.
    pub f_dynamic: f64,
    /// Comparison figure: the same chain's static first maximum (disorder
    /// study) or the noiseless stationary fidelity (fluctuation study).
    pub f_reference: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Equal-width histogram over the sample range.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    assert!(bins >= 1);
    assert!(!values.is_empty());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        hi = lo + 1e-12;
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

pub fn summary_stats(values: &[f64]) -> SummaryStats {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    SummaryStats {
        mean,
        std_dev: var.sqrt(),
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        count: values.len(),
    }
}

/// Which per-sample quantity the report's histogram and stats describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyQuantity {
    /// `f_dynamic - f_reference` per sample (disorder study).
    Difference,
    /// `f_dynamic` per sample (fluctuation study).
    Dynamic,
}

/// Ensemble output: per-sample records, the distribution of the study
/// quantity, and the clean-chain baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub samples: Vec<SampleRecord>,
    /// `(index, message)` of realizations that failed to simulate.
    pub failures: Vec<(usize, String)>,
    pub study: StudyQuantity,
    pub histogram: Histogram,
    pub stats: SummaryStats,
    /// Stationary fidelity of the ramped protocol on the clean, noiseless
    /// chain.
    pub clean_f_dynamic: f64,
    /// First-maximum fidelity of the clean static chain.
    pub clean_f_static: f64,
}

impl EnsembleReport {
    pub fn study_values(&self) -> Vec<f64> {
        match self.study {
            StudyQuantity::Difference => self.samples.iter().map(|s| s.difference).collect(),
            StudyQuantity::Dynamic => self.samples.iter().map(|s| s.f_dynamic).collect(),
        }
    }
}

const HISTOGRAM_BINS: usize = 40;

fn sample_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

fn clean_baselines(
    spec: &ChainSpec,
    sched_first: &CouplingSchedule,
    sched_last: &CouplingSchedule,
) -> Result<(f64, f64), Error> {
    let dynamic_trace = run_transfer_auto(spec, sched_first.clone(), sched_last.clone())?;
    let clean_f_dynamic = stationary_fidelity(&dynamic_trace, sched_last)?;
    let static_trace = run_transfer(
        spec,
        CouplingSchedule::Static,
        CouplingSchedule::Static,
        default_window(spec),
        &crate::evolve::IntegratorConfig::default(),
    )?;
    let clean_f_static = first_maximum(&static_trace, FidelityMode::PhaseOptimized)?.value;
    Ok((clean_f_dynamic, clean_f_static))
}

fn assemble_report(
    results: Vec<Result<SampleRecord, (usize, String)>>,
    study: StudyQuantity,
    clean_f_dynamic: f64,
    clean_f_static: f64,
) -> Result<EnsembleReport, Error> {
    let total = results.len();
    let mut samples = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(f) => failures.push(f),
        }
    }
    let limit = (MAX_FAILURE_FRACTION * total as f64).floor() as usize;
    if failures.len() > limit {
        return Err(Error::TooManyFailures { failed: failures.len(), total, limit });
    }
    let values: Vec<f64> = match study {
        StudyQuantity::Difference => samples.iter().map(|s| s.difference).collect(),
        StudyQuantity::Dynamic => samples.iter().map(|s| s.f_dynamic).collect(),
    };
    Ok(EnsembleReport {
        histogram: histogram(&values, HISTOGRAM_BINS),
        stats: summary_stats(&values),
        samples,
        failures,
        study,
        clean_f_dynamic,
        clean_f_static,
    })
}

/// Paired disorder study.
///
/// Each realization draws one disorder vector and runs the ramped chain
/// (quantity: stationary fidelity) and the static chain with the *same*
/// bonds (quantity: first-maximum fidelity); the report's distribution is
/// their difference. Aborts if more than 1% of samples fail.
pub fn disorder_ensemble(
    spec: &ChainSpec,
    sched_first: &CouplingSchedule,
    sched_last: &CouplingSchedule,
    n_samples: usize,
    strength: f64,
    seed: u64,
) -> Result<EnsembleReport, Error> {
    assert!(n_samples >= 1);
    let (clean_dyn, clean_stat) = clean_baselines(spec, sched_first, sched_last)?;
    let results: Vec<Result<SampleRecord, (usize, String)>> = (0..n_samples)
        .into_par_iter()
        .map(|index| {
            let s = sample_seed(seed, index);
            let run = || -> Result<SampleRecord, Error> {
                let disordered = spec.with_disorder(draw_disorder(spec.n, strength, s))?;
                let dyn_trace =
                    run_transfer_auto(&disordered, sched_first.clone(), sched_last.clone())?;
                let f_dynamic = stationary_fidelity(&dyn_trace, sched_last)?;
                let stat_trace = run_transfer(
                    &disordered,
                    CouplingSchedule::Static,
                    CouplingSchedule::Static,
                    default_window(&disordered),
                    &crate::evolve::IntegratorConfig::default(),
                )?;
                let f_reference =
                    first_maximum(&stat_trace, FidelityMode::PhaseOptimized)?.value;
                Ok(SampleRecord {
                    index,
                    seed: s,
                    f_dynamic,
                    f_reference,
                    difference: f_dynamic - f_reference,
                })
            };
            run().map_err(|e| (index, e.to_string()))
        })
        .collect();
    assemble_report(results, StudyQuantity::Difference, clean_dyn, clean_stat)
}

/// Fluctuating-schedule study.
///
/// Bonds stay clean; each realization wraps the two logistic ramps in
/// independent stepwise noise tracks and records the stationary fidelity.
/// The distribution is reported relative to the noiseless baseline.
pub fn fluctuation_ensemble(
    spec: &ChainSpec,
    sched_first: &CouplingSchedule,
    sched_last: &CouplingSchedule,
    n_samples: usize,
    seed: u64,
) -> Result<EnsembleReport, Error> {
    assert!(n_samples >= 1);
    let (tau_first, tau_last) = match (sched_first, sched_last) {
        (
            CouplingSchedule::FermiOn { tau: t1, .. },
            CouplingSchedule::FermiOff { tau: t2, .. },
        ) => (*t1, *t2),
        _ => return Err(Error::FluctuationNeedsFermi),
    };
    let (clean_dyn, clean_stat) = clean_baselines(spec, sched_first, sched_last)?;
    let t_span = suggested_t_end(spec, sched_last);
    let results: Vec<Result<SampleRecord, (usize, String)>> = (0..n_samples)
        .into_par_iter()
        .map(|index| {
            let s = sample_seed(seed, index);
            let run = || -> Result<SampleRecord, Error> {
                // Distinct track seeds across the whole ensemble: even for
                // the first bond, odd for the last.
                let noisy_first = CouplingSchedule::Noisy {
                    inner: Box::new(sched_first.clone()),
                    track: NoiseTrack::draw(tau_first, t_span, 2 * s),
                };
                let noisy_last = CouplingSchedule::Noisy {
                    inner: Box::new(sched_last.clone()),
                    track: NoiseTrack::draw(tau_last, t_span, 2 * s + 1),
                };
                let trace = run_transfer_auto(spec, noisy_first, noisy_last.clone())?;
                let f_dynamic = stationary_fidelity(&trace, &noisy_last)?;
                Ok(SampleRecord {
                    index,
                    seed: s,
                    f_dynamic,
                    f_reference: clean_dyn,
                    difference: f_dynamic - clean_dyn,
                })
            };
            run().map_err(|e| (index, e.to_string()))
        })
        .collect();
    assemble_report(results, StudyQuantity::Dynamic, clean_dyn, clean_stat)
}
