//! CSV and JSON-sidecar writers. Floats are written with Rust's shortest
//! round-trip formatting, so identical inputs reproduce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::Value;

use chainwave_core::{
    EnsembleReport, FidelityTrace, Histogram, PowerLawOptimum, SweepMatrix,
};

pub fn write_trace_csv(path: &Path, trace: &FidelityTrace, sample_every: usize) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "t,f_abs,rel_phase,f_avg,f_opt")?;
    for s in trace.samples.iter().step_by(sample_every.max(1)) {
        writeln!(w, "{},{},{},{},{}", s.t, s.f_abs, s.rel_phase, s.f_avg, s.f_opt)?;
    }
    Ok(())
}

/// Matrix with the ramp constant as row header and the decoupling time as
/// column header; cells that never produced the quantity stay empty.
pub fn write_heatmap_csv(path: &Path, m: &SweepMatrix) -> Result<()> {
    let mut w = writer(path)?;
    write!(w, "tau")?;
    for tf in &m.tf {
        write!(w, ",{tf}")?;
    }
    writeln!(w)?;
    for (i, tau) in m.tau.iter().enumerate() {
        write!(w, "{tau}")?;
        for j in 0..m.tf.len() {
            match m.get(i, j) {
                Some(v) => write!(w, ",{v}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_powerlaw_csv(path: &Path, rows: &[PowerLawOptimum]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "a,best_tau,best_tf,f_first_max")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.a, r.best_tau, r.best_tf, r.f_first_max)?;
    }
    Ok(())
}

pub fn write_samples_csv(path: &Path, report: &EnsembleReport) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "sample_index,seed,f_dynamic,f_reference,difference")?;
    for s in &report.samples {
        writeln!(
            w,
            "{},{},{},{},{}",
            s.index, s.seed, s.f_dynamic, s.f_reference, s.difference
        )?;
    }
    Ok(())
}

pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "bin_left,bin_right,count")?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{},{}", h.edges[i], h.edges[i + 1], c)?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    let file =
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}
