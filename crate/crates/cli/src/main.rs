//! Command-line front end: runs single transfers, parameter sweeps, and
//! Monte Carlo ensembles, and checks the solver against its brute-force
//! references. Numeric results land as CSV files with a JSON sidecar
//! carrying every parameter (and seed) needed to regenerate them.

mod output;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use chainwave_core::{
    bloch_average_quadrature, build_hamiltonian, convergence_check, disorder_ensemble, evolve,
    fidelity_of_state, first_maximum, fluctuation_ensemble, full_space_fidelity_trace, histogram,
    oracle, run_transfer, stationary_fidelity, suggested_t_end, sweep_powerlaw, sweep_tau_tf,
    ChainSpec, CouplingSchedule, FidelityMode, FidelityTrace, IntegratorConfig, NoiseTrack,
    SectorState, SweepQuantity,
};

/// Environment variable that overrides the configured ensemble seed.
const SEED_ENV: &str = "CHAINWAVE_SEED";

const ORACLE_TRACE_TOL: f64 = 1e-6;
const QUADRATURE_TOL: f64 = 1e-5;
const CONVERGENCE_TOL: f64 = 1e-7;

#[derive(Parser)]
#[command(
    name = "chainwave",
    version,
    about = "Qubit-chain state transfer with dynamically ramped end couplings"
)]
struct Cli {
    /// JSON file providing defaults for the flags of the chosen subcommand
    /// (explicitly passed flags win).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for output files (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Cap the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one transfer and write the fidelity trace.
    Simulate(SimulateArgs),
    /// Scan ramp parameters and write a heatmap (or power-law optima).
    Sweep(SweepArgs),
    /// Monte Carlo ensemble over bond disorder or coupling noise.
    Ensemble(EnsembleArgs),
    /// Compare the sector solver against the full-space and quadrature
    /// references.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum ScheduleFamily {
    Fermi,
    Power,
    Instant,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, serde::Serialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Averaged,
    PhaseOptimized,
}

impl From<ModeArg> for FidelityMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Averaged => FidelityMode::Averaged,
            ModeArg::PhaseOptimized => FidelityMode::PhaseOptimized,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, serde::Serialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum QuantityArg {
    Stationary,
    FirstMax,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum EnsembleModeArg {
    Disorder,
    Fluctuation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum VerifyFamily {
    Static,
    Fermi,
    Power,
    Noisy,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default)]
struct SimulateArgs {
    /// Chain length.
    #[arg(long)]
    n: Option<usize>,
    /// Bulk hopping coupling (sets the time unit).
    #[arg(long)]
    jxy: Option<f64>,
    /// Ising anisotropy.
    #[arg(long)]
    jz: Option<f64>,
    /// Uniform field.
    #[arg(long)]
    b: Option<f64>,
    /// Ramp family for the end bonds.
    #[arg(long, value_enum)]
    schedule: Option<ScheduleFamily>,
    /// Keep both end bonds constant (overrides --schedule).
    #[arg(long = "static")]
    #[serde(rename = "static")]
    static_: bool,
    /// Turn-on midpoint of the first bond.
    #[arg(long)]
    ti: Option<f64>,
    /// Turn-off midpoint of the last bond.
    #[arg(long)]
    tf: Option<f64>,
    /// Ramp time constant.
    #[arg(long)]
    tau: Option<f64>,
    /// Power-law exponent.
    #[arg(long)]
    a: Option<f64>,
    /// End of the integration window.
    #[arg(long)]
    t_end: Option<f64>,
    /// Integrator step (default: derived from the schedules).
    #[arg(long)]
    dt: Option<f64>,
    /// Also run the static chain and write its trace next to the ramped one.
    #[arg(long)]
    compare_static: bool,
    /// Fidelity curve used for the printed summary.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Keep every k-th sample in the CSV.
    #[arg(long)]
    sample_every: Option<usize>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default)]
struct SweepArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    jxy: Option<f64>,
    #[arg(long)]
    jz: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Ramp-constant grid as lo:hi:count.
    #[arg(long)]
    tau: Option<String>,
    /// Decoupling-time grid as lo:hi:count.
    #[arg(long)]
    tf: Option<String>,
    /// Turn-on midpoint (fixed across the grid).
    #[arg(long)]
    ti: Option<f64>,
    /// Per-cell quantity.
    #[arg(long, value_enum)]
    quantity: Option<QuantityArg>,
    /// Scan the power-law family instead: optimize (tau, t_f) per exponent.
    #[arg(long)]
    powerlaw: bool,
    /// Exponent grid as lo:hi:count (power-law scan).
    #[arg(long)]
    a: Option<String>,
    /// Coarse grid points per axis for the per-exponent optimizer.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default)]
struct EnsembleArgs {
    /// disorder: paired static/ramped runs over random bonds;
    /// fluctuation: noisy ramps on a clean chain.
    #[arg(long, value_enum)]
    mode: Option<EnsembleModeArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    jxy: Option<f64>,
    #[arg(long)]
    jz: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Upper edge of the uniform bond-disorder interval.
    #[arg(long)]
    strength: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Base seed; per-sample seeds are seed + index.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tf: Option<f64>,
    #[arg(long)]
    ti: Option<f64>,
    /// Histogram bin count.
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default)]
struct VerifyArgs {
    /// Chain length (full-space reference caps at 12).
    #[arg(long)]
    n: Option<usize>,
    /// Schedule family to cross-check.
    #[arg(long, value_enum)]
    schedule: Option<VerifyFamily>,
    /// Check the closed-form input-state average against spherical
    /// quadrature instead of the full-space evolution.
    #[arg(long)]
    quadrature: bool,
    /// Quadrature point count.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tf: Option<f64>,
    #[arg(long)]
    ti: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Seed for the noisy-schedule tracks.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("thread pool already initialized")?;
    }
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;

    match cli.command {
        Command::Simulate(args) => cmd_simulate(merge_config(args, &cli.config)?, &out_dir),
        Command::Sweep(args) => cmd_sweep(merge_config(args, &cli.config)?, &out_dir),
        Command::Ensemble(args) => cmd_ensemble(merge_config(args, &cli.config)?, &out_dir),
        Command::Verify(args) => cmd_verify(merge_config(args, &cli.config)?),
    }
}

/// Loads the config file (if any) and fills in fields the command line left
/// unset. Explicit flags always win.
fn merge_config<T: Mergeable + for<'de> Deserialize<'de>>(
    cli: T,
    config: &Option<PathBuf>,
) -> Result<T> {
    match config {
        None => Ok(cli),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            let file: T = serde_json::from_str(&text)
                .with_context(|| format!("invalid config {}", path.display()))?;
            Ok(cli.merged_over(file))
        }
    }
}

trait Mergeable {
    /// `self` (the command line) wins over `fallback` (the config file).
    fn merged_over(self, fallback: Self) -> Self;
}

impl Mergeable for SimulateArgs {
    fn merged_over(self, f: Self) -> Self {
        Self {
            n: self.n.or(f.n),
            jxy: self.jxy.or(f.jxy),
            jz: self.jz.or(f.jz),
            b: self.b.or(f.b),
            schedule: self.schedule.or(f.schedule),
            static_: self.static_ || f.static_,
            ti: self.ti.or(f.ti),
            tf: self.tf.or(f.tf),
            tau: self.tau.or(f.tau),
            a: self.a.or(f.a),
            t_end: self.t_end.or(f.t_end),
            dt: self.dt.or(f.dt),
            compare_static: self.compare_static || f.compare_static,
            mode: self.mode.or(f.mode),
            sample_every: self.sample_every.or(f.sample_every),
        }
    }
}

impl Mergeable for SweepArgs {
    fn merged_over(self, f: Self) -> Self {
        Self {
            n: self.n.or(f.n),
            jxy: self.jxy.or(f.jxy),
            jz: self.jz.or(f.jz),
            b: self.b.or(f.b),
            tau: self.tau.or(f.tau),
            tf: self.tf.or(f.tf),
            ti: self.ti.or(f.ti),
            quantity: self.quantity.or(f.quantity),
            powerlaw: self.powerlaw || f.powerlaw,
            a: self.a.or(f.a),
            budget: self.budget.or(f.budget),
        }
    }
}

impl Mergeable for EnsembleArgs {
    fn merged_over(self, f: Self) -> Self {
        Self {
            mode: self.mode.or(f.mode),
            n: self.n.or(f.n),
            jxy: self.jxy.or(f.jxy),
            jz: self.jz.or(f.jz),
            b: self.b.or(f.b),
            strength: self.strength.or(f.strength),
            samples: self.samples.or(f.samples),
            seed: self.seed.or(f.seed),
            tau: self.tau.or(f.tau),
            tf: self.tf.or(f.tf),
            ti: self.ti.or(f.ti),
            bins: self.bins.or(f.bins),
        }
    }
}

impl Mergeable for VerifyArgs {
    fn merged_over(self, f: Self) -> Self {
        Self {
            n: self.n.or(f.n),
            schedule: self.schedule.or(f.schedule),
            quadrature: self.quadrature || f.quadrature,
            points: self.points.or(f.points),
            tau: self.tau.or(f.tau),
            tf: self.tf.or(f.tf),
            ti: self.ti.or(f.ti),
            dt: self.dt.or(f.dt),
            seed: self.seed.or(f.seed),
        }
    }
}

/// Seed precedence: explicit flag or config value, then the environment
/// override, then zero.
fn resolve_seed(configured: Option<u64>) -> Result<u64> {
    if let Some(s) = configured {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .parse::<u64>()
            .with_context(|| format!("{SEED_ENV}={v} is not a valid seed")),
        Err(_) => Ok(0),
    }
}

fn parse_range(text: &str, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("{what} range must be lo:hi:count, got {text:?}");
    }
    let lo: f64 = parts[0].parse().with_context(|| format!("bad {what} range {text:?}"))?;
    let hi: f64 = parts[1].parse().with_context(|| format!("bad {what} range {text:?}"))?;
    let count: usize =
        parts[2].parse().with_context(|| format!("bad {what} range {text:?}"))?;
    if count == 0 {
        bail!("{what} range needs at least one point");
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    if hi <= lo {
        bail!("{what} range needs hi > lo, got {text:?}");
    }
    Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
}

fn chain_spec(
    n: Option<usize>,
    jxy: Option<f64>,
    jz: Option<f64>,
    b: Option<f64>,
) -> Result<ChainSpec> {
    let n = n.unwrap_or(10);
    Ok(ChainSpec::new(
        n,
        jxy.unwrap_or(1.0),
        jz.unwrap_or(0.0),
        b.unwrap_or(0.0),
        vec![0.0; n.saturating_sub(1)],
    )?)
}

fn fermi_pair(ti: f64, tau: f64, tf: f64) -> (CouplingSchedule, CouplingSchedule) {
    (
        CouplingSchedule::FermiOn { t_i: ti, tau },
        CouplingSchedule::FermiOff { t_f: tf, tau },
    )
}

fn cmd_simulate(args: SimulateArgs, out_dir: &Path) -> Result<()> {
    let spec = chain_spec(args.n, args.jxy, args.jz, args.b)?;
    let ti = args.ti.unwrap_or(0.0);
    let tf = args.tf.unwrap_or(6.2);
    let tau = args.tau.unwrap_or(1.0);
    let a = args.a.unwrap_or(0.5);
    let family = args.schedule.unwrap_or(ScheduleFamily::Fermi);
    let mode: FidelityMode = args.mode.unwrap_or(ModeArg::PhaseOptimized).into();
    let sample_every = args.sample_every.unwrap_or(1);

    let (on, off, family_name) = if args.static_ {
        (CouplingSchedule::Static, CouplingSchedule::Static, "static")
    } else {
        match family {
            ScheduleFamily::Fermi => {
                let (on, off) = fermi_pair(ti, tau, tf);
                (on, off, "fermi")
            }
            ScheduleFamily::Power => (
                CouplingSchedule::PowerOn { tau, a },
                CouplingSchedule::PowerOff { t_f: tf, tau, a },
                "power",
            ),
            ScheduleFamily::Instant => (
                CouplingSchedule::InstantOn { t_i: ti },
                CouplingSchedule::InstantOff { t_f: tf },
                "instant",
            ),
        }
    };

    let cfg = match args.dt {
        Some(dt) => IntegratorConfig::with_dt(dt)?,
        None => IntegratorConfig::for_schedules(&[&on, &off]),
    };
    let t_end = args.t_end.unwrap_or_else(|| suggested_t_end(&spec, &off));

    let trace = run_transfer(&spec, on.clone(), off.clone(), t_end, &cfg)?;
    output::write_trace_csv(&out_dir.join("trace.csv"), &trace, sample_every)?;
    let mut outputs = vec!["trace.csv"];

    let summary = summarize(&trace, &off, mode);
    print_summary(family_name, &summary);

    let mut static_summary = None;
    if args.compare_static && family_name != "static" {
        let static_trace = run_transfer(
            &spec,
            CouplingSchedule::Static,
            CouplingSchedule::Static,
            t_end,
            &IntegratorConfig::default(),
        )?;
        output::write_trace_csv(
            &out_dir.join("trace_static.csv"),
            &static_trace,
            sample_every,
        )?;
        outputs.push("trace_static.csv");
        let s = summarize(&static_trace, &CouplingSchedule::Static, mode);
        print_summary("static", &s);
        static_summary = Some(s);
    }

    output::write_json(
        &out_dir.join("trace.json"),
        &json!({
            "command": "simulate",
            "version": env!("CARGO_PKG_VERSION"),
            "chain": spec,
            "schedule_family": family_name,
            "sched_first": on,
            "sched_last": off,
            "t_end": t_end,
            "integrator": cfg,
            "mode": args.mode.unwrap_or(ModeArg::PhaseOptimized),
            "sample_every": sample_every,
            "outputs": outputs,
            "summary": summary,
            "static_summary": static_summary,
        }),
    )?;
    Ok(())
}

#[derive(serde::Serialize, Debug)]
struct RunSummary {
    t_first_max: Option<f64>,
    f_first_max: Option<f64>,
    half_width: Option<f64>,
    f_stationary: Option<f64>,
}

fn summarize(trace: &FidelityTrace, off: &CouplingSchedule, mode: FidelityMode) -> RunSummary {
    let peak = first_maximum(trace, mode).ok();
    let f_stationary = stationary_fidelity(trace, off).ok();
    RunSummary {
        t_first_max: peak.map(|p| p.t),
        f_first_max: peak.map(|p| p.value),
        half_width: peak.map(|p| p.half_width),
        f_stationary,
    }
}

fn print_summary(label: &str, s: &RunSummary) {
    match (s.f_first_max, s.t_first_max) {
        (Some(f), Some(t)) => println!(
            "{label}: first maximum {f:.5} at t = {t:.3} (half-width {:.3})",
            s.half_width.unwrap_or(f64::NAN)
        ),
        _ => println!("{label}: no first maximum in the window"),
    }
    match s.f_stationary {
        Some(f) => println!("{label}: localized fidelity after decoupling {f:.5}"),
        None => println!("{label}: no stationary value (bond not decoupled)"),
    }
}

fn cmd_sweep(args: SweepArgs, out_dir: &Path) -> Result<()> {
    let spec = chain_spec(args.n, args.jxy, args.jz, args.b)?;
    if args.powerlaw {
        let a_grid = parse_range(args.a.as_deref().unwrap_or("0.1:1:10"), "a")?;
        let budget = args.budget.unwrap_or(8);
        let rows = sweep_powerlaw(&spec, &a_grid, budget)?;
        output::write_powerlaw_csv(&out_dir.join("powerlaw.csv"), &rows)?;
        for r in &rows {
            println!(
                "a = {:.3}: best first maximum {:.5} at (tau = {:.4}, t_f = {:.4})",
                r.a, r.f_first_max, r.best_tau, r.best_tf
            );
        }
        output::write_json(
            &out_dir.join("powerlaw.json"),
            &json!({
                "command": "sweep",
                "version": env!("CARGO_PKG_VERSION"),
                "chain": spec,
                "powerlaw": true,
                "a_grid": a_grid,
                "budget": budget,
                "outputs": ["powerlaw.csv"],
                "optima": rows,
            }),
        )?;
        return Ok(());
    }

    let tau_grid = parse_range(args.tau.as_deref().unwrap_or("0.05:2:40"), "tau")?;
    let tf_grid = parse_range(args.tf.as_deref().unwrap_or("4:9:40"), "tf")?;
    let ti = args.ti.unwrap_or(0.0);
    let quantity = args.quantity.unwrap_or(QuantityArg::Stationary);
    let core_quantity = match quantity {
        QuantityArg::Stationary => SweepQuantity::Stationary,
        QuantityArg::FirstMax => SweepQuantity::FirstMax,
    };
    let matrix = sweep_tau_tf(&spec, &tau_grid, &tf_grid, ti, core_quantity)?;
    output::write_heatmap_csv(&out_dir.join("heatmap.csv"), &matrix)?;

    // Static first maximum of the same chain, for context.
    let static_trace = run_transfer(
        &spec,
        CouplingSchedule::Static,
        CouplingSchedule::Static,
        chainwave_core::transfer::default_window(&spec),
        &IntegratorConfig::default(),
    )?;
    let f0 = first_maximum(&static_trace, FidelityMode::PhaseOptimized)
        .map(|p| p.value)
        .ok();

    let best = matrix.max_cell();
    match best {
        Some((i, j, v)) => {
            println!(
                "best cell: {:.5} at (tau = {:.4}, t_f = {:.4})",
                v, matrix.tau[i], matrix.tf[j]
            );
            if let Some(f0) = f0 {
                println!("static first maximum: {f0:.5} (improvement {:+.5})", v - f0);
            }
        }
        None => println!("no cell produced the requested quantity"),
    }
    output::write_json(
        &out_dir.join("heatmap.json"),
        &json!({
            "command": "sweep",
            "version": env!("CARGO_PKG_VERSION"),
            "chain": spec,
            "t_i": ti,
            "quantity": quantity,
            "tau_grid": tau_grid,
            "tf_grid": tf_grid,
            "outputs": ["heatmap.csv"],
            "static_first_max": f0,
            "best": best.map(|(i, j, v)| json!({
                "tau": matrix.tau[i], "tf": matrix.tf[j], "value": v
            })),
        }),
    )?;
    Ok(())
}

fn cmd_ensemble(args: EnsembleArgs, out_dir: &Path) -> Result<()> {
    let spec = chain_spec(args.n, args.jxy, args.jz, args.b)?;
    let mode = args.mode.unwrap_or(EnsembleModeArg::Disorder);
    let samples = args.samples.unwrap_or(1000);
    let strength = args.strength.unwrap_or(0.07);
    let seed = resolve_seed(args.seed)?;
    let bins = args.bins.unwrap_or(40);
    let tau = args.tau.unwrap_or(0.325);
    let tf = args.tf.unwrap_or(6.2);
    let ti = args.ti.unwrap_or(0.0);
    let (on, off) = fermi_pair(ti, tau, tf);

    let mut report = match mode {
        EnsembleModeArg::Disorder => {
            disorder_ensemble(&spec, &on, &off, samples, strength, seed)?
        }
        EnsembleModeArg::Fluctuation => fluctuation_ensemble(&spec, &on, &off, samples, seed)?,
    };
    report.histogram = histogram(&report.study_values(), bins);

    output::write_samples_csv(&out_dir.join("samples.csv"), &report)?;
    output::write_histogram_csv(&out_dir.join("histogram.csv"), &report.histogram)?;

    let mode_name = match mode {
        EnsembleModeArg::Disorder => "disorder",
        EnsembleModeArg::Fluctuation => "fluctuation",
    };
    println!(
        "{mode_name} ensemble: {} samples ({} failed), seed {seed}",
        report.samples.len(),
        report.failures.len()
    );
    println!(
        "study quantity: mean {:.5}, std {:.5}, min {:.5}, max {:.5}",
        report.stats.mean, report.stats.std_dev, report.stats.min, report.stats.max
    );
    println!(
        "clean baselines: ramped localized {:.5}, static first maximum {:.5}",
        report.clean_f_dynamic, report.clean_f_static
    );

    output::write_json(
        &out_dir.join("ensemble.json"),
        &json!({
            "command": "ensemble",
            "version": env!("CARGO_PKG_VERSION"),
            "chain": spec,
            "mode": mode_name,
            "samples": samples,
            "strength": if mode == EnsembleModeArg::Disorder { Some(strength) } else { None },
            "seed": seed,
            "t_i": ti,
            "tau": tau,
            "tf": tf,
            "bins": bins,
            "outputs": ["samples.csv", "histogram.csv"],
            "stats": report.stats,
            "clean_f_dynamic": report.clean_f_dynamic,
            "clean_f_static": report.clean_f_static,
            "failed_samples": report.failures.len(),
        }),
    )?;
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let n = args.n.unwrap_or(6);
    let spec = ChainSpec::new(n, 1.0, 0.0, 0.0, vec![0.0; n.saturating_sub(1)])?;
    let tau = args.tau.unwrap_or(0.5);
    let tf = args.tf.unwrap_or(3.0);
    let ti = args.ti.unwrap_or(0.0);
    let dt = args.dt.unwrap_or(0.01);
    let seed = resolve_seed(args.seed)?;

    if args.quadrature {
        return verify_quadrature(&spec, ti, tau, tf, args.points.unwrap_or(10_000));
    }

    let family = args.schedule.unwrap_or(VerifyFamily::Fermi);
    let t_end = (2.0 * n as f64).max(tf + 2.0);
    let (on, off, name) = match family {
        VerifyFamily::Static => {
            (CouplingSchedule::Static, CouplingSchedule::Static, "static")
        }
        VerifyFamily::Fermi => {
            let (on, off) = fermi_pair(ti, tau, tf);
            (on, off, "fermi")
        }
        VerifyFamily::Power => (
            CouplingSchedule::PowerOn { tau, a: 0.5 },
            CouplingSchedule::PowerOff { t_f: tf, tau, a: 0.5 },
            "power",
        ),
        VerifyFamily::Noisy => {
            let (on, off) = fermi_pair(ti, tau, tf);
            (
                CouplingSchedule::Noisy {
                    inner: Box::new(on),
                    track: NoiseTrack::draw(tau, t_end, 2 * seed),
                },
                CouplingSchedule::Noisy {
                    inner: Box::new(off),
                    track: NoiseTrack::draw(tau, t_end, 2 * seed + 1),
                },
                "noisy",
            )
        }
    };

    let mut all_pass = true;

    let reference = full_space_fidelity_trace(&spec, on.clone(), off.clone(), t_end, dt)?;
    let h = build_hamiltonian(&spec, on, off)?;
    let cfg = IntegratorConfig::with_dt(dt)?;
    let mut sector = Vec::with_capacity(reference.len());
    evolve(&h, &SectorState::sender_excitation(n), t_end, &cfg, |s| {
        sector.push(fidelity_of_state(s).expect("normalized state").f_avg);
    })?;
    let mut worst = 0.0f64;
    for ((_, f_ref), f_sec) in reference.iter().zip(&sector) {
        worst = worst.max((f_ref - f_sec).abs());
    }
    all_pass &= report_check(
        &format!("full-space equivalence (n = {n}, {name}, t_end = {t_end}, dt = {dt})"),
        worst,
        ORACLE_TRACE_TOL,
    );

    let d = convergence_check(&h, &SectorState::sender_excitation(n), t_end, &cfg)?;
    all_pass &= report_check("step-halving convergence", d, CONVERGENCE_TOL);

    if !all_pass {
        bail!("verification failed");
    }
    println!("all checks passed");
    Ok(())
}

fn verify_quadrature(spec: &ChainSpec, ti: f64, tau: f64, tf: f64, points: usize) -> Result<()> {
    let (on, off) = fermi_pair(ti, tau, tf);
    let cfg = IntegratorConfig::for_schedules(&[&on, &off]);
    let h = build_hamiltonian(spec, on, off)?;
    let mut states = Vec::new();
    let mut step = 0usize;
    evolve(
        &h,
        &SectorState::sender_excitation(spec.n),
        suggested_t_end(spec, h.sched_last()),
        &cfg,
        |s| {
            if step.is_multiple_of(500) {
                states.push(s.clone());
            }
            step += 1;
        },
    )?;
    let mut worst = 0.0f64;
    for s in &states {
        let closed = fidelity_of_state(s)?.f_avg;
        let vac = s.vac_phase;
        let f = s.transfer_amplitude();
        let quad =
            bloch_average_quadrature(|a, b| oracle::sector_rho_out(vac, f, a, b), points);
        worst = worst.max((closed - quad).abs());
    }
    if report_check(
        &format!(
            "closed form vs {points}-point spherical quadrature ({} states)",
            states.len()
        ),
        worst,
        QUADRATURE_TOL,
    ) {
        println!("all checks passed");
        Ok(())
    } else {
        bail!("verification failed");
    }
}

fn report_check(label: &str, measured: f64, tol: f64) -> bool {
    let pass = measured < tol;
    println!(
        "{label}: max deviation {measured:.3e} (tolerance {tol:.1e}) ... {}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}
