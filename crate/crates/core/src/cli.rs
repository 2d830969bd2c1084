//! Command-line front end shared by the `gmshadow` binary and the tests.
//!
//! Exit codes: 0 when a run completes (a detected blow-up is a result, not
//! a failure), 1 on configuration errors, 2 on numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::diagnostics::BlowUpClass;
use crate::integrator::Termination;
use crate::model::{classify_regime, validate_params, HypothesisContext, ModelParams};
use crate::output::{output_root, write_outcome};
use crate::scenario::{config_from_value, load_config_with, preset, preset_unchecked, run_scenario, ScenarioConfig, PRESETS};
use crate::spectral::{linearized_spectrum, LinearSpectrum};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "gmshadow", version, about = "Non-local shadow Gierer-Meinhardt laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trajectory, snapshots and summary.
    Run(RunArgs),
    /// Print the regime report for a parameter set.
    #[command(allow_negative_numbers = true)]
    Classify(ClassifyArgs),
    /// Print the linearized spectrum about u = 1 on a scenario's grid.
    Spectrum(SpectrumArgs),
    /// Run a cartesian parameter sweep concurrently.
    Sweep(SweepArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Debug, Args)]
struct Source {
    /// TOML or JSON scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset to start from; a config file is overlaid on it.
    #[arg(long)]
    preset: Option<String>,
    /// Skip the preset hypothesis re-check.
    #[arg(long)]
    unchecked: bool,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig> {
        match (&self.config, &self.preset) {
            (Some(path), name) => load_config_with(path, name.as_deref(), !self.unchecked),
            (None, Some(name)) if self.unchecked => {
                let c = preset_unchecked(name)?;
                c.validate()?;
                Ok(c)
            }
            (None, Some(name)) => preset(name),
            (None, None) => Err(Error::Config("either --config or --preset is required".into())),
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output root (default: config `output_dir`, then $GMSHADOW_OUT, then `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(short)]
    p: f64,
    #[arg(short)]
    q: f64,
    #[arg(short)]
    r: f64,
    #[arg(short)]
    s: f64,
    /// Spatial dimension, needed by dimension-dependent hypotheses.
    #[arg(long)]
    dim: Option<u32>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    source: Source,
    /// Number of Neumann modes.
    #[arg(short, default_value_t = 8)]
    k: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// `dotted.key=lo:hi:n`, repeatable; the sweep is their cartesian product.
    #[arg(long, required = true)]
    vary: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output root; each point writes to `<out>/<scenario>-<i>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), executes the command and
/// returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run(args) => run(args),
        Command::Classify(args) => {
            let params = validate_params(args.p, args.q, args.r, args.s)?;
            let report = classify_regime(&params, HypothesisContext { dimension: args.dim });
            print_json(&report)?;
            Ok(0)
        }
        Command::Spectrum(args) => {
            let config = args.source.load()?;
            print_json(&spectrum_report(&config, args.k)?)?;
            Ok(0)
        }
        Command::Sweep(args) => sweep(args),
        Command::Presets => {
            let mut out = std::io::stdout().lock();
            for info in PRESETS {
                writeln!(out, "{:<22} {}", info.name, info.statement).map_err(|e| Error::io("<stdout>", e))?;
            }
            Ok(0)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn exit_code_for(termination: &Termination) -> i32 {
    if termination.is_failure() {
        2
    } else {
        0
    }
}

fn run(args: RunArgs) -> Result<i32> {
    let config = args.source.load()?;
    let root = output_root(args.out.as_deref().or(config.output_dir.as_deref()));
    let outcome = run_scenario(&config)?;
    let summary = write_outcome(&root, &outcome)?;
    print_json(&summary)?;
    Ok(exit_code_for(&summary.termination))
}

#[derive(Debug, Serialize)]
pub struct SpectrumReport {
    pub scenario: String,
    pub params: ModelParams,
    pub spectrum: LinearSpectrum,
}

pub fn spectrum_report(config: &ScenarioConfig, k: usize) -> Result<SpectrumReport> {
    let grid = config.geometry.build()?;
    Ok(SpectrumReport {
        scenario: config.name.clone(),
        params: config.params,
        spectrum: linearized_spectrum(&config.params, &grid, k)?,
    })
}

/// One axis of a sweep: `key` takes `n` evenly spaced values in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::Config(format!("--vary {spec:?}: expected key=lo:hi:n"));
        let (key, range) = spec.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(bad());
        };
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if key.trim().is_empty() || n == 0 || !lo.is_finite() || !hi.is_finite() || (n == 1 && lo != hi) {
            return Err(bad());
        }
        let values = (0..n)
            .map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect();
        Ok(Self {
            key: key.trim().to_owned(),
            values,
        })
    }
}

/// Cartesian product of the axes, last axis varying fastest.
pub fn sweep_points(axes: &[SweepAxis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

fn set_dotted(value: &mut Value, key: &str, x: f64) -> Result<()> {
    let mut slot = value;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("sweep key {key:?}: `{part}` is not inside a table")))?
            .entry(part)
            .or_insert(Value::Null);
    }
    // Integer-valued keys (points, dimension, mode) must stay integers.
    *slot = match slot {
        Value::Number(n) if n.is_u64() || n.is_i64() => Value::from(x.round() as i64),
        _ => Value::from(x),
    };
    Ok(())
}

/// One row of the sweep table printed to stdout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub name: String,
    pub values: Vec<(String, f64)>,
    pub termination: Option<Termination>,
    pub classification: Option<BlowUpClass>,
    pub t_est: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    exit_code: i32,
}

/// Builds and runs every sweep point on a pool of `jobs` threads. Rows come
/// back in sweep order whatever the job count; outputs go under `root`
/// when given.
pub fn run_sweep(base: &ScenarioConfig, axes: &[SweepAxis], jobs: Option<usize>, root: Option<&Path>) -> Result<Vec<SweepRow>> {
    let template = serde_json::to_value(base)?;
    let points = sweep_points(axes);
    let width = points.len().to_string().len();
    let job = |(idx, point): (usize, &Vec<f64>)| -> SweepRow {
        let name = format!("{}-{:0width$}", base.name, idx);
        let values: Vec<(String, f64)> = axes.iter().map(|a| a.key.clone()).zip(point.iter().copied()).collect();
        let mut row = SweepRow {
            name: name.clone(),
            values: values.clone(),
            termination: None,
            classification: None,
            t_est: None,
            error: None,
            exit_code: 0,
        };
        let result = (|| -> Result<()> {
            let mut v = template.clone();
            for (key, x) in &values {
                set_dotted(&mut v, key, *x)?;
            }
            set_dotted_str(&mut v, "name", &name);
            let config = config_from_value(v, &name, false)?;
            let outcome = run_scenario(&config)?;
            if let Some(root) = root {
                write_outcome(root, &outcome)?;
            }
            row.exit_code = exit_code_for(&outcome.output.termination);
            row.classification = outcome.blowup_report.as_ref().map(|r| r.classification);
            row.t_est = outcome.blowup_report.as_ref().and_then(|r| r.t_est);
            row.termination = Some(outcome.output.termination);
            Ok(())
        })();
        if let Err(e) = result {
            row.exit_code = e.exit_code();
            row.error = Some(e.to_string());
        }
        row
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().enumerate().map(job).collect()))
}

fn set_dotted_str(value: &mut Value, key: &str, s: &str) {
    if let Some(obj) = value.as_object_mut() {
        obj.insert(key.into(), Value::String(s.into()));
    }
}

fn sweep(args: SweepArgs) -> Result<i32> {
    let base = args.source.load()?;
    let axes = args
        .vary
        .iter()
        .map(|s| SweepAxis::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let root = output_root(args.out.as_deref().or(base.output_dir.as_deref()));
    let rows = run_sweep(&base, &axes, args.jobs, Some(&root))?;
    print_json(&rows)?;
    Ok(rows.iter().map(|r| r.exit_code).max().unwrap_or(0))
}
