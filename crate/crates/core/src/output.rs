//! CSV and JSON writers for run artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{BlowUpReport, DiagnosticsRecord, Violation};
use crate::grid::{Field, Grid};
use crate::integrator::Termination;
use crate::model::{ModelParams, RegimeReport};
use crate::scenario::Outcome;
use crate::{Error, Result};

pub const TRAJECTORY_HEADER: &str = "t,dt,u_mean,u_max,u_min,argmax_rho,zeta,z,w,J,I,u_neg_delta_avg,K_of_t";

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "GMSHADOW_OUT";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `rho,u` rows.
pub fn write_snapshot_csv(path: &Path, grid: &Grid, field: &Field) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "rho,u").map_err(io)?;
    for (x, u) in grid.nodes().iter().zip(field.values()) {
        writeln!(w, "{x:.16e},{u:.16e}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

pub fn write_trajectory_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{TRAJECTORY_HEADER}").map_err(io)?;
    for r in records {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e}",
            r.t,
            r.dt,
            r.u_mean,
            r.u_max,
            r.u_min,
            r.argmax_rho,
            r.zeta,
            r.z,
            r.w,
            opt(r.j),
            opt(r.i),
            r.u_neg_delta_avg,
            r.k_of_t
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub path: PathBuf,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub params: ModelParams,
    pub regime: RegimeReport,
    pub termination: Termination,
    pub records_path: PathBuf,
    pub snapshots: Vec<SnapshotEntry>,
    pub blowup_report: Option<BlowUpReport>,
    pub violations: Vec<Violation>,
}

/// Resolves the output root: explicit value, then the environment, then
/// `runs`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Writes `<root>/<scenario>/{trajectory.csv, snapshots/, summary.json}`.
pub fn write_outcome(root: &Path, outcome: &Outcome) -> Result<Summary> {
    let dir = root.join(&outcome.config.name);
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    let records_path = dir.join("trajectory.csv");
    write_trajectory_csv(&records_path, &outcome.output.records)?;
    let mut snapshots = Vec::new();
    for s in &outcome.output.snapshots {
        let path = snap_dir.join(format!("t={}.csv", s.t));
        write_snapshot_csv(&path, &outcome.grid, &s.field)?;
        snapshots.push(SnapshotEntry { t: s.t, path });
    }
    let summary = Summary {
        scenario: outcome.config.name.clone(),
        params: outcome.config.params,
        regime: outcome.regime.clone(),
        termination: outcome.output.termination.clone(),
        records_path,
        snapshots,
        blowup_report: outcome.blowup_report.clone(),
        violations: outcome.violations.clone(),
    };
    let path = dir.join("summary.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
