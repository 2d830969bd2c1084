//! Loads a TOML scenario layered on a preset, runs it and writes the
//! trajectory, snapshots and summary under a temporary directory (or the
//! directory given as the first argument).

use std::path::PathBuf;

use gmshadow::output::write_outcome;
use gmshadow::scenario::{load_config, run_scenario};

const SCENARIO: &str = r#"
name = "small-rho-coarse"
preset = "small-rho-global"

[geometry]
points = 65

[time]
t_end = 5.0
record_cadence = 10
snapshot_times = [1.0, 2.5]
"#;

fn main() -> gmshadow::Result<()> {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let root = std::env::args().nth(1).map_or_else(|| scratch.path().to_path_buf(), PathBuf::from);
    let path = scratch.path().join("scenario.toml");
    std::fs::write(&path, SCENARIO).expect("write scenario");

    let config = load_config(&path)?;
    println!("{} on {:?} with {} points", config.name, config.geometry.kind, config.geometry.points);
    let outcome = run_scenario(&config)?;
    let summary = write_outcome(&root, &outcome)?;
    println!("termination: {:?}", summary.termination);
    println!("trajectory: {}", summary.records_path.display());
    for s in &summary.snapshots {
        println!("snapshot t = {}: {}", s.t, s.path.display());
    }
    Ok(())
}
