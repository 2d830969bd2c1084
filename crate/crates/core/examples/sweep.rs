//! Parameter sweep over the homogeneous start value and `q`, run on a
//! thread pool. The rows are identical for any number of jobs.

use gmshadow::cli::{run_sweep, SweepAxis};
use gmshadow::scenario::preset;

fn main() -> gmshadow::Result<()> {
    let base = preset("ode-blowup")?;
    let axes = [SweepAxis::parse("initial.value=0.8:1.6:5")?, SweepAxis::parse("params.q=0.5:1.0:2")?];
    let rows = run_sweep(&base, &axes, Some(4), None)?;
    for row in &rows {
        let values: Vec<String> = row.values.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
        match &row.error {
            Some(e) => println!("{:<16} {:<34} error: {e}", row.name, values.join(" ")),
            None => println!(
                "{:<16} {:<34} {:<12} T_est={}",
                row.name,
                values.join(" "),
                row.classification.map_or("-".into(), |c| format!("{c:?}")),
                row.t_est.map_or("-".into(), |t| format!("{t:.6}"))
            ),
        }
    }
    assert_eq!(rows, run_sweep(&base, &axes, Some(1), None)?);
    Ok(())
}
