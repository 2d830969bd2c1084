//! When `r = p + 1` the problem has a Lyapunov functional `J`. Its decay
//! matches `dJ/dt = -mean(u_t^2)`; a start with `J(u0) <= 0` blows up.

use gmshadow::diagnostics::dissipation_residuals;
use gmshadow::scenario::{preset, run_scenario};

fn main() -> gmshadow::Result<()> {
    for name in ["variational-global", "variational-blowup"] {
        let mut config = preset(name)?;
        config.time.t_end = config.time.t_end.min(5.0);
        let outcome = run_scenario(&config)?;
        let records = &outcome.output.records;
        let j0 = records[0].j.expect("r = p + 1");
        let j1 = records.last().and_then(|r| r.j).expect("r = p + 1");
        let rising = records.windows(2).filter(|w| w[1].j > w[0].j).count();
        let worst = dissipation_residuals(records).into_iter().fold(0.0, f64::max);
        println!("{name}");
        println!("  J: {j0:.6e} -> {j1:.6e} over {} records, {rising} record pairs where J rose", records.len());
        println!("  worst relative residual of the dissipation identity: {worst:.3e}");
        println!("  termination: {:?}", outcome.output.termination);
    }
    Ok(())
}
