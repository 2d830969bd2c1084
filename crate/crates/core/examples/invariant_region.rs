//! Tracks a run in the `(zeta, w)` moment plane against the curve
//! `w = zeta^(1 - gamma)`, and shows the Hoelder bound `w z >= zeta^2`.

use gmshadow::diagnostics::region_state;
use gmshadow::scenario::{evaluate_hypotheses, preset_unchecked, run_scenario};

fn main() -> gmshadow::Result<()> {
    for name in ["region-blowup", "region-global"] {
        let config = preset_unchecked(name)?;
        let check = evaluate_hypotheses(&config)?;
        println!("{name}: hypotheses hold = {}", check.holds());
        for ineq in check.inequalities.iter().filter(|i| !i.holds()) {
            println!("  fails: {} (lhs {:.4e}, rhs {:.4e})", ineq.statement, ineq.lhs, ineq.rhs);
        }
        let outcome = run_scenario(&config)?;
        let records = &outcome.output.records;
        let stride = (records.len() / 8).max(1);
        for r in records.iter().step_by(stride).chain(records.last()) {
            let s = region_state(r.zeta, r.w, &config.params)?;
            println!(
                "  t = {:9.4}  zeta = {:.4e}  w = {:.4e}  in region {:5}  w*z/zeta^2 = {:.6}",
                r.t,
                r.zeta,
                r.w,
                s.in_region,
                r.w * r.z / (r.zeta * r.zeta)
            );
        }
        println!("  termination: {:?}", outcome.output.termination);
    }
    Ok(())
}
