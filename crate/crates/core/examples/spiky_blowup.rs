//! Diffusion-driven blow-up from spiky radial data in a ball: the kinetics
//! are stable, the PDE blows up at the origin with the type-I rate.
//!
//! Runs for about ten seconds in release mode.

use gmshadow::diagnostics::spiky_blowup_time_bound;
use gmshadow::initial::{InitialSpec, SpikySpec};
use gmshadow::model::integrate_kinetic;
use gmshadow::scenario::{preset, run_scenario};

fn main() -> gmshadow::Result<()> {
    let config = preset("ddi-spiky")?;
    let (grid, u0) = config.build()?;
    let mean0 = grid.mean_of(u0.values());
    let kinetic = integrate_kinetic(mean0, &config.params, 30.0, 1e-12)?;
    println!("mean(u0) = {mean0:.6}; kinetics from it reach {:.8} at t = 30", kinetic.final_value());

    let InitialSpec::Spiky { lambda, delta } = config.initial else {
        unreachable!("ddi-spiky uses spiky data")
    };
    let bound = spiky_blowup_time_bound(&SpikySpec::new(lambda, delta, &config.params)?, &config.params);

    let outcome = run_scenario(&config)?;
    println!("termination: {:?}", outcome.output.termination);
    let rep = outcome.blowup_report.expect("fit runs on every completed scenario");
    println!("classification {:?}", rep.classification);
    println!("T_est {:.6e} (upper bound {bound:.4})", rep.t_est.unwrap_or(f64::NAN));
    println!(
        "beta {:.5} vs 1/(p-1) = {:.5}, r2 {:.8}",
        rep.beta_fit.unwrap_or(f64::NAN),
        rep.beta_theory,
        rep.fit_r2.unwrap_or(f64::NAN)
    );
    if let Some(sp) = &rep.single_point {
        println!(
            "single point: {} (argmax fixed {}, probe variation {:.4}, peak growth {:.3e})",
            sp.single_point, sp.argmax_fixed, sp.probe_variation, sp.peak_growth
        );
    }
    if let Some(slope) = rep.profile_slope {
        println!("final profile u ~ rho^-{slope:.3}");
    }
    for note in &rep.notes {
        println!("note: {note}");
    }
    Ok(())
}
