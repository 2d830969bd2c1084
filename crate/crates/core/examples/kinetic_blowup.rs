//! A spatially constant start reduces the PDE to the kinetics
//! `u' = -u + u^(p - r gamma)`; with `(3, 1, 1, 0)` and `u0 = 2` the exact
//! blow-up time is `ln 2`.

use gmshadow::model::integrate_kinetic;
use gmshadow::scenario::{preset, run_scenario};

fn main() -> gmshadow::Result<()> {
    let config = preset("ode-blowup")?;
    let outcome = run_scenario(&config)?;
    let oracle = integrate_kinetic(2.0, &config.params, 2.0, 1e-13)?;

    println!("termination: {:?}", outcome.output.termination);
    println!("kinetic oracle blow-up time: {:.12}", oracle.blowup_time.unwrap_or(f64::NAN));
    println!("ln 2                       : {:.12}", std::f64::consts::LN_2);
    if let Some(rep) = &outcome.blowup_report {
        println!(
            "fit: T = {:.12}  beta = {:.5} (kinetic rate 1/(p - r gamma - 1) = {:.5})  r2 = {:.6}",
            rep.t_est.unwrap_or(f64::NAN),
            rep.beta_fit.unwrap_or(f64::NAN),
            1.0 / (config.params.kinetic_exponent() - 1.0),
            rep.fit_r2.unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
