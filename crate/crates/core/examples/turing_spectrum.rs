//! Linear instability of `u = 1`: the spectrum predicts the growth rate of
//! the first nonconstant mode, and a small perturbation grows at that rate.

use gmshadow::scenario::{preset, run_scenario};
use gmshadow::spectral::{linearized_spectrum, log_linear_rate, neumann_eigenpairs};

fn main() -> gmshadow::Result<()> {
    let mut config = preset("turing-instability")?;
    config.time.snapshot_times = (1..=10).map(|k| 0.5 * k as f64).collect();
    let grid = config.geometry.build()?;

    let spectrum = linearized_spectrum(&config.params, &grid, 6)?;
    for m in &spectrum.modes {
        println!(
            "mode {:2} {:<12} mu^2 = {:.6}  sigma = {:+.6}",
            m.mode,
            format!("{:?}", m.kind),
            m.mu_squared,
            m.growth_rate
        );
    }
    let sigma = spectrum.modes[0].growth_rate;

    let eig = neumann_eigenpairs(&grid, 2)?;
    let phi = &eig.eigenfunctions[1];
    let outcome = run_scenario(&config)?;
    let (times, amps): (Vec<f64>, Vec<f64>) = outcome
        .output
        .snapshots
        .iter()
        .filter(|s| s.t >= 1.0)
        .map(|s| (s.t, gmshadow::spectral::mode_amplitude(&grid, &s.field, 1.0, phi)))
        .unzip();
    let measured = log_linear_rate(&times, &amps)?;
    println!("predicted sigma {sigma:.5}, measured {measured:.5}, relative gap {:.2e}", (measured / sigma - 1.0).abs());
    Ok(())
}
