//! Regime classification for a few parameter sets.
//!
//! ```text
//! cargo run --example classify
//! ```

use gmshadow::model::{classify_regime, HypothesisContext, ModelParams};

fn main() -> gmshadow::Result<()> {
    let cases = [
        ("Turing, interval", (2.0, 1.0, 2.0, 0.0), None),
        ("anti-Turing kinetics", (3.0, 1.0, 1.0, 0.0), None),
        ("variational, N=3", (3.0, 0.7, 4.0, 0.0), Some(3)),
        ("diffusion-driven, N=3", (4.0, 3.5, 1.0, 0.0), Some(3)),
    ];
    for (label, (p, q, r, s), dimension) in cases {
        let params = ModelParams::new(p, q, r, s)?;
        let report = classify_regime(&params, HypothesisContext { dimension });
        let holding: Vec<&str> = report
            .theorem_tags
            .iter()
            .filter(|t| t.holds())
            .map(|t| t.tag.as_str())
            .collect();
        println!(
            "{label:<24} gamma={:.3} p-r*gamma={:+.3} turing={} anti={} tags={holding:?}",
            params.gamma(),
            report.kinetic_exponent,
            report.turing,
            report.anti_turing,
        );
    }
    Ok(())
}
