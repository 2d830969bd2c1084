use proptest::prelude::*;

use gmshadow::diagnostics::{compute_record, dissipation_residuals, fd_tolerance, DEFAULT_DELTA};
use gmshadow::grid::{average_power, laplacian_apply, Field, Geometry, Grid};
use gmshadow::initial::{spiky_data, SpikySpec};
use gmshadow::integrator::{run, IntegratorConfig, RunSettings, Scheme, Termination};
use gmshadow::model::{classify_regime, integrate_kinetic, kinetic_rhs, HypothesisContext, ModelParams};
use gmshadow::scenario::{preset, run_scenario};
use gmshadow::spectral::{linearized_spectrum, ModeKind};

fn params() -> impl Strategy<Value = ModelParams> {
    (1.01f64..6.0, 0.05f64..4.0, 0.1f64..6.0, -0.9f64..3.0)
        .prop_map(|(p, q, r, s)| ModelParams::new(p, q, r, s).unwrap())
}

fn geometry() -> impl Strategy<Value = Geometry> {
    prop_oneof![
        (0.5f64..7.0).prop_map(|length| Geometry::Interval { length }),
        (1u32..=4).prop_map(|dimension| Geometry::Ball { dimension }),
    ]
}

/// A grid and a positive field on it built from a few random cosines.
fn grid_and_field() -> impl Strategy<Value = (Grid, Field)> {
    (geometry(), 17usize..200, prop::collection::vec(-0.3f64..0.3, 4), 0.5f64..3.0).prop_map(
        |(geo, m, coef, base)| {
            let g = Grid::new(geo, m).unwrap();
            let ext = geo.extent();
            let u = Field::from_fn(&g, |x| {
                base + coef
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * (std::f64::consts::PI * (k + 1) as f64 * x / ext).cos())
                    .sum::<f64>()
                    * base
            })
            .unwrap();
            (g, u)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn regime_trichotomy(prm in params(), dim in prop::option::of(1u32..6)) {
        let rep = classify_regime(&prm, HypothesisContext { dimension: dim });
        let flags = [rep.turing, rep.anti_turing, rep.boundary];
        prop_assert_eq!(flags.iter().filter(|&&f| f).count(), 1);
    }

    #[test]
    fn kinetic_equilibrium(prm in params()) {
        prop_assert_eq!(kinetic_rhs(1.0, &prm).unwrap(), 0.0);
    }

    #[test]
    fn discrete_compatibility((g, u) in grid_and_field()) {
        let lu = laplacian_apply(&g, &u);
        let avg: f64 = g.weights().iter().zip(lu.values()).map(|(w, l)| w * l).sum();
        prop_assert!(avg.abs() <= 1e-10 * u.max(), "avg = {avg:e}");
    }

    #[test]
    fn hoelder_between_powers((g, u) in grid_and_field(), lo in 0.2f64..3.0, span in 0.0f64..3.0, t in 0.0f64..1.0) {
        let hi = lo + span;
        let mu = lo + t * span;
        let a = average_power(&g, &u, hi).unwrap();
        let b = average_power(&g, &u, mu).unwrap().powf(hi / mu);
        prop_assert!(a >= b * (1.0 - 1e-12), "{a} < {b}");
    }

    #[test]
    fn moment_hoelder_invariant((g, u) in grid_and_field(), prm in params()) {
        let rec = compute_record(&g, &prm, &u, 0.0, DEFAULT_DELTA).unwrap();
        prop_assert!(rec.w * rec.z >= rec.zeta * rec.zeta * (1.0 - 1e-10));
    }

    #[test]
    fn constant_moments_are_equal(c in 0.1f64..10.0, prm in params(), geo in geometry()) {
        let g = Grid::new(geo, 33).unwrap();
        let rec = compute_record(&g, &prm, &Field::constant(&g, c), 0.0, DEFAULT_DELTA).unwrap();
        prop_assert!((rec.w * rec.z - rec.zeta * rec.zeta).abs() <= 1e-13 * rec.zeta * rec.zeta);
    }

    #[test]
    fn instability_criterion_matches_spectrum(prm in params(), length in 0.5f64..12.0) {
        let g = Grid::new(Geometry::Interval { length }, 129).unwrap();
        let spec = linearized_spectrum(&prm, &g, 6).unwrap();
        let any_unstable = spec
            .modes
            .iter()
            .any(|m| m.kind == ModeKind::Nonconstant && m.growth_rate > 0.0);
        prop_assert_eq!(any_unstable, spec.instability_criterion);
        for m in spec.modes.iter().filter(|m| m.kind == ModeKind::Nonconstant) {
            prop_assert!((m.growth_rate - (prm.p() - 1.0 - m.mu_squared)).abs() <= 1e-8);
        }
    }

    #[test]
    fn turing_kinetics_relax(p in 1.1f64..5.0, r in 0.5f64..4.0, kappa in 0.05f64..0.9, u0 in 0.05f64..20.0) {
        // Kinetic exponent p - r gamma = kappa < 1: the Turing side.
        let gamma = (p - kappa) / r;
        let prm = ModelParams::new(p, gamma, r, 0.0).unwrap();
        let mut last = f64::INFINITY;
        for t_end in [1.0, 4.0, 16.0] {
            let tr = integrate_kinetic(u0, &prm, t_end, 1e-12).unwrap();
            prop_assert!(tr.blowup_time.is_none());
            let gap = (tr.final_value() - 1.0).abs();
            prop_assert!(gap <= last || gap < 1e-12, "{gap} > {last}");
            last = gap;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_preserve_positivity_and_order(
        amp in 0.05f64..0.6,
        base in 0.6f64..1.6,
        dim in 1u32..=3,
        scheme in prop_oneof![Just(Scheme::Explicit), Just(Scheme::ImexCn)],
        prm in (1.5f64..3.5, 0.2f64..1.5, 0.5f64..3.0).prop_map(|(p, q, r)| ModelParams::new(p, q, r, 0.0).unwrap()),
    ) {
        let g = Grid::new(Geometry::Ball { dimension: dim }, 33).unwrap();
        // Radially nonincreasing start.
        let u0 = Field::from_fn(&g, |x| base * (1.0 + amp * (std::f64::consts::PI * x).cos())).unwrap();
        let cfg = IntegratorConfig { scheme, overflow_guard: 1e6, ..Default::default() };
        let settings = RunSettings { t_end: 0.5, ..Default::default() };
        let min0 = u0.min();
        let out = run(&g, &prm, u0.clone(), &cfg, &settings, DEFAULT_DELTA).unwrap();
        prop_assert!(!out.termination.is_failure(), "{:?}", out.termination);
        for r in &out.records {
            prop_assert!(r.u_min >= (1.0 - 10.0 * cfg.step_tol) * min0 * (-r.t).exp());
        }
        for s in &out.snapshots {
            let v = s.field.values();
            for w in v.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-10 * v[0], "t = {}", s.t);
            }
        }
        // Determinism: a second run is bit-identical.
        let again = run(&g, &prm, u0, &cfg, &settings, DEFAULT_DELTA).unwrap();
        prop_assert_eq!(out.records, again.records);
        prop_assert_eq!(out.final_state.field.values(), again.final_state.field.values());
    }
}

#[test]
fn closed_form_blowup_times() {
    let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
    for u0 in [1.5f64, 2.0, 4.0] {
        let t = integrate_kinetic(u0, &prm, 5.0, 1e-13).unwrap().blowup_time.unwrap();
        let exact = (u0 / (u0 - 1.0)).ln();
        assert!((t - exact).abs() <= 1e-6, "u0 = {u0}: {t} vs {exact}");
    }
}

#[test]
fn schemes_agree_on_smooth_run() {
    let g = Grid::new(Geometry::Ball { dimension: 2 }, 65).unwrap();
    let prm = ModelParams::new(2.0, 0.5, 2.0, 0.0).unwrap();
    let u0 = Field::from_fn(&g, |x| 1.0 + 0.3 * (std::f64::consts::PI * x).cos()).unwrap();
    let settings = RunSettings { t_end: 1.0, ..Default::default() };
    let end = |scheme, step_tol| {
        let cfg = IntegratorConfig {
            scheme,
            step_tol,
            ..Default::default()
        };
        let out = run(&g, &prm, u0.clone(), &cfg, &settings, DEFAULT_DELTA).unwrap();
        assert_eq!(out.termination, Termination::HorizonReached { t: 1.0 });
        out.final_state.field.into_values()
    };
    let a = end(Scheme::Explicit, 1e-9);
    let b = end(Scheme::ImexCn, 1e-9);
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-6, "gap = {gap:e}");
}

#[test]
fn dissipation_identity_on_variational_runs() {
    for name in ["variational-global", "variational-blowup"] {
        let mut c = preset(name).unwrap();
        c.time.t_end = c.time.t_end.min(2.0);
        let o = run_scenario(&c).unwrap();
        let recs = &o.output.records;
        assert!(recs.len() > 10);
        for (k, pair) in recs.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if b.t <= a.t {
                continue;
            }
            let r = dissipation_residuals(pair)[0];
            let tol = fd_tolerance(a, b, a.j.unwrap(), b.j.unwrap(), c.integrator.step_tol);
            assert!(r <= tol, "{name}: pair {k} residual {r:e} > {tol:e}");
        }
    }
}

#[test]
fn spiky_average_gap_shrinks_like_delta_squared() {
    // (N, m, a) = (3, 1, 1): the mean tends to N/(N - m a) = 3/2 like delta^2.
    let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
    let g = Grid::new(Geometry::Ball { dimension: 3 }, 4097).unwrap();
    let gaps: Vec<f64> = [0.08, 0.04, 0.02]
        .iter()
        .map(|&delta| {
            let spec = SpikySpec::new(1.0, delta, &prm).unwrap();
            let phi = spiky_data(&g, &prm, &spec).unwrap();
            (average_power(&g, &phi, 1.0).unwrap() - 1.5).abs()
        })
        .collect();
    for w in gaps.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order} from {gaps:?}");
    }
}
