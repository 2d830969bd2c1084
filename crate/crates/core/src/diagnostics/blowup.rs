use serde::Serialize;

use super::DiagnosticsRecord;
use crate::grid::{Field, Grid};
use crate::initial::SpikySpec;
use crate::integrator::Snapshot;
use crate::model::ModelParams;
use crate::stats::{golden_section, linear_fit, LinearFit};
use crate::{Error, Result};

/// Radius of the probe that must stay bounded under single-point blow-up.
pub const PROBE_RADIUS: f64 = 0.25;

const SCAN_POINTS: usize = 160;
const GOLDEN_ITERATIONS: usize = 200;
/// Growth of `max u` below which a run is classified as showing no growth.
const GROWTH_FLOOR: f64 = 10.0;
const PROBE_VARIATION_LIMIT: f64 = 10.0;
const PEAK_GROWTH_MIN: f64 = 1e3;
const MOMENT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    pub overflow_guard: f64,
    /// Window starts once `max u` exceeds this multiple of its initial value.
    pub lower_factor: f64,
    pub min_r2: f64,
    pub min_points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            overflow_guard: 1e10,
            lower_factor: 1e2,
            min_r2: 0.99,
            min_points: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowUpClass {
    FiniteTime,
    GrowthNoFit,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinglePointEvidence {
    /// Argmax stays at the blow-up point over the late half of the run.
    pub argmax_fixed: bool,
    pub argmax_drift: f64,
    /// Max over snapshots and nodes of `rho^N u / mean u` (ball only).
    pub moment_ratio: Option<f64>,
    pub moment_bound_ok: Option<bool>,
    pub probe_rho: f64,
    /// Max over min of `u(probe_rho)` across snapshots.
    pub probe_variation: f64,
    /// Growth of the peak value across snapshots.
    pub peak_growth: f64,
    pub probe_bounded: bool,
    pub single_point: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileFit {
    /// Slope of `log u` against `log(1/rho)`.
    pub power_slope: f64,
    pub power_residual: f64,
    pub power_prediction: f64,
    /// Slope of `log u` against `log(|log rho| / rho^2)`.
    pub log_slope: f64,
    pub log_residual: f64,
    pub log_prediction: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowUpReport {
    pub detected: bool,
    pub t_est: Option<f64>,
    pub beta_fit: Option<f64>,
    /// `1/(p - 1)`.
    pub beta_theory: f64,
    pub c_fit: Option<f64>,
    pub fit_window: Option<[f64; 2]>,
    pub fit_r2: Option<f64>,
    pub fit_points: usize,
    pub single_point: Option<SinglePointEvidence>,
    pub profile_slope: Option<f64>,
    pub profile: Option<ProfileFit>,
    pub classification: BlowUpClass,
    pub notes: Vec<String>,
}

struct RateFit {
    t_est: f64,
    fit: LinearFit,
    at_upper_edge: bool,
}

/// Best `(T, beta, C)` for `log u = beta * (-log(T - t)) + log C`.
fn fit_rate(points: &[(f64, f64)]) -> RateFit {
    let t_a = points[0].0;
    let t_b = points[points.len() - 1].0;
    let span = t_b - t_a;
    let lag: Vec<f64> = points.iter().map(|&(t, _)| t_b - t).collect();
    let fit_at = |log_s: f64| {
        let s = log_s.exp();
        let xy: Vec<(f64, f64)> = lag
            .iter()
            .zip(points)
            .map(|(&l, &(_, y))| (-(l + s).ln(), y))
            .collect();
        linear_fit(&xy)
    };
    let lo = (4.0 * t_b.abs() * f64::EPSILON).max(span * 1e-14).max(f64::MIN_POSITIVE).ln();
    let hi = span.ln();
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .map(|(k, &x)| (k, fit_at(x).ssr))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(SCAN_POINTS - 1)];
    let log_s = golden_section(|x| fit_at(x).ssr, a, b, GOLDEN_ITERATIONS);
    let fit = fit_at(log_s);
    RateFit {
        t_est: t_b + log_s.exp(),
        fit,
        at_upper_edge: hi - log_s < 1e-6 * (hi - lo),
    }
}

/// Rate fit of `max u` over the late window `[lower_factor * u_max(0), guard]`.
pub fn fit_blowup(records: &[DiagnosticsRecord], params: &ModelParams, config: &FitConfig) -> Result<BlowUpReport> {
    let first = records
        .first()
        .ok_or_else(|| Error::Inconclusive("empty trajectory".into()))?;
    let last = records.last().unwrap();
    let u0 = first.u_max;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for r in records {
        if r.u_max >= config.lower_factor * u0 && r.u_max <= config.overflow_guard {
            match points.last_mut() {
                Some(pt) if pt.0 >= r.t => *pt = (r.t, r.u_max.ln()),
                _ => points.push((r.t, r.u_max.ln())),
            }
        }
    }
    let mut report = BlowUpReport {
        detected: false,
        t_est: None,
        beta_fit: None,
        beta_theory: 1.0 / (params.p() - 1.0),
        c_fit: None,
        fit_window: None,
        fit_r2: None,
        fit_points: points.len(),
        single_point: None,
        profile_slope: None,
        profile: None,
        classification: BlowUpClass::None,
        notes: Vec::new(),
    };
    let grew = last.u_max >= GROWTH_FLOOR * u0;
    if points.is_empty() {
        if grew {
            report.classification = BlowUpClass::GrowthNoFit;
            report.notes.push("max u never entered the fit window".into());
            add_type_two_note(records, &mut report);
        }
        return Ok(report);
    }
    if points.len() < config.min_points {
        return Err(Error::Inconclusive(format!(
            "fit window holds {} records, need {}",
            points.len(),
            config.min_points
        )));
    }
    let rate = fit_rate(&points);
    let window = [points[0].0, points[points.len() - 1].0];
    report.t_est = Some(rate.t_est);
    report.beta_fit = Some(rate.fit.slope);
    report.c_fit = Some(rate.fit.intercept.exp());
    report.fit_window = Some(window);
    report.fit_r2 = Some(rate.fit.r2);
    report.detected = rate.fit.r2 >= config.min_r2 && rate.fit.slope > 0.0 && !rate.at_upper_edge;
    if report.detected {
        report.classification = BlowUpClass::FiniteTime;
    } else {
        report.classification = BlowUpClass::GrowthNoFit;
        if rate.at_upper_edge {
            report.notes.push("best blow-up time lies beyond the fit window".into());
        }
        add_type_two_note(records, &mut report);
    }
    Ok(report)
}

fn add_type_two_note(records: &[DiagnosticsRecord], report: &mut BlowUpReport) {
    let (first, last) = (records[0].k_of_t, records[records.len() - 1].k_of_t);
    if last < 1e-3 * first {
        report
            .notes
            .push(format!("K(t) decays from {first:.3e} to {last:.3e}; growth may be of type II"));
    }
}

/// Evidence that the blow-up set is a single point.
pub fn blowup_set_check(grid: &Grid, snapshots: &[Snapshot], records: &[DiagnosticsRecord]) -> Result<SinglePointEvidence> {
    if snapshots.len() < 2 || records.is_empty() {
        return Err(Error::Inconclusive("need at least two snapshots".into()));
    }
    let ball = grid.geometry().is_ball();
    let t_final = records[records.len() - 1].t;
    let late = records.iter().filter(|r| r.t >= 0.5 * t_final);
    let anchor = if ball { 0.0 } else { records[records.len() - 1].argmax_rho };
    let argmax_drift = late.map(|r| (r.argmax_rho - anchor).abs()).fold(0.0, f64::max);
    let argmax_fixed = argmax_drift < 0.5 * grid.spacing();

    let (moment_ratio, moment_bound_ok) = if ball {
        let n = grid.dimension() as i32;
        let mut worst = 0.0f64;
        for s in snapshots {
            let mean = grid.mean_of(s.field.values());
            for (rho, u) in grid.nodes().iter().zip(s.field.values()) {
                worst = worst.max(rho.powi(n) * u / mean);
            }
        }
        (Some(worst), Some(worst <= 1.0 + MOMENT_SLACK))
    } else {
        (None, None)
    };

    let extent = grid.geometry().extent();
    let probe_rho = if ball {
        PROBE_RADIUS
    } else if anchor + PROBE_RADIUS * extent <= extent {
        anchor + PROBE_RADIUS * extent
    } else {
        anchor - PROBE_RADIUS * extent
    };
    let probe = grid.nearest_node(probe_rho);
    let peak = grid.nearest_node(anchor);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for s in snapshots {
        let v = s.field.values()[probe];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let probe_variation = hi / lo;
    let peak_growth = snapshots[snapshots.len() - 1].field.values()[peak] / snapshots[0].field.values()[peak];
    let probe_bounded = probe_variation < PROBE_VARIATION_LIMIT && peak_growth >= PEAK_GROWTH_MIN;
    let note = if peak_growth < PEAK_GROWTH_MIN {
        Some(format!("peak grew only by {peak_growth:.3e}"))
    } else if probe_variation >= PROBE_VARIATION_LIMIT {
        Some("whole-domain blow-up".to_string())
    } else {
        None
    };
    Ok(SinglePointEvidence {
        argmax_fixed,
        argmax_drift,
        moment_ratio,
        moment_bound_ok,
        probe_rho: grid.nodes()[probe],
        probe_variation,
        peak_growth,
        probe_bounded,
        single_point: argmax_fixed && moment_bound_ok.unwrap_or(true) && probe_bounded,
        note,
    })
}

/// Power-law and log-corrected fits of the radial profile over
/// `rho in [4h, 0.1]`.
pub fn profile_extract(grid: &Grid, field: &Field, params: &ModelParams) -> Result<ProfileFit> {
    if !grid.geometry().is_ball() {
        return Err(Error::Domain("profile extraction needs ball geometry".into()));
    }
    if !field.is_on(grid) {
        return Err(Error::Domain("field is bound to a different grid".into()));
    }
    let lo = 4.0 * grid.spacing();
    let samples: Vec<(f64, f64)> = grid
        .nodes()
        .iter()
        .zip(field.values())
        .filter(|(&rho, _)| rho >= lo && rho <= 0.1)
        .map(|(&rho, &u)| (rho, u.ln()))
        .collect();
    if samples.len() < 5 {
        return Err(Error::Inconclusive(format!(
            "only {} nodes in the profile range [{lo:.3e}, 0.1]",
            samples.len()
        )));
    }
    let rms = |f: &LinearFit| (f.ssr / samples.len() as f64).sqrt();
    let power = linear_fit(&samples.iter().map(|&(r, y)| (-r.ln(), y)).collect::<Vec<_>>());
    let logc = linear_fit(
        &samples
            .iter()
            .map(|&(r, y)| ((r.ln().abs() / (r * r)).ln(), y))
            .collect::<Vec<_>>(),
    );
    Ok(ProfileFit {
        power_slope: power.slope,
        power_residual: rms(&power),
        power_prediction: 2.0 / (params.p() - 1.0),
        log_slope: logc.slope,
        log_residual: rms(&logc),
        log_prediction: 1.0 / (params.p() - 1.0),
        points: samples.len(),
    })
}

/// Upper bound on the blow-up time inside the invariant region,
/// `zeta0^(gamma-1) / ((1-gamma) c0 r)` with `c0 = 1/w0 - 1/zeta0^(1-gamma)`.
/// `None` when `gamma` is outside `(0, 1)` or `c0 <= 0`.
pub fn region_blowup_time_bound(first: &DiagnosticsRecord, params: &ModelParams) -> Option<f64> {
    let gamma = params.gamma();
    if !(gamma > 0.0 && gamma < 1.0) {
        return None;
    }
    let c0 = 1.0 / first.w - 1.0 / first.zeta.powf(1.0 - gamma);
    (c0 > 0.0).then(|| first.zeta.powf(gamma - 1.0) / ((1.0 - gamma) * c0 * params.r()))
}

/// Blow-up time bound for spiky data, `(delta^a / (lambda (1 + a/2)))^(p-1) / (p-1)`.
pub fn spiky_blowup_time_bound(spec: &SpikySpec, params: &ModelParams) -> f64 {
    let p = params.p();
    (spec.delta().powf(spec.a()) / (spec.lambda() * (1.0 + 0.5 * spec.a()))).powf(p - 1.0) / (p - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    fn series(points: &[(f64, f64)]) -> Vec<DiagnosticsRecord> {
        points
            .iter()
            .map(|&(t, u)| DiagnosticsRecord {
                t,
                dt: 0.0,
                u_mean: u,
                u_max: u,
                u_min: u,
                argmax_rho: 0.0,
                zeta: u,
                z: 1.0,
                w: u,
                j: None,
                i: None,
                u_neg_delta_avg: 1.0,
                k_of_t: 1.0,
                ut_max: 0.0,
                ut_l2sq: 0.0,
            })
            .collect()
    }

    #[test]
    fn synthetic_rate_is_exact() {
        let mut pts = vec![(0.0, 1.0)];
        for k in 16..=60 {
            let t = 1.0 - 10f64.powf(-k as f64 / 4.0);
            pts.push((t, (1.0 - t).powf(-0.5)));
        }
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        let rep = fit_blowup(&series(&pts), &prm, &FitConfig::default()).unwrap();
        assert!(rep.detected);
        assert_eq!(rep.classification, BlowUpClass::FiniteTime);
        assert!((rep.t_est.unwrap() - 1.0).abs() < 1e-6);
        assert!((rep.beta_fit.unwrap() - 0.5).abs() < 1e-6);
        assert!((rep.c_fit.unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn flat_series_has_no_blowup() {
        let pts: Vec<_> = (0..50).map(|k| (k as f64, 1.0)).collect();
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        let rep = fit_blowup(&series(&pts), &prm, &FitConfig::default()).unwrap();
        assert!(!rep.detected);
        assert_eq!(rep.classification, BlowUpClass::None);
    }

    #[test]
    fn exponential_growth_is_not_finite_time() {
        let pts: Vec<_> = (0..200).map(|k| (k as f64 * 0.2, (k as f64 * 0.2).exp())).collect();
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        let rep = fit_blowup(&series(&pts), &prm, &FitConfig::default()).unwrap();
        assert!(!rep.detected, "{rep:?}");
        assert_eq!(rep.classification, BlowUpClass::GrowthNoFit);
    }

    #[test]
    fn short_window_is_inconclusive() {
        let pts = [(0.0, 1.0), (0.9, 200.0), (0.99, 2000.0)];
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            fit_blowup(&series(&pts), &prm, &FitConfig::default()),
            Err(Error::Inconclusive(_))
        ));
    }

    fn ball() -> Grid {
        Grid::new(Geometry::Ball { dimension: 3 }, 4097).unwrap()
    }

    #[test]
    fn power_profile_slope() {
        let g = ball();
        let prm = ModelParams::new(4.0, 3.5, 1.0, 0.0).unwrap();
        let f = Field::from_fn(&g, |r| r.max(1e-6).powf(-2.0 / 3.0)).unwrap();
        let fit = profile_extract(&g, &f, &prm).unwrap();
        assert!((fit.power_slope - 2.0 / 3.0).abs() < 1e-3);
        assert!((fit.power_prediction - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn log_corrected_profile_prefers_log_fit() {
        let g = ball();
        let prm = ModelParams::new(4.0, 3.5, 1.0, 0.0).unwrap();
        let f = Field::from_fn(&g, |r| {
            let r = r.max(1e-6);
            (r.ln().abs() / (r * r)).powf(1.0 / 3.0)
        })
        .unwrap();
        let fit = profile_extract(&g, &f, &prm).unwrap();
        assert!(fit.log_residual <= fit.power_residual);
        assert!((fit.log_slope - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn spiky_bound_value() {
        let prm = ModelParams::new(4.0, 3.5, 1.0, 0.0).unwrap();
        let spec = SpikySpec::new(0.05, 0.02, &prm).unwrap();
        let a: f64 = 2.0 / 3.0;
        let expected = (0.02f64.powf(a) / (0.05 * (1.0 + a / 2.0))).powi(3) / 3.0;
        assert!((spiky_blowup_time_bound(&spec, &prm) - expected).abs() < 1e-15);
        assert!(expected > 0.4 && expected < 0.5);
    }

    #[test]
    fn region_bound_requires_positive_gap() {
        let prm = ModelParams::new(3.0, 0.5, 1.0, 0.0).unwrap();
        let mut rec = series(&[(0.0, 1.0)]).remove(0);
        rec.zeta = 4.0;
        rec.w = 1.0;
        // c0 = 1 - 1/2 = 1/2; bound = 4^{-1/2} / (0.5 * 0.5 * 1) = 2.
        assert!((region_blowup_time_bound(&rec, &prm).unwrap() - 2.0).abs() < 1e-14);
        rec.w = 3.0;
        assert!(region_blowup_time_bound(&rec, &prm).is_none());
    }
}
