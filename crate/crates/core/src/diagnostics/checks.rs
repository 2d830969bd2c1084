use serde::Serialize;

use super::DiagnosticsRecord;
use crate::model::ModelParams;
use crate::{Error, Result};

/// Fraction of the records that defines the "early" window for the
/// negative-moment bound.
const EARLY_FRACTION: f64 = 0.1;
const NEG_MOMENT_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// `d(mean u)/dt >= -mean u + (mean u)^(p - r gamma)`.
    MassInequality,
    /// `dJ/dt <= 0` when `r = p + 1`.
    Dissipation,
    /// Mean of `u^-delta` stays near its early maximum.
    NegativeMoment,
    /// `e^t * mean u` is nondecreasing.
    ScaledMean,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: CheckKind,
    /// Index of the later record of the offending pair.
    pub index: usize,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
}

/// Finite-difference tolerance between two records:
/// `10 * max(1, |a|, |b|) * max(dt^2, step_tol / spacing)`.
pub fn fd_tolerance(prev: &DiagnosticsRecord, next: &DiagnosticsRecord, a: f64, b: f64, step_tol: f64) -> f64 {
    let spacing = next.t - prev.t;
    let dt = prev.dt.max(next.dt);
    10.0 * 1f64.max(a.abs()).max(b.abs()) * (dt * dt).max(step_tol / spacing)
}

/// The mass inequality holds when some `mu` in `[max(1, r), p]` exists and
/// `p - r gamma >= 0`.
fn mass_inequality_applies(params: &ModelParams) -> bool {
    params.p() >= params.r().max(1.0) && params.kinetic_exponent() >= 0.0
}

/// Runs the finite-difference monotonicity checks over consecutive records.
pub fn check_monotone_bounds(
    records: &[DiagnosticsRecord],
    params: &ModelParams,
    step_tol: f64,
) -> Result<Vec<Violation>> {
    if records.len() < 3 {
        return Err(Error::Inconclusive(format!(
            "monotonicity checks need at least 3 records, got {}",
            records.len()
        )));
    }
    let kappa = params.kinetic_exponent();
    let mass = mass_inequality_applies(params);
    let early = ((records.len() as f64 * EARLY_FRACTION).ceil() as usize).max(1);
    let neg_bound = records[..early]
        .iter()
        .map(|r| r.u_neg_delta_avg)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    let mut push = |check, index: usize, value: f64, bound: f64| {
        out.push(Violation {
            check,
            index,
            t: records[index].t,
            value,
            bound,
        })
    };
    for (k, pair) in records.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let spacing = b.t - a.t;
        if !(spacing > 0.0) {
            continue;
        }
        if mass {
            let f = |u: f64| -u + u.powf(kappa);
            let slope = (b.u_mean - a.u_mean) / spacing;
            let floor = f(a.u_mean).min(f(b.u_mean));
            let tol = fd_tolerance(a, b, a.u_mean.max(floor), b.u_mean, step_tol);
            if slope < floor - tol {
                push(CheckKind::MassInequality, k + 1, slope, floor - tol);
            }
        }
        if let (Some(ja), Some(jb)) = (a.j, b.j) {
            let slope = (jb - ja) / spacing;
            let tol = fd_tolerance(a, b, ja, jb, step_tol);
            if slope > tol {
                push(CheckKind::Dissipation, k + 1, slope, tol);
            }
        }
        let (ma, mb) = (a.t.exp() * a.u_mean, b.t.exp() * b.u_mean);
        let tol = fd_tolerance(a, b, ma, mb, step_tol) * spacing;
        if mb < ma - tol {
            push(CheckKind::ScaledMean, k + 1, mb - ma, -tol);
        }
    }
    for (k, r) in records.iter().enumerate().skip(early) {
        let bound = (1.0 + NEG_MOMENT_SLACK) * neg_bound;
        if r.u_neg_delta_avg > bound {
            push(CheckKind::NegativeMoment, k, r.u_neg_delta_avg, bound);
        }
    }
    Ok(out)
}

/// Relative residual of `dJ/dt = -mean(u_t^2)` on each record pair, with the
/// right side averaged by the trapezoid rule. Empty unless `r = p + 1`.
pub fn dissipation_residuals(records: &[DiagnosticsRecord]) -> Vec<f64> {
    records
        .windows(2)
        .filter_map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let (ja, jb) = (a.j?, b.j?);
            let spacing = b.t - a.t;
            if !(spacing > 0.0) {
                return None;
            }
            let dissipation = 0.5 * (a.ut_l2sq + b.ut_l2sq);
            Some(((jb - ja) / spacing + dissipation).abs() / (1.0 + dissipation))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, u_mean: f64, j: Option<f64>) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            dt: 1e-3,
            u_mean,
            u_max: u_mean,
            u_min: u_mean,
            argmax_rho: 0.0,
            zeta: u_mean,
            z: 1.0,
            w: u_mean,
            j,
            i: None,
            u_neg_delta_avg: 1.0,
            k_of_t: 1.0,
            ut_max: 0.0,
            ut_l2sq: 0.0,
        }
    }

    #[test]
    fn constant_trajectory_is_clean() {
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        let recs: Vec<_> = (0..20).map(|k| rec(k as f64 * 0.1, 1.0, None)).collect();
        assert!(check_monotone_bounds(&recs, &prm, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn detects_energy_increase() {
        let prm = ModelParams::new(3.0, 0.25, 4.0, 0.0).unwrap();
        let recs: Vec<_> = (0..10)
            .map(|k| rec(k as f64 * 0.1, 1.0, Some(if k == 5 { 1.0 } else { 0.0 })))
            .collect();
        let v = check_monotone_bounds(&recs, &prm, 1e-9).unwrap();
        assert!(v.iter().any(|v| v.check == CheckKind::Dissipation && v.index == 5));
    }

    #[test]
    fn detects_collapsing_mean() {
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        let recs: Vec<_> = (0..10).map(|k| rec(k as f64 * 0.1, 2.0 * 0.5f64.powi(k), None)).collect();
        let v = check_monotone_bounds(&recs, &prm, 1e-9).unwrap();
        assert!(v.iter().any(|v| v.check == CheckKind::ScaledMean));
        assert!(v.iter().any(|v| v.check == CheckKind::MassInequality));
    }

    #[test]
    fn too_short() {
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        assert!(check_monotone_bounds(&[rec(0.0, 1.0, None)], &prm, 1e-9).is_err());
    }
}
