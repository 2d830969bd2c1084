//! Scalar observables, moment-plane tracking and blow-up inference.

mod blowup;
mod checks;

use serde::Serialize;

pub use blowup::{
    blowup_set_check, fit_blowup, profile_extract, region_blowup_time_bound, spiky_blowup_time_bound,
    BlowUpClass, BlowUpReport, FitConfig, ProfileFit, SinglePointEvidence, PROBE_RADIUS,
};
pub use checks::{check_monotone_bounds, dissipation_residuals, fd_tolerance, CheckKind, Violation};

use crate::grid::{Field, Grid};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Default exponent for the negative-moment diagnostic.
pub const DEFAULT_DELTA: f64 = 0.01;

/// Observables of one state. `j` and `i` are present only when `r = p + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub u_mean: f64,
    pub u_max: f64,
    pub u_min: f64,
    pub argmax_rho: f64,
    /// Mean of `u^r`.
    pub zeta: f64,
    /// Mean of `u^(r - p + 1)`.
    pub z: f64,
    /// Mean of `u^(p - 1 + r)`.
    pub w: f64,
    pub j: Option<f64>,
    pub i: Option<f64>,
    pub u_neg_delta_avg: f64,
    /// `e^((1 - p) t) / zeta^gamma`.
    pub k_of_t: f64,
    #[serde(skip)]
    pub ut_max: f64,
    /// Weighted mean of `u_t^2`.
    #[serde(skip)]
    pub ut_l2sq: f64,
}

/// True when the Lyapunov functional exists (`r = p + 1`).
pub fn has_lyapunov(params: &ModelParams) -> bool {
    (params.r() - params.p() - 1.0).abs() <= 1e-12
}

pub fn compute_record(
    grid: &Grid,
    params: &ModelParams,
    field: &Field,
    t: f64,
    delta_diag: f64,
) -> Result<DiagnosticsRecord> {
    if !field.is_on(grid) {
        return Err(Error::Domain("field is bound to a different grid".into()));
    }
    let u = field.values();
    let (p, r, gamma) = (params.p(), params.r(), params.gamma());
    let u_min = field.min();
    if !(u_min > 0.0) {
        return Err(Error::Domain(format!("diagnostics need a positive field, min = {u_min:e}")));
    }
    let zeta = grid.average_power_of(u, r)?;
    let z = grid.average_power_of(u, r - p + 1.0)?;
    let w = grid.average_power_of(u, p - 1.0 + r)?;
    let (j, i) = if has_lyapunov(params) {
        let energy = grid.gradient_energy_of(u) + grid.average_power_of(u, 2.0)?;
        let s = grid.average_power_of(u, p + 1.0)?;
        let potential = if (gamma - 1.0).abs() < 1e-12 {
            s.ln() / (p + 1.0)
        } else {
            s.powf(1.0 - gamma) / ((p + 1.0) * (1.0 - gamma))
        };
        (Some(0.5 * energy - potential), Some(energy - s.powf(1.0 - gamma)))
    } else {
        (None, None)
    };
    let argmax = field.argmax();
    Ok(DiagnosticsRecord {
        t,
        dt: 0.0,
        u_mean: grid.mean_of(u),
        u_max: u[argmax],
        u_min,
        argmax_rho: grid.nodes()[argmax],
        zeta,
        z,
        w,
        j,
        i,
        u_neg_delta_avg: grid.average_power_of(u, -delta_diag)?,
        k_of_t: ((1.0 - p) * t).exp() / zeta.powf(gamma),
        ut_max: 0.0,
        ut_l2sq: 0.0,
    })
}

/// Position in the `(zeta, w)` plane relative to the curves
/// `w = zeta^(1 - gamma)` and `w = zeta^(1 - (p - 1)/r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionState {
    pub residual_gamma1: f64,
    pub residual_gamma2: f64,
    /// Strictly below the first curve.
    pub in_region: bool,
}

pub fn region_state(zeta: f64, w: f64, params: &ModelParams) -> Result<RegionState> {
    if !(zeta > 0.0 && w > 0.0) {
        return Err(Error::Domain(format!("moments must be positive (zeta = {zeta}, w = {w})")));
    }
    let residual_gamma1 = w - zeta.powf(1.0 - params.gamma());
    Ok(RegionState {
        residual_gamma1,
        residual_gamma2: w - zeta.powf(1.0 - params.rho_index()),
        in_region: residual_gamma1 < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    fn grid() -> Grid {
        Grid::new(Geometry::Ball { dimension: 3 }, 65).unwrap()
    }

    #[test]
    fn constant_field_moments() {
        let g = grid();
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        let rec = compute_record(&g, &prm, &Field::constant(&g, 2.0), 0.0, DEFAULT_DELTA).unwrap();
        assert!((rec.zeta - 2.0).abs() < 1e-14);
        assert!((rec.z - 0.5).abs() < 1e-14);
        assert!((rec.w - 8.0).abs() < 1e-13);
        assert!((rec.w * rec.z - rec.zeta * rec.zeta).abs() < 1e-12);
        assert!(rec.j.is_none() && rec.i.is_none());
    }

    #[test]
    fn lyapunov_values_at_one() {
        let g = grid();
        let prm = ModelParams::new(3.0, 0.25, 4.0, 0.0).unwrap();
        let rec = compute_record(&g, &prm, &Field::constant(&g, 1.0), 0.0, DEFAULT_DELTA).unwrap();
        assert!((rec.j.unwrap() - 1.0 / 6.0).abs() < 1e-14);
        assert!(rec.i.unwrap().abs() < 1e-14);
    }

    #[test]
    fn k_of_t_formula() {
        let g = grid();
        let prm = ModelParams::new(3.0, 1.0, 2.0, 0.0).unwrap();
        let rec = compute_record(&g, &prm, &Field::constant(&g, 2.0), 0.5, DEFAULT_DELTA).unwrap();
        // e^{-t} / 4.
        assert!((rec.k_of_t - (-1.0f64).exp() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn region_examples() {
        let prm = ModelParams::new(3.0, 0.5, 1.0, 0.0).unwrap();
        assert!(region_state(1.0, 0.5, &prm).unwrap().in_region);
        let on = region_state(1.0, 1.0, &prm).unwrap();
        assert_eq!((on.residual_gamma1, on.residual_gamma2), (0.0, 0.0));
        assert!(!region_state(4.0, 3.0, &prm).unwrap().in_region);
        assert!(region_state(0.0, 1.0, &prm).is_err());
    }
}
