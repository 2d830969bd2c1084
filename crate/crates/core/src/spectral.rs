//! Neumann eigen-analysis of the discrete Laplacian and the linearization of
//! the non-local problem about `u = 1`.
//!
//! The generalized problem `K phi = mu^2 W phi` (stiffness `K`, diagonal mass
//! `W` from the grid weights) is symmetrized as `W^{-1/2} K W^{-1/2}`, a
//! symmetric tridiagonal matrix, and solved by Sturm bisection plus inverse
//! iteration.

use serde::{Deserialize, Serialize};

use crate::grid::{Field, Grid};
use crate::model::ModelParams;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// `mu_j^2`, nondecreasing, with `mu_1^2 = 0`.
    pub eigenvalues: Vec<f64>,
    /// Eigenfunctions normalized so that `avg(phi_j^2) = 1`.
    pub eigenfunctions: Vec<Field>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    fn from_grid(grid: &Grid) -> Self {
        let w = grid.weights();
        let c = grid.face_coefficients();
        let m = grid.len();
        let diag = (0..m)
            .map(|i| {
                let left = if i > 0 { c[i - 1] } else { 0.0 };
                let right = if i + 1 < m { c[i] } else { 0.0 };
                (left + right) / w[i]
            })
            .collect();
        let off = (0..m - 1).map(|i| -c[i] / (w[i] * w[i + 1]).sqrt()).collect();
        Self { diag, off }
    }

    fn gershgorin(&self) -> (f64, f64) {
        let m = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < m { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            if q.abs() < tiny {
                q = -tiny;
            }
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `j`-th smallest eigenvalue (0-based).
    fn eigenvalue(&self, j: usize, bounds: (f64, f64)) -> f64 {
        let (mut lo, mut hi) = bounds;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T - shift I) x = b` by Gaussian elimination with partial
    /// pivoting.
    fn shifted_solve(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let eps = f64::EPSILON * self.gershgorin().1.abs().max(1.0);
        // Rows hold (sub, diag, super, super2) after pivoting.
        let mut a: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                [
                    if i > 0 { self.off[i - 1] } else { 0.0 },
                    self.diag[i] - shift,
                    if i + 1 < n { self.off[i] } else { 0.0 },
                ]
            })
            .collect();
        let mut u2 = vec![0.0; n];
        let mut x = b.to_vec();
        // Forward elimination; row i holds (diag, super, super2) in
        // (a[i][1], a[i][2], u2[i]).
        for i in 0..n - 1 {
            let sub = a[i + 1][0];
            if sub.abs() > a[i][1].abs() {
                // Swap rows i and i+1.
                let (ri, rn) = (a[i], a[i + 1]);
                a[i] = [0.0, rn[0], rn[1]];
                u2[i] = rn[2];
                a[i + 1] = [ri[1], ri[2], 0.0];
                x.swap(i, i + 1);
                let f = a[i + 1][0] / a[i][1];
                a[i + 1][1] -= f * a[i][2];
                a[i + 1][2] -= f * u2[i];
                x[i + 1] -= f * x[i];
            } else {
                if a[i][1].abs() < eps {
                    a[i][1] = eps;
                }
                let f = sub / a[i][1];
                a[i + 1][1] -= f * a[i][2];
                x[i + 1] -= f * x[i];
            }
            a[i + 1][0] = 0.0;
        }
        if a[n - 1][1].abs() < eps {
            a[n - 1][1] = eps;
        }
        x[n - 1] /= a[n - 1][1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - a[n - 2][2] * x[n - 1]) / a[n - 2][1];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - a[i][2] * x[i + 1] - u2[i] * x[i + 2]) / a[i][1];
        }
        x
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// First `k` Neumann eigenpairs of the discrete `-Laplacian`.
pub fn neumann_eigenpairs(grid: &Grid, k: usize) -> Result<EigenSystem> {
    let m = grid.len();
    if k == 0 || k > m / 4 {
        return Err(Error::Domain(format!(
            "requested {k} eigenpairs, allowed 1..={} for {m} nodes",
            m / 4
        )));
    }
    let t = SymTridiagonal::from_grid(grid);
    let bounds = t.gershgorin();
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();

    // Constants are annihilated exactly by the conservative operator.
    let mut eigenvalues = vec![0.0];
    let mut vectors: Vec<Vec<f64>> = vec![sqrt_w.clone()];
    normalize(&mut vectors[0]);

    for j in 1..k {
        let lambda = t.eigenvalue(j, bounds);
        let gap = (bounds.1 - bounds.0).abs() * 1e-14;
        let shift = lambda - gap.max(f64::MIN_POSITIVE);
        let mut v: Vec<f64> = (0..m)
            .map(|i| 1.0 + 0.5 * ((i as f64 * 0.7548776662466927).fract() - 0.5))
            .collect();
        for _ in 0..4 {
            for prev in &vectors {
                let d: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(x, p)| *x -= d * p);
            }
            if normalize(&mut v) == 0.0 {
                return Err(Error::Eigen(format!("inverse iteration collapsed for mode {}", j + 1)));
            }
            v = t.shifted_solve(shift, &v);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Eigen(format!("non-finite iterate for mode {}", j + 1)));
            }
            normalize(&mut v);
        }
        for prev in &vectors {
            let d: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(prev).for_each(|(x, p)| *x -= d * p);
        }
        normalize(&mut v);
        eigenvalues.push(lambda);
        vectors.push(v);
    }

    let eigenfunctions = vectors
        .into_iter()
        .map(|v| {
            let mut phi: Vec<f64> = v.iter().zip(&sqrt_w).map(|(x, s)| x / s).collect();
            let lead = phi.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
            if lead < 0.0 {
                phi.iter_mut().for_each(|x| *x = -*x);
            }
            Field::new(grid, phi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenSystem {
        eigenvalues,
        eigenfunctions,
    })
}

/// Discrete `a(phi, phi) = ||grad phi||^2 + (1-p) avg(phi^2) + r gamma avg(phi)^2`.
pub fn quadratic_form(params: &ModelParams, grid: &Grid, phi: &Field) -> f64 {
    assert!(phi.is_on(grid), "field is bound to a different grid");
    let v = phi.values();
    let grad = grid.gradient_energy_of(v);
    let sq: f64 = grid.weights().iter().zip(v).map(|(w, x)| w * x * x).sum();
    let mean = grid.mean_of(v);
    grad + (1.0 - params.p()) * sq + params.r() * params.gamma() * mean * mean
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Mean,
    Nonconstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthMode {
    /// 1-based Neumann mode index.
    pub mode: usize,
    pub kind: ModeKind,
    pub mu_squared: f64,
    /// Eigenvalue of `phi -> L phi + (p-1) phi - r gamma avg(phi)`.
    pub growth_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSpectrum {
    /// Sorted by descending growth rate.
    pub modes: Vec<GrowthMode>,
    pub eigenvalues: Vec<f64>,
    /// Some nonconstant mode has positive growth rate.
    pub unstable: bool,
    /// `mu_2^2 < p - 1`.
    pub instability_criterion: bool,
}

/// Growth rates of the linearization about `u = 1`.
///
/// The non-local term is rank one and only touches the constant mode:
/// `sigma_1 = p - 1 - r gamma`; for mean-zero modes `sigma_j = p - 1 - mu_j^2`.
pub fn linearized_spectrum(params: &ModelParams, grid: &Grid, k: usize) -> Result<LinearSpectrum> {
    let eig = neumann_eigenpairs(grid, k.max(2))?;
    let pm1 = params.p() - 1.0;
    let mut modes: Vec<GrowthMode> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &mu2)| {
            if j == 0 {
                GrowthMode {
                    mode: 1,
                    kind: ModeKind::Mean,
                    mu_squared: mu2,
                    growth_rate: pm1 - params.r() * params.gamma(),
                }
            } else {
                GrowthMode {
                    mode: j + 1,
                    kind: ModeKind::Nonconstant,
                    mu_squared: mu2,
                    growth_rate: pm1 - mu2,
                }
            }
        })
        .collect();
    modes.sort_by(|a, b| b.growth_rate.total_cmp(&a.growth_rate));
    let unstable = modes
        .iter()
        .any(|m| m.kind == ModeKind::Nonconstant && m.growth_rate > 0.0);
    Ok(LinearSpectrum {
        modes,
        instability_criterion: eig.eigenvalues[1] < pm1,
        eigenvalues: eig.eigenvalues,
        unstable,
    })
}

/// Applies the linearized operator `L phi + (p-1) phi - r gamma avg(phi)`.
pub fn linearized_apply(params: &ModelParams, grid: &Grid, phi: &Field) -> Field {
    let lap = crate::grid::laplacian_apply(grid, phi);
    let mean = grid.mean_of(phi.values());
    let shift = params.r() * params.gamma() * mean;
    let values = lap
        .values()
        .iter()
        .zip(phi.values())
        .map(|(l, v)| l + (params.p() - 1.0) * v - shift)
        .collect();
    Field::rebind(grid, values)
}

/// Weighted projection `avg((u - base) phi)` of a field onto a mode.
pub fn mode_amplitude(grid: &Grid, field: &Field, base: f64, phi: &Field) -> f64 {
    grid.weights()
        .iter()
        .zip(field.values().iter().zip(phi.values()))
        .map(|(w, (u, p))| w * (u - base) * p)
        .sum()
}

/// Least-squares slope of `ln |amplitude|` against time.
pub fn log_linear_rate(times: &[f64], amplitudes: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(amplitudes)
        .filter(|(_, a)| a.abs() > 0.0)
        .map(|(&t, a)| (t, a.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Inconclusive(format!(
            "need at least 3 nonzero amplitudes, got {}",
            pts.len()
        )));
    }
    Ok(crate::stats::linear_fit(&pts).slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use std::f64::consts::PI;

    #[test]
    fn classical_interval_spectrum() {
        let g = Grid::new(Geometry::Interval { length: 1.0 }, 201).unwrap();
        let e = neumann_eigenpairs(&g, 3).unwrap();
        assert_eq!(e.eigenvalues[0], 0.0);
        assert!((e.eigenvalues[1] - PI * PI).abs() < 1e-3);
        assert!((e.eigenvalues[2] - 4.0 * PI * PI).abs() < 1e-2);

        let long = Grid::new(Geometry::Interval { length: 2.0 * PI }, 201).unwrap();
        let e = neumann_eigenpairs(&long, 2).unwrap();
        assert!((e.eigenvalues[1] - 0.25).abs() < 1e-4);
    }

    #[test]
    fn weighted_orthonormality() {
        let g = Grid::new(Geometry::Ball { dimension: 3 }, 129).unwrap();
        let e = neumann_eigenpairs(&g, 6).unwrap();
        for a in &e.eigenfunctions {
            for b in &e.eigenfunctions {
                let ip: f64 = g
                    .weights()
                    .iter()
                    .zip(a.values().iter().zip(b.values()))
                    .map(|(w, (x, y))| w * x * y)
                    .sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8, "{ip}");
            }
        }
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ball_spectrum_self_convergence() {
        let coarse = Grid::new(Geometry::Ball { dimension: 3 }, 65).unwrap();
        let fine = Grid::new(Geometry::Ball { dimension: 3 }, 257).unwrap();
        let a = neumann_eigenpairs(&coarse, 2).unwrap().eigenvalues[1];
        let b = neumann_eigenpairs(&fine, 2).unwrap().eigenvalues[1];
        assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
    }

    #[test]
    fn rejects_too_many_modes() {
        let g = Grid::new(Geometry::Interval { length: 1.0 }, 32).unwrap();
        assert!(neumann_eigenpairs(&g, 9).is_err());
        assert!(neumann_eigenpairs(&g, 0).is_err());
    }

    #[test]
    fn quadratic_form_on_modes() {
        let prm = ModelParams::new(2.0, 1.0, 2.0, 0.0).unwrap();
        let g = Grid::new(Geometry::Interval { length: 2.0 * PI }, 257).unwrap();
        let one = Field::constant(&g, 1.0);
        let expect = 1.0 - prm.p() + prm.r() * prm.gamma();
        assert!((quadratic_form(&prm, &g, &one) - expect).abs() < 1e-12);
        let e = neumann_eigenpairs(&g, 2).unwrap();
        let a = quadratic_form(&prm, &g, &e.eigenfunctions[1]);
        assert!((a - (e.eigenvalues[1] + 1.0 - prm.p())).abs() < 1e-10);
        assert!((a + 0.75).abs() < 0.02 * 0.75, "{a}");
    }

    #[test]
    fn spectrum_examples() {
        let prm = ModelParams::new(2.0, 1.0, 2.0, 0.0).unwrap();
        let g = Grid::new(Geometry::Interval { length: 2.0 * PI }, 257).unwrap();
        let s = linearized_spectrum(&prm, &g, 4).unwrap();
        let mean = s.modes.iter().find(|m| m.kind == ModeKind::Mean).unwrap();
        assert_eq!(mean.growth_rate, prm.p() - 1.0 - prm.r() * prm.gamma());
        let second = s.modes.iter().find(|m| m.mode == 2).unwrap();
        assert!((second.growth_rate - 0.75).abs() < 1e-3);
        assert!(s.unstable && s.instability_criterion);

        let unit = Grid::new(Geometry::Interval { length: 1.0 }, 129).unwrap();
        let s = linearized_spectrum(&prm, &unit, 4).unwrap();
        let second = s.modes.iter().find(|m| m.mode == 2).unwrap();
        assert!(second.growth_rate < 0.0 && !s.unstable && !s.instability_criterion);
    }

    #[test]
    fn log_linear_rate_exact() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let a: Vec<f64> = t.iter().map(|t| 3.0 * (0.75 * t).exp()).collect();
        assert!((log_linear_rate(&t, &a).unwrap() - 0.75).abs() < 1e-12);
    }
}
