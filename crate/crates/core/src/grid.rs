//! Uniform radial / interval meshes, normalized-average quadrature and the
//! Neumann Laplacian.
//!
//! The Laplacian is written in conservative flux form on control volumes
//! `[rho_{i-1/2}, rho_{i+1/2}]` (clipped to the domain). With `w_i` the
//! normalized cell volume and `c_{i+1/2}` the normalized face coefficient,
//!
//! ```text
//! (L u)_i = [c_{i+1/2} (u_{i+1} - u_i) - c_{i-1/2} (u_i - u_{i-1})] / w_i
//! ```
//!
//! so `sum_i w_i (L u)_i = 0` exactly, `W L` is symmetric, and
//! `-<u, L u>_W = sum c (du)^2` is the discrete Dirichlet energy. At the
//! origin of a ball the inner face has zero area and the stencil reduces to
//! `2N (u_1 - u_0)/h^2`, i.e. `N u_rr(0)` with even reflection. At the outer
//! boundary the face flux vanishes (homogeneous Neumann).

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::{Error, Result};

/// Minimum number of nodes accepted by [`Grid::new`].
pub const MIN_NODES: usize = 16;

/// Values at or below this are treated as non-positive when raised to
/// fractional or negative powers.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    /// `[0, length]` with Neumann conditions at both ends.
    Interval { length: f64 },
    /// Unit ball in `dimension` space dimensions, radially symmetric.
    Ball { dimension: u32 },
}

impl Geometry {
    /// Space dimension `N` entering the radial operator (1 for intervals).
    pub fn dimension(&self) -> u32 {
        match *self {
            Geometry::Interval { .. } => 1,
            Geometry::Ball { dimension } => dimension,
        }
    }

    /// Radius of the ball or length of the interval.
    pub fn extent(&self) -> f64 {
        match *self {
            Geometry::Interval { length } => length,
            Geometry::Ball { .. } => 1.0,
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self, Geometry::Ball { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    id: u64,
    geometry: Geometry,
    nodes: Vec<f64>,
    h: f64,
    weights: Vec<f64>,
    /// `c_{i+1/2}` for `i = 0..M-1`.
    faces: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

/// `b^n - a^n` for `b >= a >= 0`, factored to avoid cancellation.
fn power_difference(b: f64, a: f64, n: i32) -> f64 {
    let mut sum = 0.0;
    for k in 0..n {
        sum += b.powi(k) * a.powi(n - 1 - k);
    }
    (b - a) * sum
}

impl Grid {
    pub fn new(geometry: Geometry, points: usize) -> Result<Self> {
        if points < MIN_NODES {
            return Err(Error::Domain(format!(
                "grid needs at least {MIN_NODES} nodes, got {points}"
            )));
        }
        let n = geometry.dimension();
        if n < 1 {
            return Err(Error::Domain("ball dimension must be at least 1".into()));
        }
        let extent = geometry.extent();
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Domain(format!(
                "interval length must be positive, got {extent}"
            )));
        }
        let m = points;
        let h = extent / (m - 1) as f64;
        let nodes: Vec<f64> = (0..m)
            .map(|i| if i == m - 1 { extent } else { i as f64 * h })
            .collect();
        let ni = n as i32;

        // Cell volumes and face areas in the normalized measure
        // N rho^{N-1} d rho / extent^N.
        let face_pos = |i: usize| ((i as f64 + 0.5) * h).min(extent);
        let mut weights = Vec::with_capacity(m);
        for i in 0..m {
            let lo = if i == 0 { 0.0 } else { face_pos(i - 1) };
            let hi = if i == m - 1 { extent } else { face_pos(i) };
            weights.push(power_difference(hi / extent, lo / extent, ni));
        }
        let mut faces: Vec<f64> = (0..m - 1)
            .map(|i| {
                let rf = face_pos(i) / extent;
                f64::from(n) * rf.powi(ni - 1) / (h * extent)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        for c in &mut faces {
            *c /= total;
        }

        Ok(Self {
            id: NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed),
            geometry,
            nodes,
            h,
            weights,
            faces,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }
    pub fn dimension(&self) -> u32 {
        self.geometry.dimension()
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn face_coefficients(&self) -> &[f64] {
        &self.faces
    }

    /// Index of the node closest to `rho`.
    pub fn nearest_node(&self, rho: f64) -> usize {
        let i = (rho / self.h).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }

    /// Normalized average `sum_i w_i v_i`, summed left to right.
    pub fn mean_of(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `sum_i w_i v_i^m` on raw values.
    pub fn average_power_of(&self, values: &[f64], m: f64) -> Result<f64> {
        let integer = m.fract() == 0.0 && m >= 0.0;
        let mut acc = 0.0;
        for (w, &v) in self.weights.iter().zip(values) {
            if !integer && v <= POSITIVITY_FLOOR {
                return Err(Error::Domain(format!(
                    "cannot raise non-positive value {v:e} to power {m}"
                )));
            }
            acc += w * pow(v, m);
        }
        Ok(acc)
    }

    /// Conservative Neumann Laplacian on raw values.
    pub fn laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        let m = self.len();
        debug_assert!(u.len() == m && out.len() == m);
        let mut inflow_left = 0.0;
        for i in 0..m {
            let outflow = if i + 1 < m {
                self.faces[i] * (u[i + 1] - u[i])
            } else {
                0.0
            };
            out[i] = (outflow - inflow_left) / self.weights[i];
            inflow_left = outflow;
        }
    }

    /// Discrete `||grad u||_2^2` (normalized), consistent with
    /// `-<u, L u>_W`.
    pub fn gradient_energy_of(&self, u: &[f64]) -> f64 {
        self.faces
            .iter()
            .zip(u.windows(2))
            .map(|(c, w)| c * (w[1] - w[0]).powi(2))
            .sum()
    }

    /// Full non-local right-hand side on raw values.
    pub fn nonlocal_rhs_into(&self, params: &ModelParams, u: &[f64], out: &mut [f64]) -> Result<()> {
        if let Some((i, &v)) = u
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > POSITIVITY_FLOOR) || !v.is_finite())
        {
            return Err(Error::Domain(format!(
                "field must be positive and finite, node {i} has {v:e}"
            )));
        }
        let zeta = self.average_power_of(u, params.r())?;
        let denom = zeta.powf(params.gamma());
        self.laplacian_into(u, out);
        let p = params.p();
        for (o, &v) in out.iter_mut().zip(u) {
            *o += -v + pow(v, p) / denom;
        }
        Ok(())
    }
}

/// Nodal values bound to a particular [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid_id: u64,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("field value {v} is not finite")));
        }
        Ok(Self {
            grid_id: grid.id(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid_id: grid.id(),
            values: vec![c; grid.len()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_on(&self, grid: &Grid) -> bool {
        self.grid_id == grid.id()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the (first) maximum.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }

    pub(crate) fn rebind(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid_id: grid.id(),
            values,
        }
    }
}

/// `v^m`, using repeated multiplication for small integer exponents.
#[inline]
pub(crate) fn pow(v: f64, m: f64) -> f64 {
    if m.fract() == 0.0 && m.abs() <= 16.0 {
        v.powi(m as i32)
    } else {
        v.powf(m)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_binding(grid: &Grid, field: &Field) {
    assert!(field.is_on(grid), "field is bound to a different grid");
}

pub fn build_grid(geometry: Geometry, points: usize) -> Result<Grid> {
    Grid::new(geometry, points)
}

/// Normalized average of `field^m`.
pub fn average_power(grid: &Grid, field: &Field, m: f64) -> Result<f64> {
    check_binding(grid, field);
    grid.average_power_of(field.values(), m)
}

pub fn laplacian_apply(grid: &Grid, field: &Field) -> Field {
    check_binding(grid, field);
    let mut out = vec![0.0; grid.len()];
    grid.laplacian_into(field.values(), &mut out);
    Field::rebind(grid, out)
}

/// `L u - u + u^p / (avg u^r)^gamma`, with the average evaluated once.
pub fn nonlocal_rhs(grid: &Grid, params: &ModelParams, field: &Field) -> Result<Field> {
    check_binding(grid, field);
    let mut out = vec![0.0; grid.len()];
    grid.nonlocal_rhs_into(params, field.values(), &mut out)?;
    Ok(Field::rebind(grid, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interval(points: usize) -> Grid {
        Grid::new(Geometry::Interval { length: 1.0 }, points).unwrap()
    }

    fn ball(n: u32, points: usize) -> Grid {
        Grid::new(Geometry::Ball { dimension: n }, points).unwrap()
    }

    #[test]
    fn interval_weights_are_normalized_trapezoid() {
        let g = interval(101);
        let w = g.weights();
        assert!((w[0] - 1.0 / 200.0).abs() < 1e-15);
        assert!((w[100] - 1.0 / 200.0).abs() < 1e-15);
        assert!(w[1..100].iter().all(|&x| (x - 0.01).abs() < 1e-15));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_weights() {
        let g = ball(3, 101);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Origin cell volume is (h/2)^3: vanishes with the volume factor.
        let h = g.spacing();
        assert!((g.weights()[0] - (h / 2.0).powi(3)).abs() < 1e-18);
        let one_d = ball(1, 101);
        for (a, b) in one_d.weights().iter().zip(interval(101).weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn too_few_nodes() {
        assert!(Grid::new(Geometry::Interval { length: 1.0 }, 15).is_err());
        assert!(Grid::new(Geometry::Ball { dimension: 0 }, 32).is_err());
    }

    #[test]
    fn nodes_uniform() {
        let g = ball(3, 257);
        let h = g.spacing();
        assert!(g.nodes().windows(2).all(|w| ((w[1] - w[0]) - h).abs() < 1e-12));
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(*g.nodes().last().unwrap(), 1.0);
    }

    #[test]
    fn average_power_examples() {
        let g = ball(3, 65);
        let c = Field::constant(&g, 2.5);
        assert!((average_power(&g, &c, 3.0).unwrap() - 2.5f64.powi(3)).abs() < 1e-12);
        assert!((average_power(&g, &c, -0.5).unwrap() - 2.5f64.powf(-0.5)).abs() < 1e-14);
        let line = interval(101);
        let f = Field::from_fn(&line, |x| x).unwrap();
        assert!((average_power(&line, &f, 1.0).unwrap() - 0.5).abs() < 1e-12);
        let z = Field::constant(&line, 0.0);
        assert!(average_power(&line, &z, -1.0).is_err());
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        for g in [interval(64), ball(3, 64)] {
            let u = Field::constant(&g, 3.7);
            assert!(laplacian_apply(&g, &u).values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn laplacian_of_cosine() {
        let g = interval(201);
        let u = Field::from_fn(&g, |x| (PI * x).cos()).unwrap();
        let lu = laplacian_apply(&g, &u);
        let err = g
            .nodes()
            .iter()
            .zip(lu.values())
            .map(|(&x, &v)| (v + PI * PI * (PI * x).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 10.0 * g.spacing().powi(2), "err = {err}");
    }

    #[test]
    fn laplacian_of_rho_squared_includes_origin() {
        for n in 1..=4 {
            let g = ball(n, 101);
            let u = Field::from_fn(&g, |r| r * r).unwrap();
            let lu = laplacian_apply(&g, &u);
            // The last node sees the Neumann condition, which rho^2 violates.
            for &v in &lu.values()[..g.len() - 1] {
                assert!((v - 2.0 * f64::from(n)).abs() < 1e-8, "N={n}: {v}");
            }
        }
    }

    #[test]
    fn nonlocal_rhs_homogeneous() {
        let prm = ModelParams::new(3.0, 1.0, 1.0, 0.0).unwrap();
        let g = ball(3, 64);
        for c in [0.5, 1.0, 2.0] {
            let f = nonlocal_rhs(&g, &prm, &Field::constant(&g, c)).unwrap();
            let k = crate::model::kinetic_rhs(c, &prm).unwrap();
            assert!(f.values().iter().all(|v| (v - k).abs() <= 1e-12));
        }
        let bad = Field::new(&g, vec![-1.0; 64]).unwrap();
        assert!(nonlocal_rhs(&g, &prm, &bad).is_err());
    }

    #[test]
    #[should_panic(expected = "different grid")]
    fn field_grid_mismatch_panics() {
        let a = interval(32);
        let b = interval(32);
        let _ = laplacian_apply(&a, &Field::constant(&b, 1.0));
    }
}
