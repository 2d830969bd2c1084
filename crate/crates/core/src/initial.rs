//! Initial data generators.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::{Field, Grid};
use crate::model::ModelParams;
use crate::spectral::neumann_eigenpairs;
use crate::{Error, Result};

/// Minimum number of grid spacings across the spike core.
pub const MIN_CORE_CELLS: f64 = 4.0;

/// Initial-data section of a scenario config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    /// `base + eps * phi_mode` with a Neumann eigenfunction (1-based mode).
    Perturbed {
        #[serde(default = "one")]
        base: f64,
        eps: f64,
        #[serde(default = "two")]
        mode: usize,
    },
    /// `base + amplitude * cos(k pi rho / extent)`.
    Cosine {
        base: f64,
        amplitude: f64,
        #[serde(default = "one_usize")]
        wavenumber: usize,
    },
    /// `lambda * phi_delta`.
    Spiky { lambda: f64, delta: f64 },
    /// Nodal values from a snapshot-format CSV.
    Csv { path: PathBuf },
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn one_usize() -> usize {
    1
}

impl InitialSpec {
    pub fn build(&self, grid: &Grid, params: &ModelParams) -> Result<Field> {
        match self {
            InitialSpec::Constant { value } => constant_data(grid, *value),
            InitialSpec::Perturbed { base, eps, mode } => perturbed_constant(grid, *base, *eps, *mode),
            InitialSpec::Cosine {
                base,
                amplitude,
                wavenumber,
            } => cosine_data(grid, *base, *amplitude, *wavenumber),
            InitialSpec::Spiky { lambda, delta } => {
                spiky_data(grid, params, &SpikySpec::new(*lambda, *delta, params)?)
            }
            InitialSpec::Csv { path } => load_csv(grid, path),
        }
    }
}

pub fn constant_data(grid: &Grid, c: f64) -> Result<Field> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("constant initial value must be positive, got {c}")));
    }
    Ok(Field::constant(grid, c))
}

/// `c + eps * phi_j`, `phi_j` the `j`-th discrete Neumann eigenfunction.
pub fn perturbed_constant(grid: &Grid, c: f64, eps: f64, mode: usize) -> Result<Field> {
    if mode == 0 {
        return Err(Error::Domain("mode index is 1-based".into()));
    }
    if eps == 0.0 {
        return constant_data(grid, c);
    }
    let eig = neumann_eigenpairs(grid, mode)?;
    let phi = &eig.eigenfunctions[mode - 1];
    let values: Vec<f64> = phi.values().iter().map(|p| c + eps * p).collect();
    if let Some(v) = values.iter().find(|&&v| v <= 0.0) {
        return Err(Error::Domain(format!(
            "perturbation eps = {eps} makes the field non-positive ({v})"
        )));
    }
    Field::new(grid, values)
}

pub fn cosine_data(grid: &Grid, base: f64, amplitude: f64, wavenumber: usize) -> Result<Field> {
    let extent = grid.geometry().extent();
    let k = wavenumber as f64 * std::f64::consts::PI / extent;
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| base + amplitude * (k * x).cos())
        .collect();
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "cosine data base = {base}, amplitude = {amplitude} is not positive"
        )));
    }
    Field::new(grid, values)
}

/// Amplitude and core radius of the spiky family `lambda * phi_delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpikySpec {
    lambda: f64,
    delta: f64,
    a: f64,
}

impl SpikySpec {
    pub fn new(lambda: f64, delta: f64, params: &ModelParams) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self {
            lambda,
            delta,
            a: 2.0 / (params.p() - 1.0),
        })
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    /// Singular exponent `2/(p-1)`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// `phi_delta(rho)`: `rho^{-a}` outside the core, a quadratic cap inside.
    pub fn profile(&self, rho: f64) -> f64 {
        let (a, d) = (self.a, self.delta);
        if rho == d {
            d.powf(-a)
        } else if rho > d {
            rho.powf(-a)
        } else {
            d.powf(-a) * (1.0 + 0.5 * a) - 0.5 * a * d.powf(-(a + 2.0)) * rho * rho
        }
    }

    /// Peak value `lambda * delta^{-a} (1 + a/2)`.
    pub fn peak(&self) -> f64 {
        self.lambda * self.delta.powf(-self.a) * (1.0 + 0.5 * self.a)
    }
}

/// Nodal values of `lambda * phi_delta` on a ball.
pub fn spiky_data(grid: &Grid, params: &ModelParams, spec: &SpikySpec) -> Result<Field> {
    if !grid.geometry().is_ball() {
        return Err(Error::Config("spiky initial data requires ball geometry".into()));
    }
    if (spec.a - 2.0 / (params.p() - 1.0)).abs() > 1e-15 {
        return Err(Error::Domain("spiky spec built for different exponents".into()));
    }
    let h = grid.spacing();
    if spec.delta < MIN_CORE_CELLS * h {
        return Err(Error::Config(format!(
            "delta = {} is below the resolution limit {}h = {}",
            spec.delta,
            MIN_CORE_CELLS,
            MIN_CORE_CELLS * h
        )));
    }
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| spec.lambda * spec.profile(r))
        .collect();
    if let Some(i) = values.windows(2).position(|w| !(w[1] < w[0])) {
        return Err(Error::Config(format!(
            "spiky data is not strictly decreasing at node {i}; refine the grid"
        )));
    }
    Field::new(grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaReport {
    /// Minimum of `L phi + N a phi^p` over core nodes (rho < delta - 2h).
    pub min_core: f64,
    /// Minimum over tail nodes (rho > delta + 2h).
    pub min_tail: f64,
    pub nodes_checked: usize,
}

impl LemmaReport {
    pub fn min(&self) -> f64 {
        self.min_core.min(self.min_tail)
    }
}

/// Evaluates `L phi_delta + N a phi_delta^p` on nodes at least `2h` from the
/// seam `rho = delta` (where `phi_delta` is only once differentiable).
pub fn check_lemma_bounds(grid: &Grid, params: &ModelParams, spec: &SpikySpec) -> Result<LemmaReport> {
    let unit = SpikySpec { lambda: 1.0, ..*spec };
    let phi = spiky_data(grid, params, &unit)?;
    let lap = crate::grid::laplacian_apply(grid, &phi);
    let n = f64::from(grid.dimension());
    let h = grid.spacing();
    let last = grid.len() - 1;
    let mut report = LemmaReport {
        min_core: f64::INFINITY,
        min_tail: f64::INFINITY,
        nodes_checked: 0,
    };
    for (i, &rho) in grid.nodes().iter().enumerate() {
        // The outer boundary node carries the Neumann condition, which
        // rho^{-a} does not satisfy.
        if i == last || (rho - spec.delta).abs() < 2.0 * h {
            continue;
        }
        let v = phi.values()[i];
        let val = lap.values()[i] + n * spec.a * v.powf(params.p());
        if rho < spec.delta {
            report.min_core = report.min_core.min(val);
        } else {
            report.min_tail = report.min_tail.min(val);
        }
        report.nodes_checked += 1;
    }
    Ok(report)
}

/// Reads nodal values from a CSV with header `rho,u`.
pub fn load_csv(grid: &Grid, path: &Path) -> Result<Field> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("rho,u") => {}
        other => {
            return Err(Error::Config(format!(
                "{}: expected header `rho,u`, found {other:?}",
                path.display()
            )))
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Config(format!("{}: malformed row at line {}", path.display(), lineno + 2));
        let (rho, u) = line.split_once(',').ok_or_else(bad)?;
        let rho: f64 = rho.trim().parse().map_err(|_| bad())?;
        let u: f64 = u.trim().parse().map_err(|_| bad())?;
        let idx = values.len();
        if idx >= grid.len() || (grid.nodes()[idx] - rho).abs() > 1e-9 * grid.geometry().extent() {
            return Err(Error::Config(format!(
                "{}: node {idx} at rho = {rho} does not match the grid",
                path.display()
            )));
        }
        values.push(u);
    }
    if values.len() != grid.len() {
        return Err(Error::Config(format!(
            "{}: {} rows for a {}-node grid",
            path.display(),
            values.len(),
            grid.len()
        )));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("{}: initial data must be positive", path.display())));
    }
    Field::new(grid, values)
}
