//! Observed order of the radial finite-volume Laplacian.
//!
//! `rho^2` violates the Neumann condition at `rho = 1`, so that node is left
//! out for it; elsewhere the operator reproduces `2N` to rounding. The last
//! case keeps every node: at the outer boundary the reflection is only first
//! order unless the third derivative vanishes there, which `cos(pi x)` has
//! and `rho^2 (1 - rho^2 / 2)` lacks.

use std::f64::consts::PI;

use gmshadow::grid::{laplacian_apply, Field, Geometry, Grid};

fn max_error(
    geometry: Geometry,
    points: usize,
    f: fn(f64) -> f64,
    lap: fn(f64, u32) -> f64,
    skip_boundary: bool,
) -> gmshadow::Result<f64> {
    let grid = Grid::new(geometry, points)?;
    let u = Field::from_fn(&grid, f)?;
    let lu = laplacian_apply(&grid, &u);
    let n = grid.dimension();
    Ok(grid
        .nodes()
        .iter()
        .zip(lu.values())
        .take(grid.len() - usize::from(skip_boundary))
        .map(|(&x, &v)| (v - lap(x, n)).abs())
        .fold(0.0, f64::max))
}

fn main() -> gmshadow::Result<()> {
    type Case = (&'static str, Geometry, fn(f64) -> f64, fn(f64, u32) -> f64, bool);
    let cases: [Case; 3] = [
        (
            "cos(pi x), interval",
            Geometry::Interval { length: 1.0 },
            |x| (PI * x).cos(),
            |x, _| -PI * PI * (PI * x).cos(),
            false,
        ),
        ("rho^2 without the outer node, ball N=3", Geometry::Ball { dimension: 3 }, |r| r * r, |_, n| 2.0 * f64::from(n), true),
        (
            "rho^2 (1 - rho^2/2), ball N=3",
            Geometry::Ball { dimension: 3 },
            |r| r * r * (1.0 - 0.5 * r * r),
            |r, n| 2.0 * f64::from(n) - 2.0 * f64::from(n + 2) * r * r,
            false,
        ),
    ];
    for (label, geometry, f, lap, skip_boundary) in cases {
        println!("{label}");
        let mut prev: Option<f64> = None;
        for points in [33, 65, 129, 257, 513] {
            let e = max_error(geometry, points, f, lap, skip_boundary)?;
            match prev {
                _ if e == 0.0 => println!("  M = {points:4}  exact"),
                Some(p) => println!("  M = {points:4}  max error {e:.3e}  order {:.3}", (p / e).log2()),
                None => println!("  M = {points:4}  max error {e:.3e}"),
            }
            prev = Some(e);
        }
    }
    Ok(())
}
