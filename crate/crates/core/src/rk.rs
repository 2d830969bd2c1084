//! Dormand-Prince 5(4) tableau shared by the scalar kinetic oracle and the
//! method-of-lines integrator.


pub(crate) const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order weights (equal to the last row of `A`).
pub(crate) const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Difference between fifth- and fourth-order weights.
pub(crate) const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince step on a vector state.
///
/// `rhs(y, out)` evaluates the right-hand side. Returns the fifth-order
/// solution in `y_new` and the embedded error estimate in `err`.
pub(crate) fn dopri_step<F>(
    rhs: &mut F,
    y: &[f64],
    dt: f64,
    y_new: &mut [f64],
    err: &mut [f64],
) -> Result<(), crate::Error>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<(), crate::Error>,
{
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    rhs(y, &mut k[0])?;
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += A[s][j] * kj[i];
            }
            stage[i] = y[i] + dt * acc;
        }
        rhs(&stage, &mut k[s])?;
    }
    for i in 0..n {
        let mut hi = 0.0;
        let mut e = 0.0;
        for s in 0..7 {
            hi += B5[s] * k[s][i];
            e += E[s] * k[s][i];
        }
        y_new[i] = y[i] + dt * hi;
        err[i] = dt * e;
    }
    Ok(())
}
