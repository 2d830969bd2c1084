//! Model parameters, regime classification and the spatially homogeneous
//! kinetics `u' = -u + u^(p - r*gamma)`.

use serde::{Deserialize, Serialize};

use crate::rk;
use crate::{Error, Result};

/// Absolute tolerance for deciding `p - r*gamma == 1`.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Threshold at which the kinetic oracle switches to the closed-form tail.
pub const KINETIC_OVERFLOW_GUARD: f64 = 1e12;

/// Validated exponents `(p, q, r, s)` with the derived indices
/// `gamma = q/(s+1)` and `rho_index = (p-1)/r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    p: f64,
    q: f64,
    r: f64,
    s: f64,
    gamma: f64,
    rho_index: f64,
}

impl ModelParams {
    pub fn new(p: f64, q: f64, r: f64, s: f64) -> Result<Self> {
        validate_params(p, q, r, s)
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    /// Net cross-inhibition index `q/(s+1)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Net self-activation index `(p-1)/r`.
    pub fn rho_index(&self) -> f64 {
        self.rho_index
    }

    /// Exponent of the homogeneous kinetics, `p - r*gamma`.
    pub fn kinetic_exponent(&self) -> f64 {
        self.p - self.r * self.gamma
    }

    /// True when `r = p + 1`, the case with a Lyapunov functional.
    pub fn is_variational(&self) -> bool {
        (self.r - (self.p + 1.0)).abs() <= BOUNDARY_TOL
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            p: f64,
            q: f64,
            r: f64,
            s: f64,
            #[serde(default)]
            #[allow(dead_code)]
            gamma: Option<f64>,
            #[serde(default)]
            #[allow(dead_code)]
            rho_index: Option<f64>,
        }
        let raw = Raw::deserialize(d)?;
        validate_params(raw.p, raw.q, raw.r, raw.s).map_err(serde::de::Error::custom)
    }
}

pub fn validate_params(p: f64, q: f64, r: f64, s: f64) -> Result<ModelParams> {
    for (name, v) in [("p", p), ("q", q), ("r", r), ("s", s)] {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite, got {v}")));
        }
    }
    if p <= 1.0 {
        return Err(Error::Domain(format!("p must exceed 1 (got {p})")));
    }
    if q <= 0.0 {
        return Err(Error::Domain(format!("q must be positive (got {q})")));
    }
    if r <= 0.0 {
        return Err(Error::Domain(format!("r must be positive (got {r})")));
    }
    if s <= -1.0 {
        return Err(Error::Domain(format!("s must exceed -1 (got {s})")));
    }
    Ok(ModelParams {
        p,
        q,
        r,
        s,
        gamma: q / (s + 1.0),
        rho_index: (p - 1.0) / r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

/// One checked hypothesis `lhs <relation> rhs`, with the values it was
/// evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub statement: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
}

impl Inequality {
    pub(crate) fn new(statement: &str, lhs: f64, relation: Relation, rhs: f64) -> Self {
        Self {
            statement: statement.to_string(),
            lhs,
            relation,
            rhs,
        }
    }

    pub fn holds(&self) -> bool {
        match self.relation {
            Relation::Lt => self.lhs < self.rhs,
            Relation::Le => self.lhs <= self.rhs,
            Relation::Gt => self.lhs > self.rhs,
            Relation::Ge => self.lhs >= self.rhs,
            Relation::Eq => (self.lhs - self.rhs).abs() <= BOUNDARY_TOL,
        }
    }
}

/// A scenario label whose hypotheses are all satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremTag {
    pub tag: String,
    pub hypotheses: Vec<Inequality>,
}

impl TheoremTag {
    pub fn holds(&self) -> bool {
        self.hypotheses.iter().all(Inequality::holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub turing: bool,
    pub anti_turing: bool,
    pub boundary: bool,
    /// `p - r*gamma`.
    pub kinetic_exponent: f64,
    pub theorem_tags: Vec<TheoremTag>,
}

impl RegimeReport {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.theorem_tags.iter().any(|t| t.tag == tag)
    }
}

/// Extra information some hypotheses depend on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HypothesisContext {
    /// Spatial dimension `N` of the domain, when known.
    pub dimension: Option<u32>,
}

/// Candidate hypothesis sets, returned whether or not they hold.
pub fn hypothesis_sets(params: &ModelParams, ctx: HypothesisContext) -> Vec<TheoremTag> {
    use Relation::*;
    let ModelParams {
        p,
        r,
        gamma: g,
        rho_index: rho,
        ..
    } = *params;
    let mut sets = vec![
        TheoremTag {
            tag: "ode-blowup".into(),
            hypotheses: vec![
                Inequality::new("p >= r", p, Ge, r),
                Inequality::new("p - r*gamma > 1", p - r * g, Gt, 1.0),
            ],
        },
        TheoremTag {
            tag: "variational-blowup".into(),
            hypotheses: vec![
                Inequality::new("r == p + 1", r, Eq, p + 1.0),
                Inequality::new(
                    "gamma < min(1, (p-1)/(p+1))",
                    g,
                    Lt,
                    1f64.min((p - 1.0) / (p + 1.0)),
                ),
            ],
        },
        TheoremTag {
            tag: "region-blowup".into(),
            hypotheses: vec![
                Inequality::new("gamma > 0", g, Gt, 0.0),
                Inequality::new("gamma < 1", g, Lt, 1.0),
                Inequality::new("r <= 1", r, Le, 1.0),
                Inequality::new("(p-1)/r > 1", rho, Gt, 1.0),
            ],
        },
        TheoremTag {
            tag: "region-global".into(),
            hypotheses: vec![
                Inequality::new("gamma > 1", g, Gt, 1.0),
                Inequality::new("r >= 1", r, Ge, 1.0),
                Inequality::new("(p-1)/r < 1", rho, Lt, 1.0),
            ],
        },
    ];
    if let Some(n) = ctx.dimension {
        let nf = f64::from(n);
        sets.push(TheoremTag {
            tag: "variational-global".into(),
            hypotheses: vec![
                Inequality::new("N >= 3", nf, Ge, 3.0),
                Inequality::new("r == p + 1", r, Eq, p + 1.0),
                Inequality::new("gamma > (p-1)/(p+1)", g, Gt, (p - 1.0) / (p + 1.0)),
                Inequality::new("gamma < 1", g, Lt, 1.0),
                Inequality::new("p < (N+2)/(N-2)", p, Lt, critical_sobolev(nf)),
            ],
        });
        sets.push(TheoremTag {
            tag: "small-rho-global".into(),
            hypotheses: vec![
                Inequality::new(
                    "(p-1)/r < min(1, 2/N, (1 - 1/r)/2)",
                    rho,
                    Lt,
                    1f64.min(2.0 / nf).min(0.5 * (1.0 - 1.0 / r)),
                ),
                Inequality::new("gamma > 0", g, Gt, 0.0),
                Inequality::new("gamma < 1", g, Lt, 1.0),
            ],
        });
        sets.push(TheoremTag {
            tag: "ddi-spiky".into(),
            hypotheses: vec![
                Inequality::new("N >= 3", nf, Ge, 3.0),
                Inequality::new("r >= 1", r, Ge, 1.0),
                Inequality::new("r <= p", r, Le, p),
                Inequality::new("p > N/(N-2)", p, Gt, serrin_exponent(nf)),
                Inequality::new("(p-1)/r > 2/N", rho, Gt, 2.0 / nf),
                Inequality::new("(p-1)/r < gamma", rho, Lt, g),
            ],
        });
    }
    sets
}

fn critical_sobolev(n: f64) -> f64 {
    if n <= 2.0 {
        f64::INFINITY
    } else {
        (n + 2.0) / (n - 2.0)
    }
}

fn serrin_exponent(n: f64) -> f64 {
    if n <= 2.0 {
        f64::INFINITY
    } else {
        n / (n - 2.0)
    }
}

/// Turing / anti-Turing / boundary classification plus the scenario tags
/// whose hypotheses hold. Tags check hypotheses only, never conclusions.
pub fn classify_regime(params: &ModelParams, ctx: HypothesisContext) -> RegimeReport {
    let kappa = params.kinetic_exponent();
    let boundary = (kappa - 1.0).abs() <= BOUNDARY_TOL;
    let theorem_tags = hypothesis_sets(params, ctx)
        .into_iter()
        .filter(TheoremTag::holds)
        .collect();
    RegimeReport {
        turing: !boundary && kappa < 1.0,
        anti_turing: !boundary && kappa > 1.0,
        boundary,
        kinetic_exponent: kappa,
        theorem_tags,
    }
}

/// Right-hand side of the homogeneous kinetics, `-u + u^(p - r*gamma)`.
pub fn kinetic_rhs(u: f64, params: &ModelParams) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("kinetic state must be positive, got {u}")));
    }
    Ok(-u + u.powf(params.kinetic_exponent()))
}

/// Adaptive solution of the homogeneous kinetics.
#[derive(Debug, Clone, Serialize)]
pub struct KineticTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Blow-up time, present when the state crossed [`KINETIC_OVERFLOW_GUARD`]
    /// before `t_end`. Includes the analytic tail beyond the guard.
    pub blowup_time: Option<f64>,
}

impl KineticTrajectory {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trajectory is never empty")
    }
}

/// Time for `u' = u^k - u` to travel from `u` to infinity (requires `k > 1`, `u > 1`).
fn kinetic_tail(u: f64, kappa: f64) -> f64 {
    -(-u.powf(1.0 - kappa)).ln_1p() / (kappa - 1.0)
}

/// Integrates the homogeneous kinetics from `u0` up to `t_end`, or until
/// blow-up.
pub fn integrate_kinetic(
    u0: f64,
    params: &ModelParams,
    t_end: f64,
    abs_tol: f64,
) -> Result<KineticTrajectory> {
    if !(u0 > 0.0) {
        return Err(Error::Domain(format!("u0 must be positive, got {u0}")));
    }
    if !(t_end > 0.0) {
        return Err(Error::Domain(format!("t_end must be positive, got {t_end}")));
    }
    if !(abs_tol > 0.0) {
        return Err(Error::Domain(format!("abs_tol must be positive, got {abs_tol}")));
    }
    let kappa = params.kinetic_exponent();
    let mut times = vec![0.0];
    let mut values = vec![u0];
    if (kappa - 1.0).abs() <= BOUNDARY_TOL || u0 == 1.0 {
        times.push(t_end);
        values.push(u0);
        return Ok(KineticTrajectory {
            times,
            values,
            blowup_time: None,
        });
    }

    let mut rhs = |y: &[f64], out: &mut [f64]| -> Result<()> {
        if !(y[0] > 0.0) || !y[0].is_finite() {
            return Err(Error::NumericalFailure {
                t: f64::NAN,
                reason: "kinetic stage left the positive axis".into(),
            });
        }
        out[0] = -y[0] + y[0].powf(kappa);
        Ok(())
    };

    let mut t = 0.0;
    let mut u = u0;
    let mut dt = (1e-3f64).min(t_end);
    let mut y_new = [0.0];
    let mut err = [0.0];
    // Underflow is judged against the local growth time, not absolutely.
    let dt_floor = 1e-13;
    while t < t_end {
        if u >= KINETIC_OVERFLOW_GUARD && kappa > 1.0 {
            let tb = t + kinetic_tail(u, kappa);
            return Ok(KineticTrajectory {
                times,
                values,
                blowup_time: (tb <= t_end).then_some(tb),
            });
        }
        // Keep steps proportional to the local growth time near blow-up.
        if kappa > 1.0 && u > 1.0 {
            dt = dt.min(0.2 / u.powf(kappa - 1.0));
        }
        let step = dt.min(t_end - t);
        match rk::dopri_step(&mut rhs, &[u], step, &mut y_new, &mut err) {
            Ok(()) => {
                let scale = abs_tol * (1.0 + u.abs().max(y_new[0].abs()));
                let ratio = err[0].abs() / scale;
                if ratio <= 1.0 && y_new[0] > 0.0 {
                    t += step;
                    u = y_new[0];
                    times.push(t);
                    values.push(u);
                    let factor = if ratio == 0.0 {
                        5.0
                    } else {
                        (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    dt = step * factor;
                } else {
                    dt = step * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.5);
                }
            }
            Err(_) => dt = step * 0.25,
        }
        if dt * (1.0 + u.powf(kappa - 1.0)) < dt_floor * t_end.max(1.0) {
            return Err(Error::NumericalFailure {
                t,
                reason: format!("kinetic step underflow (dt = {dt:e}) at tolerance {abs_tol:e}"),
            });
        }
    }
    Ok(KineticTrajectory {
        times,
        values,
        blowup_time: None,
    })
}

/// Value of the homogeneous kinetics at time `t`, or `None` once it has blown up.
pub fn kinetic_value_at(u0: f64, params: &ModelParams, t: f64, abs_tol: f64) -> Result<Option<f64>> {
    if t == 0.0 {
        return Ok(Some(u0));
    }
    let traj = integrate_kinetic(u0, params, t, abs_tol)?;
    Ok(match traj.blowup_time {
        Some(_) => None,
        None if *traj.times.last().unwrap() >= t => Some(traj.final_value()),
        None => None,
    })
}
