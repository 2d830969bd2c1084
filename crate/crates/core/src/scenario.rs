//! Scenario configuration, presets and the end-to-end run pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostics::{
    blowup_set_check, check_monotone_bounds, compute_record, fit_blowup, profile_extract, BlowUpReport,
    FitConfig, Violation, DEFAULT_DELTA,
};
use crate::grid::{Field, Geometry, Grid};
use crate::initial::{InitialSpec, SpikySpec};
use crate::integrator::{run, IntegratorConfig, RunOutput, RunSettings, Scheme};
use crate::model::{classify_regime, hypothesis_sets, HypothesisContext, Inequality, ModelParams, RegimeReport, Relation};
use crate::spectral::neumann_eigenpairs;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Interval,
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    257
}

impl GeometrySpec {
    pub fn interval(length: f64, points: usize) -> Self {
        Self {
            kind: GeometryKind::Interval,
            dimension: None,
            length: Some(length),
            points,
        }
    }

    pub fn ball(dimension: u32, points: usize) -> Self {
        Self {
            kind: GeometryKind::Ball,
            dimension: Some(dimension),
            length: None,
            points,
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        match self.kind {
            GeometryKind::Interval => {
                if self.dimension.is_some_and(|n| n != 1) {
                    return Err(Error::Config("geometry.dimension must be 1 for an interval".into()));
                }
                Ok(Geometry::Interval {
                    length: self.length.unwrap_or(1.0),
                })
            }
            GeometryKind::Ball => {
                if self.length.is_some() {
                    return Err(Error::Config("geometry.length is fixed to 1 for a ball".into()));
                }
                let dimension = self
                    .dimension
                    .ok_or_else(|| Error::Config("geometry.dimension is required for a ball".into()))?;
                Ok(Geometry::Ball { dimension })
            }
        }
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.geometry()?, self.points).map_err(|e| Error::Config(format!("geometry: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Exponent of the negative moment `mean(u^-delta)`.
    pub delta: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA }
    }
}

/// A fully specified, deterministic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub params: ModelParams,
    pub geometry: GeometrySpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub time: RunSettings,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Cross-field validation; also builds the grid and the initial field.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("name {:?} is not a valid directory name", self.name)));
        }
        self.integrator.validate()?;
        self.time.validate()?;
        if !(self.diagnostics.delta > 0.0) {
            return Err(Error::Config(format!(
                "diagnostics.delta must be positive, got {}",
                self.diagnostics.delta
            )));
        }
        if matches!(self.initial, InitialSpec::Spiky { .. }) && self.geometry.kind != GeometryKind::Ball {
            return Err(Error::Config("spiky initial data requires geometry.kind = \"ball\"".into()));
        }
        let grid = self.geometry.build()?;
        self.initial.build(&grid, &self.params).map_err(|e| match e {
            Error::Domain(m) => Error::Config(format!("initial: {m}")),
            other => other,
        })?;
        Ok(())
    }

    pub fn context(&self) -> HypothesisContext {
        HypothesisContext {
            dimension: Some(match self.geometry.kind {
                GeometryKind::Interval => 1,
                GeometryKind::Ball => self.geometry.dimension.unwrap_or(0),
            }),
        }
    }

    pub fn build(&self) -> Result<(Grid, Field)> {
        let grid = self.geometry.build()?;
        let u0 = self.initial.build(&grid, &self.params)?;
        Ok((grid, u0))
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            overflow_guard: self.integrator.overflow_guard,
            ..FitConfig::default()
        }
    }
}

/// Parses TOML (`.toml`) or JSON (anything else) into a generic value.
fn parse_value(path: &Path, text: &str) -> Result<Value> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str::<Value>(text).map_err(|e| parse_err(e.to_string()))
    } else {
        serde_json::from_str::<Value>(text)
            .map_err(|e| parse_err(format!("line {}, column {}: {e}", e.line(), e.column())))
    }
}

/// Recursively overlays `top` onto `base`. A table whose `type` tag
/// changes is replaced rather than merged, so variant fields do not leak.
pub fn deep_merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) if b.contains_key("type") && t.contains_key("type") && b["type"] != t["type"] => {
            *b = t;
        }
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn from_value(value: Value, origin: &str) -> Result<ScenarioConfig> {
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{origin}: {e}")))
}

/// Reads a config file, overlays it on the named preset (if any), validates
/// it and re-checks the preset's hypotheses.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    load_config_with(path, None, true)
}

/// [`load_config`] with an optional preset override and hypothesis check
/// switch.
pub fn load_config_with(path: &Path, preset_name: Option<&str>, check: bool) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value = parse_value(path, &text)?;
    if let Some(name) = preset_name {
        value
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{}: top level must be a table", path.display())))?
            .insert("preset".into(), Value::String(name.into()));
    }
    config_from_value(value, &path.display().to_string(), check)
}

/// Resolves a generic config value (with optional `preset` key) into a
/// validated scenario.
pub fn config_from_value(value: Value, origin: &str, check: bool) -> Result<ScenarioConfig> {
    let preset_name = value.get("preset").and_then(Value::as_str).map(str::to_owned);
    let merged = match &preset_name {
        Some(name) => {
            let mut base = serde_json::to_value(preset_unchecked(name)?)?;
            deep_merge(&mut base, value);
            base
        }
        None => value,
    };
    let config = from_value(merged, origin)?;
    config.validate()?;
    if check && config.preset.is_some() {
        check_hypotheses(&config)?;
    }
    Ok(config)
}

pub struct PresetInfo {
    pub name: &'static str,
    pub statement: &'static str,
}

pub const PRESETS: &[PresetInfo] = &[
    PresetInfo {
        name: "turing-instability",
        statement: "u = 1 is linearly unstable if and only if mu_2^2 < p - 1; Turing condition p - r*gamma < 1",
    },
    PresetInfo {
        name: "ode-blowup",
        statement: "p >= r, p - r*gamma > 1 and mean(u0) > 1 give finite-time blow-up",
    },
    PresetInfo {
        name: "variational-blowup",
        statement: "r = p + 1, gamma < min(1, (p-1)/(p+1)) and J(u0) <= 0 give finite-time blow-up",
    },
    PresetInfo {
        name: "variational-global",
        statement: "r = p + 1, (p-1)/(p+1) < gamma < 1 and 1 < p < (N+2)/(N-2) give a global-in-time solution",
    },
    PresetInfo {
        name: "small-rho-global",
        statement: "(p-1)/r < min(1, 2/N, (1 - 1/r)/2) and 0 < gamma < 1 give a global-in-time solution",
    },
    PresetInfo {
        name: "region-blowup",
        statement: "0 < gamma < 1, r <= 1, (p-1)/r > 1 and w(0) < zeta(0)^(1-gamma) give finite-time blow-up",
    },
    PresetInfo {
        name: "region-global",
        statement: "gamma > 1, r >= 1, (p-1)/r < 1, w(0) < zeta(0)^(1-gamma) and zeta(0)^(1+gamma) > z(0) give a global-in-time solution",
    },
    PresetInfo {
        name: "ddi-spiky",
        statement: "N >= 3, 1 <= r <= p, p > N/(N-2), 2/N < (p-1)/r < gamma: spiky data lambda*phi_delta blow up for small delta although the kinetics are stable",
    },
    PresetInfo {
        name: "rate-fit",
        statement: "diffusion-induced blow-up has the type-I rate ||u||_inf ~ (T - t)^(-1/(p-1))",
    },
    PresetInfo {
        name: "infinite-time-growth",
        statement: "r = p + 1, gamma = (p-1)/(p+1), J(u0) < 0: no finite blow-up time, unbounded growth expected",
    },
];

fn params(p: f64, q: f64, r: f64, s: f64) -> ModelParams {
    ModelParams::new(p, q, r, s).expect("preset parameters are valid")
}

fn base(name: &str, params: ModelParams, geometry: GeometrySpec, initial: InitialSpec) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        preset: Some(name.into()),
        params,
        geometry,
        initial,
        integrator: IntegratorConfig::default(),
        time: RunSettings::default(),
        diagnostics: DiagnosticsConfig::default(),
        output_dir: None,
    }
}

fn cosine(base: f64, amplitude: f64) -> InitialSpec {
    InitialSpec::Cosine {
        base,
        amplitude,
        wavenumber: 1,
    }
}

fn first_record(config: &ScenarioConfig) -> Result<crate::diagnostics::DiagnosticsRecord> {
    let (grid, u0) = config.build()?;
    compute_record(&grid, &config.params, &u0, 0.0, config.diagnostics.delta)
}

/// The preset scenario without the hypothesis re-check.
pub fn preset_unchecked(name: &str) -> Result<ScenarioConfig> {
    let mut c = match name {
        "turing-instability" => {
            let mut c = base(
                name,
                params(2.0, 1.0, 2.0, 0.0),
                GeometrySpec::interval(2.0 * std::f64::consts::PI, 257),
                InitialSpec::Perturbed {
                    base: 1.0,
                    eps: 1e-4,
                    mode: 2,
                },
            );
            c.integrator.scheme = Scheme::ImexCn;
            c.time.t_end = 6.0;
            c
        }
        "ode-blowup" => {
            let mut c = base(
                name,
                params(3.0, 1.0, 1.0, 0.0),
                GeometrySpec::interval(1.0, 65),
                InitialSpec::Constant { value: 2.0 },
            );
            c.time.t_end = 2.0;
            c
        }
        "variational-blowup" => {
            let mut c = base(
                name,
                params(3.0, 0.25, 4.0, 0.0),
                GeometrySpec::ball(3, 129),
                cosine(1.0, 0.5),
            );
            c.time.t_end = 5.0;
            c.time.snapshot_growth_factor = Some(10.0);
            // Scale the amplitude until the energy is non-positive.
            for _ in 0..64 {
                if first_record(&c)?.j.is_some_and(|j| j <= 0.0) {
                    break;
                }
                if let InitialSpec::Cosine { base, amplitude, .. } = &mut c.initial {
                    *base *= 1.25;
                    *amplitude *= 1.25;
                }
            }
            c
        }
        "variational-global" => {
            let mut c = base(
                name,
                params(3.0, 0.7, 4.0, 0.0),
                GeometrySpec::ball(3, 129),
                cosine(1.0, 0.5),
            );
            c.integrator.scheme = Scheme::ImexCn;
            c.integrator.steady_tol = 0.0;
            c.time.t_end = 50.0;
            c
        }
        "small-rho-global" => {
            let mut c = base(
                name,
                params(1.5, 0.5, 4.0, 0.0),
                GeometrySpec::interval(1.0, 129),
                cosine(1.0, 0.5),
            );
            c.integrator.scheme = Scheme::ImexCn;
            c.time.t_end = 50.0;
            c
        }
        "region-blowup" => region_blowup_preset(name)?,
        "region-global" => {
            let mut c = base(
                name,
                params(2.0, 2.0, 2.0, 0.0),
                GeometrySpec::interval(1.0, 129),
                cosine(0.8, 0.1),
            );
            c.integrator.scheme = Scheme::ImexCn;
            c.integrator.steady_tol = 0.0;
            c.time.t_end = 50.0;
            c
        }
        "ddi-spiky" | "rate-fit" => {
            let mut c = base(
                name,
                params(4.0, 3.5, 1.0, 0.0),
                GeometrySpec::ball(3, 4096),
                InitialSpec::Spiky {
                    lambda: 0.05,
                    delta: 0.02,
                },
            );
            // Near blow-up the steps fall far below the spacing of doubles
            // around t; time is accumulated in extended precision.
            c.integrator.dt_min = 1e-20;
            c.time.t_end = 1.0;
            c.time.snapshot_growth_factor = Some(10.0);
            c
        }
        "infinite-time-growth" => {
            let mut c = base(
                name,
                params(3.0, 0.5, 4.0, 0.0),
                GeometrySpec::interval(2.0 * std::f64::consts::PI, 257),
                cosine(1.0, 0.5),
            );
            c.integrator.scheme = Scheme::ImexCn;
            c.integrator.steady_tol = 0.0;
            c.time.t_end = 50.0;
            c
        }
        other => {
            let known: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
            return Err(Error::Config(format!(
                "unknown preset {other:?}; known presets: {}",
                known.join(", ")
            )));
        }
    };
    c.preset = Some(name.into());
    Ok(c)
}

/// Spiky data scaled to sit inside `w < zeta^(1-gamma)` with a 10% margin.
fn region_blowup_preset(name: &str) -> Result<ScenarioConfig> {
    let prm = params(3.0, 0.5, 1.0, 0.0);
    let delta = 0.01;
    let mut c = base(
        name,
        prm,
        GeometrySpec::ball(3, 2049),
        InitialSpec::Spiky { lambda: 1.0, delta },
    );
    let unit = first_record(&c)?;
    // w scales as lambda^3 and zeta as lambda.
    let lambda = 0.9 * (unit.zeta.powf(1.0 - prm.gamma()) / unit.w).powf(1.0 / (3.0 - (1.0 - prm.gamma())));
    c.initial = InitialSpec::Spiky { lambda, delta };
    c.integrator.scheme = Scheme::ImexCn;
    c.integrator.dt_min = 1e-20;
    c.time.t_end = 20.0;
    c.time.snapshot_growth_factor = Some(10.0);
    Ok(c)
}

/// Builds a preset and re-checks its hypotheses.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let c = preset_unchecked(name)?;
    c.validate()?;
    check_hypotheses(&c)?;
    Ok(c)
}

/// Hypotheses of the scenario's preset evaluated on its parameters and
/// initial data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub preset: String,
    pub inequalities: Vec<Inequality>,
}

impl HypothesisCheck {
    pub fn holds(&self) -> bool {
        self.inequalities.iter().all(Inequality::holds)
    }
}

fn tag_for(preset: &str) -> Option<&'static str> {
    Some(match preset {
        "ode-blowup" => "ode-blowup",
        "variational-blowup" => "variational-blowup",
        "variational-global" => "variational-global",
        "small-rho-global" => "small-rho-global",
        "region-blowup" => "region-blowup",
        "region-global" => "region-global",
        "ddi-spiky" | "rate-fit" => "ddi-spiky",
        _ => return None,
    })
}

pub fn evaluate_hypotheses(config: &ScenarioConfig) -> Result<HypothesisCheck> {
    use Relation::*;
    let name = config
        .preset
        .clone()
        .ok_or_else(|| Error::Config("scenario has no preset to check".into()))?;
    let prm = &config.params;
    let (p, r, g) = (prm.p(), prm.r(), prm.gamma());
    let mut ineq = Vec::new();
    if let Some(tag) = tag_for(&name) {
        let set = hypothesis_sets(prm, config.context())
            .into_iter()
            .find(|s| s.tag == tag)
            .ok_or_else(|| Error::Config(format!("no hypothesis set {tag}")))?;
        ineq.extend(set.hypotheses);
    }
    let (grid, u0) = config.build()?;
    let rec = compute_record(&grid, prm, &u0, 0.0, config.diagnostics.delta)?;
    match name.as_str() {
        "turing-instability" => {
            let mu2 = neumann_eigenpairs(&grid, 2)?.eigenvalues[1];
            ineq.push(Inequality::new("p - r*gamma < 1", p - r * g, Lt, 1.0));
            ineq.push(Inequality::new("mu_2^2 < p - 1", mu2, Lt, p - 1.0));
        }
        "ode-blowup" => ineq.push(Inequality::new("mean(u0) > 1", rec.u_mean, Gt, 1.0)),
        "variational-blowup" => {
            ineq.push(Inequality::new("J(u0) <= 0", rec.j.unwrap_or(f64::NAN), Le, 0.0));
        }
        "region-blowup" => {
            ineq.push(Inequality::new("w(0) < zeta(0)^(1-gamma)", rec.w, Lt, rec.zeta.powf(1.0 - g)));
        }
        "region-global" => {
            ineq.push(Inequality::new("w(0) < zeta(0)^(1-gamma)", rec.w, Lt, rec.zeta.powf(1.0 - g)));
            ineq.push(Inequality::new("zeta(0)^(1+gamma) > z(0)", rec.zeta.powf(1.0 + g), Gt, rec.z));
        }
        "ddi-spiky" | "rate-fit" => {
            let InitialSpec::Spiky { lambda, delta } = config.initial else {
                return Err(Error::Config(format!("preset {name} needs spiky initial data")));
            };
            let spec = SpikySpec::new(lambda, delta, prm)?;
            ineq.push(Inequality::new("delta >= 4h", delta, Ge, 4.0 * grid.spacing()));
            // The kinetics started from the mean must relax, not blow up.
            ineq.push(Inequality::new("p - r*gamma < 1", p - r * g, Lt, 1.0));
            ineq.push(Inequality::new("lambda > 0", spec.lambda(), Gt, 0.0));
        }
        "infinite-time-growth" => {
            ineq.push(Inequality::new("r == p + 1", r, Eq, p + 1.0));
            ineq.push(Inequality::new("gamma == (p-1)/(p+1)", g, Eq, (p - 1.0) / (p + 1.0)));
            ineq.push(Inequality::new("J(u0) < 0", rec.j.unwrap_or(f64::NAN), Lt, 0.0));
        }
        _ => {}
    }
    Ok(HypothesisCheck {
        preset: name,
        inequalities: ineq,
    })
}

/// Fails with [`Error::Hypothesis`] naming every violated inequality.
pub fn check_hypotheses(config: &ScenarioConfig) -> Result<HypothesisCheck> {
    let check = evaluate_hypotheses(config)?;
    let failed: Vec<String> = check
        .inequalities
        .iter()
        .filter(|i| !i.holds())
        .map(|i| format!("{} (lhs = {:.6e}, rhs = {:.6e})", i.statement, i.lhs, i.rhs))
        .collect();
    if failed.is_empty() {
        Ok(check)
    } else {
        Err(Error::Hypothesis {
            preset: check.preset,
            reason: failed.join("; "),
        })
    }
}

/// A finished run together with its post-processing.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub regime: RegimeReport,
    pub output: RunOutput,
    pub blowup_report: Option<BlowUpReport>,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

/// Runs a validated scenario and its diagnostics.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Outcome> {
    let (grid, u0) = config.build()?;
    let output = run(
        &grid,
        &config.params,
        u0,
        &config.integrator,
        &config.time,
        config.diagnostics.delta,
    )?;
    let mut notes = Vec::new();
    let violations = match check_monotone_bounds(&output.records, &config.params, config.integrator.step_tol) {
        Ok(v) => v,
        Err(e) => {
            notes.push(e.to_string());
            Vec::new()
        }
    };
    let blowup_report = match fit_blowup(&output.records, &config.params, &config.fit_config()) {
        Ok(mut rep) => {
            if rep.detected {
                match blowup_set_check(&grid, &output.snapshots, &output.records) {
                    Ok(ev) => rep.single_point = Some(ev),
                    Err(e) => rep.notes.push(e.to_string()),
                }
                if grid.geometry().is_ball() {
                    let last = &output.snapshots[output.snapshots.len() - 1];
                    match profile_extract(&grid, &last.field, &config.params) {
                        Ok(fit) => {
                            rep.profile_slope = Some(fit.power_slope);
                            rep.profile = Some(fit);
                        }
                        Err(e) => rep.notes.push(e.to_string()),
                    }
                }
            }
            Some(rep)
        }
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    Ok(Outcome {
        regime: classify_regime(&config.params, config.context()),
        config: config.clone(),
        grid,
        output,
        blowup_report,
        violations,
        notes,
    })
}
