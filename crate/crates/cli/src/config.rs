//! Scenario files.
//!
//! A scenario is a TOML document. Keys, units and defaults:
//!
//! ```toml
//! group = "SE3"                      # SE2 | SE3 | SO3
//! force_sign_convention = "variational"   # or "as_printed" (SE3 only)
//!
//! [integrator]
//! method = "lie_euler"               # or "euler"
//! h = 0.005                          # s
//! steps = 5000
//! record_every = 1
//! refresh_multipliers = true
//! project_positions = false
//!
//! [vehicle]                          # SE3 defaults shared by every agent
//! mass = 123.8                       # kg
//! added_mass = [65.0, 70.0, 75.0]    # kg, diagonal; M = mass·I + diag(added_mass)
//! inertia = [5.46, 5.29, 5.72]       # kg·m², diagonal J
//! rho_gamma_g = 1215.8               # N
//! r_bar = [0.0, 0.0, -0.007]         # m, body frame
//! radius = 1.0                       # m
//! g_grav = 9.81                      # m/s²
//!
//! [[agent]]                          # one table per agent, in order
//! position = [0.0, 0.0, 0.0]         # SE3: b (m)
//! rotation = [[1,0,0],[0,1,0],[0,0,1]]   # SE3/SO3: R, rows; default identity
//! velocity = [0.1, 0.2, 1.0]         # SE3: world-frame ḃ (m/s), ν = Rᵀ·velocity
//! angular_velocity = [0.3, 0.2, 0.1] # SE3/SO3: body Ω (rad/s)
//! # SE2 agents instead use pose = [x, y, θ] and velocity = [v1, v2, ω] (body),
//! # with metric = [m1, m2, m3] (diagonal kinetic metric, default ones).
//! # Any [vehicle] key may be overridden per agent.
//!
//! [[constraint]]                     # agents are 1-based
//! i = 1
//! j = 2
//! k = 1                              # optional, defaults to the table's position
//! distance = 10.0                    # m
//!
//! [output]                           # file names inside the output directory
//! trajectory = "trajectory.csv"
//! diagnostics = "diagnostics.csv"
//! controls = "controls.csv"
//! report = "report.txt"
//! ```

use std::path::Path;
use std::sync::Arc;

use geofeas_core::auv::{AuvParams, ForceSignConvention};
use geofeas_core::dynamics::{AgentModel, LagrangianModel};
use geofeas_core::{
    ConstraintGraph, ConstraintKind, EdgeConstraint, GroupElement, GroupKind, IntegratorConfig,
    Method, ProductElement, SystemState,
};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    method: Option<String>,
    h: Option<f64>,
    steps: Option<usize>,
    record_every: Option<usize>,
    refresh_multipliers: Option<bool>,
    project_positions: Option<bool>,
}

/// Shared by `[vehicle]` and `[[agent]]`; pose keys are only legal in the latter.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    mass: Option<f64>,
    added_mass: Option<[f64; 3]>,
    inertia: Option<[f64; 3]>,
    rho_gamma_g: Option<f64>,
    r_bar: Option<[f64; 3]>,
    radius: Option<f64>,
    g_grav: Option<f64>,
    metric: Option<Vec<f64>>,
    position: Option<[f64; 3]>,
    rotation: Option<[[f64; 3]; 3]>,
    pose: Option<[f64; 3]>,
    velocity: Option<[f64; 3]>,
    angular_velocity: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    i: usize,
    j: usize,
    k: Option<usize>,
    distance: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    trajectory: Option<String>,
    diagnostics: Option<String>,
    controls: Option<String>,
    report: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    group: String,
    force_sign_convention: Option<String>,
    #[serde(default)]
    integrator: RawIntegrator,
    #[serde(default)]
    vehicle: RawAgent,
    #[serde(default, rename = "agent")]
    agents: Vec<RawAgent>,
    #[serde(default, rename = "constraint")]
    constraints: Vec<RawConstraint>,
    #[serde(default)]
    output: RawOutput,
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub trajectory: String,
    pub diagnostics: String,
    pub controls: String,
    pub report: String,
}

/// Per-agent dynamics parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentParams {
    Vehicle(AuvParams<f64>),
    /// Diagonal kinetic metric, no potential.
    Free(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub group: GroupKind,
    pub convention: ForceSignConvention,
    pub integrator: IntegratorConfig<f64>,
    pub agents: Vec<AgentParams>,
    pub graph: ConstraintGraph<f64>,
    pub initial: SystemState<f64>,
    pub output: OutputPaths,
    /// The file as read, kept for provenance.
    pub source: String,
}

fn invalid(key: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.into(),
        message: msg.into(),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Parse { line, column, message, .. } => CliError::Parse {
                path: path.display().to_string(),
                line,
                column,
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            CliError::Parse {
                path: "<input>".into(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        build(raw, text)
    }

    pub fn model(&self) -> Result<LagrangianModel<f64>, CliError> {
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let m = match a {
                    AgentParams::Vehicle(p) => AgentModel::new(
                        p.metric(),
                        Arc::new(p.potential(self.convention)),
                    ),
                    AgentParams::Free(diag) => {
                        AgentModel::free(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
                    }
                };
                m.map_err(|e| invalid(format!("agent[{}]", i + 1), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        LagrangianModel::new(self.group, agents).map_err(|e| invalid("agent", e.to_string()))
    }
}

fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| invalid(key, "missing required key"))
}

fn finite(values: &[f64], key: &str) -> Result<(), CliError> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(key, "values must be finite"))
    }
}

fn vehicle(defaults: &RawAgent, a: &RawAgent, key: &str) -> Result<AuvParams<f64>, CliError> {
    let pick = |x: Option<f64>, d: Option<f64>, name: &str| need(x.or(d), &format!("{key}.{name}"));
    let pick3 = |x: Option<[f64; 3]>, d: Option<[f64; 3]>, name: &str| {
        need(x.or(d), &format!("{key}.{name}"))
    };
    let mass = pick(a.mass, defaults.mass, "mass")?;
    let added = pick3(a.added_mass, defaults.added_mass, "added_mass")?;
    let inertia = pick3(a.inertia, defaults.inertia, "inertia")?;
    let p = AuvParams {
        mass,
        mass_matrix: Matrix3::from_diagonal(&(Vector3::from(added).add_scalar(mass))),
        inertia: Matrix3::from_diagonal(&Vector3::from(inertia)),
        rho_gamma_g: pick(a.rho_gamma_g, defaults.rho_gamma_g, "rho_gamma_g")?,
        r_bar: Vector3::from(pick3(a.r_bar, defaults.r_bar, "r_bar")?),
        radius: pick(a.radius, defaults.radius, "radius")?,
        distance: 1.0,
        g_grav: pick(a.g_grav, defaults.g_grav, "g_grav")?,
    };
    let flat: Vec<f64> = [p.mass, p.rho_gamma_g, p.radius, p.g_grav]
        .into_iter()
        .chain(added)
        .chain(inertia)
        .chain(p.r_bar.iter().copied())
        .collect();
    finite(&flat, key)?;
    p.validate().map_err(|e| invalid(key, e.to_string()))?;
    Ok(p)
}

fn forbid(present: bool, key: &str, group: GroupKind) -> Result<(), CliError> {
    if present {
        Err(invalid(key, format!("not used by {group} scenarios")))
    } else {
        Ok(())
    }
}

fn rotation(r: Option<[[f64; 3]; 3]>, key: &str) -> Result<Matrix3<f64>, CliError> {
    let r = r.unwrap_or([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    finite(&r.concat(), key)?;
    Ok(Matrix3::from_fn(|i, j| r[i][j]))
}

fn build(raw: RawConfig, text: &str) -> Result<ScenarioConfig, CliError> {
    let group: GroupKind = raw.group.parse().map_err(|_| {
        invalid("group", format!("unknown group {:?} (expected SE2, SE3 or SO3)", raw.group))
    })?;
    let convention = match &raw.force_sign_convention {
        Some(s) => s
            .parse()
            .map_err(|e: geofeas_core::GeoError| invalid("force_sign_convention", e.to_string()))?,
        None => ForceSignConvention::default(),
    };

    let ri = &raw.integrator;
    let method = match &ri.method {
        Some(m) => m
            .parse::<Method>()
            .map_err(|e| invalid("integrator.method", e.to_string()))?,
        None => Method::default(),
    };
    let mut integrator = IntegratorConfig::new(method, ri.h.unwrap_or(0.005), ri.steps.unwrap_or(5000));
    integrator.record_every = ri.record_every.unwrap_or(1);
    integrator.refresh_multipliers = ri.refresh_multipliers.unwrap_or(true);
    integrator.project_positions = ri.project_positions.unwrap_or(false);
    if !(integrator.h > 0.0) || !integrator.h.is_finite() {
        return Err(invalid("integrator.h", "must be positive and finite"));
    }
    if integrator.steps == 0 {
        return Err(invalid("integrator.steps", "must be at least 1"));
    }
    if integrator.record_every == 0 {
        return Err(invalid("integrator.record_every", "must be at least 1"));
    }

    let v = &raw.vehicle;
    for (present, key) in [
        (v.position.is_some(), "vehicle.position"),
        (v.rotation.is_some(), "vehicle.rotation"),
        (v.pose.is_some(), "vehicle.pose"),
        (v.velocity.is_some(), "vehicle.velocity"),
        (v.angular_velocity.is_some(), "vehicle.angular_velocity"),
    ] {
        if present {
            return Err(invalid(key, "initial conditions belong in [[agent]] tables"));
        }
    }
    if raw.agents.is_empty() {
        return Err(invalid("agent", "at least one [[agent]] table is required"));
    }

    let n = group.dim();
    let mut params = Vec::with_capacity(raw.agents.len());
    let mut elements = Vec::with_capacity(raw.agents.len());
    let mut xi = DVector::zeros(n * raw.agents.len());
    for (idx, a) in raw.agents.iter().enumerate() {
        let key = format!("agent[{}]", idx + 1);
        let k = |s: &str| format!("{key}.{s}");
        match group {
            GroupKind::SE3 => {
                forbid(a.pose.is_some(), &k("pose"), group)?;
                forbid(a.metric.is_some(), &k("metric"), group)?;
                let p = vehicle(v, a, &key)?;
                let r = rotation(a.rotation, &k("rotation"))?;
                let b = need(a.position, &k("position"))?;
                finite(&b, &k("position"))?;
                let g = GroupElement::se3(r, Vector3::from(b))
                    .map_err(|e| invalid(k("rotation"), e.to_string()))?;
                let vel = a.velocity.unwrap_or_default();
                let om = a.angular_velocity.unwrap_or_default();
                finite(&vel, &k("velocity"))?;
                finite(&om, &k("angular_velocity"))?;
                let nu = g.rotation3().transpose() * Vector3::from(vel);
                xi.rows_mut(n * idx, 3).copy_from(&nu);
                xi.rows_mut(n * idx + 3, 3).copy_from(&Vector3::from(om));
                params.push(AgentParams::Vehicle(p));
                elements.push(g);
            }
            GroupKind::SE2 => {
                for (present, name) in [
                    (a.position.is_some(), "position"),
                    (a.rotation.is_some(), "rotation"),
                    (a.angular_velocity.is_some(), "angular_velocity"),
                    (a.mass.is_some(), "mass"),
                    (a.inertia.is_some(), "inertia"),
                ] {
                    forbid(present, &k(name), group)?;
                }
                let pose = need(a.pose, &k("pose"))?;
                finite(&pose, &k("pose"))?;
                let vel = a.velocity.unwrap_or_default();
                finite(&vel, &k("velocity"))?;
                xi.rows_mut(n * idx, 3).copy_from(&Vector3::from(vel));
                params.push(AgentParams::Free(metric(a.metric.as_deref().or(v.metric.as_deref()), 3, &k("metric"))?));
                elements.push(GroupElement::se2(pose[0], pose[1], pose[2]));
            }
            GroupKind::SO3 => {
                for (present, name) in [
                    (a.position.is_some(), "position"),
                    (a.pose.is_some(), "pose"),
                    (a.velocity.is_some(), "velocity"),
                ] {
                    forbid(present, &k(name), group)?;
                }
                let r = rotation(a.rotation, &k("rotation"))?;
                let g = GroupElement::so3(r).map_err(|e| invalid(k("rotation"), e.to_string()))?;
                let om = a.angular_velocity.unwrap_or_default();
                finite(&om, &k("angular_velocity"))?;
                xi.rows_mut(n * idx, 3).copy_from(&Vector3::from(om));
                let diag = a.inertia.or(v.inertia).map(|d| d.to_vec());
                params.push(AgentParams::Free(metric(diag.as_deref(), 3, &k("inertia"))?));
                elements.push(g);
            }
        }
    }

    let agents = raw.agents.len();
    let kind = match group {
        GroupKind::SE2 => ConstraintKind::Se2Frobenius,
        _ => ConstraintKind::Se3CenterDistance,
    };
    if group == GroupKind::SO3 && !raw.constraints.is_empty() {
        return Err(invalid("constraint", "SO3 scenarios cannot carry distance constraints"));
    }
    let mut edges = Vec::with_capacity(raw.constraints.len());
    for (idx, c) in raw.constraints.iter().enumerate() {
        let key = format!("constraint[{}]", idx + 1);
        for (name, v) in [("i", c.i), ("j", c.j)] {
            if v == 0 || v > agents {
                return Err(invalid(format!("{key}.{name}"), format!("agent index must be in 1..={agents}")));
            }
        }
        if c.i == c.j {
            return Err(invalid(format!("{key}.j"), "an edge needs two distinct agents"));
        }
        if !(c.distance > 0.0) || !c.distance.is_finite() {
            return Err(invalid(format!("{key}.distance"), "must be positive and finite"));
        }
        edges.push(EdgeConstraint::new(c.i - 1, c.j - 1, c.k.unwrap_or(idx + 1), c.distance));
    }
    let radii = params
        .iter()
        .map(|p| match p {
            AgentParams::Vehicle(v) => v.radius,
            AgentParams::Free(_) => 0.0,
        })
        .collect();
    let graph = ConstraintGraph::new(agents, kind, radii, edges)
        .map_err(|e| invalid("constraint", e.to_string()))?;

    let g = ProductElement::new(elements).map_err(|e| invalid("agent", e.to_string()))?;
    let initial = SystemState::new(g, xi).map_err(|e| invalid("agent", e.to_string()))?;

    let o = raw.output;
    let output = OutputPaths {
        trajectory: o.trajectory.unwrap_or_else(|| "trajectory.csv".into()),
        diagnostics: o.diagnostics.unwrap_or_else(|| "diagnostics.csv".into()),
        controls: o.controls.unwrap_or_else(|| "controls.csv".into()),
        report: o.report.unwrap_or_else(|| "report.txt".into()),
    };
    for (name, file) in [
        ("output.trajectory", &output.trajectory),
        ("output.diagnostics", &output.diagnostics),
        ("output.controls", &output.controls),
        ("output.report", &output.report),
    ] {
        let p = Path::new(file);
        if file.is_empty() || p.is_absolute() || p.components().count() != 1 {
            return Err(invalid(name, "must be a plain file name"));
        }
    }

    Ok(ScenarioConfig {
        group,
        convention,
        integrator,
        agents: params,
        graph,
        initial,
        output,
        source: text.to_string(),
    })
}

fn metric(diag: Option<&[f64]>, n: usize, key: &str) -> Result<Vec<f64>, CliError> {
    let d = diag.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    if d.len() != n {
        return Err(invalid(key, format!("expected {n} diagonal entries, got {}", d.len())));
    }
    if d.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(invalid(key, "diagonal entries must be positive"));
    }
    Ok(d)
}
