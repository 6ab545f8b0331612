//! Time steppers for the constrained system and per-step diagnostics.
//!
//! Both methods are explicit and first order. `Euler` updates the matrix
//! additively (`g + h·gξ̂`) and re-projects the rotation block; `LieEuler`
//! uses `g·exp(hξ)` and stays on the group.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::constraints::{constraint_gradients, ConstraintGraph};
use crate::dynamics::{
    check_on_manifold, constrained_el_rhs, controlled_rhs, regularity_check, resolve_multipliers,
    LagrangianModel,
};
use crate::kinematic::project_onto_constraints;
use crate::lie::{AlgebraElement, GroupElement, ProductElement};
use crate::{GeoError, Result, Scalar};

/// Tolerance on `|Φ|` and `|dΦ/dt|` for an initial state to be accepted.
pub const INITIAL_STATE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Euler,
    #[default]
    LieEuler,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::LieEuler => "lie_euler",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "lie_euler" => Ok(Method::LieEuler),
            other => Err(GeoError::invalid(format!(
                "unknown method {other:?} (expected euler or lie_euler)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig<T: Scalar> {
    pub method: Method,
    /// Step size in seconds.
    pub h: T,
    /// Number of steps `N`; the horizon is `N·h`.
    pub steps: usize,
    /// Keep every `k`-th state (steps `0, k, 2k, …`).
    pub record_every: usize,
    /// Re-solve multipliers every step; otherwise the initial `λ` is held.
    pub refresh_multipliers: bool,
    /// Project positions back onto `Φ = 0` after each step.
    pub project_positions: bool,
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn new(method: Method, h: T, steps: usize) -> Self {
        Self {
            method,
            h,
            steps,
            record_every: 1,
            refresh_multipliers: true,
            project_positions: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > T::zero()) || !self.h.is_finite() {
            return Err(GeoError::invalid("step size h must be positive and finite"));
        }
        if self.steps == 0 {
            return Err(GeoError::invalid("step count must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(GeoError::invalid("record_every must be at least 1"));
        }
        Ok(())
    }
}

/// Configuration and stacked body velocity at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T: Scalar> {
    pub time: T,
    pub g: ProductElement<T>,
    pub xi: DVector<T>,
}

impl<T: Scalar> SystemState<T> {
    pub fn new(g: ProductElement<T>, xi: DVector<T>) -> Result<Self> {
        if xi.len() != g.algebra_dim() {
            return Err(GeoError::invalid(format!(
                "velocity has length {}, configuration needs {}",
                xi.len(),
                g.algebra_dim()
            )));
        }
        Ok(Self { time: T::zero(), g, xi })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T: Scalar> {
    pub phi: DVector<T>,
    pub phi_rate: DVector<T>,
    pub energy: T,
    /// `Ad*_{g_i⁻¹}(𝕀_i ξ_i)`, stacked per agent.
    pub spatial_momentum: DVector<T>,
    pub orthogonality_error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T: Scalar> {
    pub step: usize,
    pub state: SystemState<T>,
    /// Body acceleration used to leave this state.
    pub xi_dot: DVector<T>,
    /// Multipliers (empty for the unconstrained or controlled system).
    pub lambda: DVector<T>,
    pub diagnostics: Diagnostics<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub method: Method,
    pub h: T,
    pub records: Vec<StepRecord<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<T> {
        self.records.iter().map(|r| r.state.time).collect()
    }

    pub fn final_state(&self) -> Option<&SystemState<T>> {
        self.records.last().map(|r| &r.state)
    }

    pub fn max_abs_phi(&self) -> T {
        self.fold(|r| r.diagnostics.phi.iter().fold(T::zero(), |m, x| m.max(x.abs())))
    }

    pub fn max_abs_phi_rate(&self) -> T {
        self.fold(|r| r.diagnostics.phi_rate.iter().fold(T::zero(), |m, x| m.max(x.abs())))
    }

    pub fn max_orthogonality_error(&self) -> T {
        self.fold(|r| r.diagnostics.orthogonality_error)
    }

    /// `max_t max_edges |‖p_i − p_j‖ − c|` with `c` the separation the edge enforces.
    pub fn max_separation_error(&self, graph: &ConstraintGraph<T>) -> T {
        self.fold(|r| {
            graph.edges().iter().fold(T::zero(), |m, e| {
                let d = (r.state.g.agent(e.i).translation() - r.state.g.agent(e.j).translation()).norm();
                m.max((d - graph.squared_separation(e).sqrt()).abs())
            })
        })
    }

    fn fold(&self, f: impl Fn(&StepRecord<T>) -> T) -> T {
        self.records.iter().fold(T::zero(), |m, r| m.max(f(r)))
    }
}

fn diagnostics<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    state: &SystemState<T>,
) -> Result<Diagnostics<T>> {
    let eval = constraint_gradients(graph, &state.g)?;
    Ok(Diagnostics {
        phi_rate: &eval.trivialized_rows * &state.xi,
        phi: eval.values,
        energy: model.energy(&state.g, &state.xi)?,
        spatial_momentum: model.spatial_momentum(&state.g, &state.xi)?,
        orthogonality_error: state.g.orthogonality_error(),
    })
}

/// Advances `(g, ξ)` by one step with a given acceleration.
pub fn advance<T: Scalar>(
    method: Method,
    state: &SystemState<T>,
    xi_dot: &DVector<T>,
    h: T,
    step: usize,
) -> Result<SystemState<T>> {
    let g = match method {
        Method::LieEuler => state.g.right_exp(&(&state.xi * h))?,
        Method::Euler => {
            let n = state.g.kind().dim();
            let agents = state
                .g
                .agents()
                .iter()
                .enumerate()
                .map(|(i, gi)| {
                    let xi = AlgebraElement::from_coords_unchecked(
                        gi.kind(),
                        state.xi.rows(i * n, n).into_owned(),
                    );
                    let m = gi.matrix() + gi.matrix() * xi.matrix() * h;
                    GroupElement::from_matrix_projected(gi.kind(), m)
                })
                .collect::<Result<Vec<_>>>()?;
            ProductElement::new(agents)?
        }
    };
    Ok(SystemState {
        time: h * T::lit((step + 1) as f64),
        g,
        xi: &state.xi + xi_dot * h,
    })
}

fn constrained_step<T: Scalar>(
    method: Method,
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    state: &SystemState<T>,
    h: T,
) -> Result<SystemState<T>> {
    let solve = resolve_multipliers(model, graph, &state.g, &state.xi)?;
    let step = (state.time / h).round().as_f64() as usize;
    advance(method, state, &solve.xi_dot, h, step)
}

/// One explicit Euler step with freshly solved multipliers.
pub fn euler_step<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    state: &SystemState<T>,
    h: T,
) -> Result<SystemState<T>> {
    constrained_step(Method::Euler, model, graph, state, h)
}

/// One Lie-Euler step with freshly solved multipliers.
pub fn lie_euler_step<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    state: &SystemState<T>,
    h: T,
) -> Result<SystemState<T>> {
    constrained_step(Method::LieEuler, model, graph, state, h)
}

fn check_dims<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    state: &SystemState<T>,
) -> Result<()> {
    if state.g.len() != model.len() || graph.agents() != model.len() {
        return Err(GeoError::invalid("model, graph and state disagree on the agent count"));
    }
    if state.g.kind() != model.kind() {
        return Err(GeoError::invalid("state and model are on different groups"));
    }
    if state.xi.len() != model.dim() {
        return Err(GeoError::invalid("velocity has the wrong length"));
    }
    Ok(())
}

/// Integrates the constrained dynamics from a feasible, regular initial state.
pub fn run_simulation<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    initial: &SystemState<T>,
    config: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    config.validate()?;
    check_dims(model, graph, initial)?;
    check_on_manifold(graph, &initial.g, &initial.xi, T::lit(INITIAL_STATE_TOL))?;
    let reg = regularity_check(model, graph, &initial.g)?;
    if !reg.regular {
        return Err(GeoError::SingularConstraint {
            condition: (reg.sigma_max / reg.sigma_min).as_f64(),
            reason: "initial configuration fails the regularity condition".into(),
        });
    }

    let mut held = None;
    let at = |step: usize| move |e: GeoError| GeoError::AtStep { step, source: Box::new(e) };
    simulate(config, initial, |step, state| {
        let lambda = if config.refresh_multipliers || held.is_none() {
            let s = resolve_multipliers(model, graph, &state.g, &state.xi).map_err(at(step))?;
            held = Some(s.lambda.clone());
            s.lambda
        } else {
            held.clone().unwrap_or_default()
        };
        let xi_dot = constrained_el_rhs(model, graph, &state.g, &state.xi, &lambda).map_err(at(step))?;
        Ok((xi_dot, lambda))
    }, |state| diagnostics(model, graph, state), |g| {
        if config.project_positions && graph.constraint_count() > 0 {
            project_onto_constraints(graph, &g, T::lit(1e-13), 20)
        } else {
            Ok(g)
        }
    })
}

/// Integrates the unconstrained system driven by body forces `control(step, state)`.
///
/// `graph` is used for diagnostics only.
pub fn run_controlled<T: Scalar, F>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    initial: &SystemState<T>,
    config: &IntegratorConfig<T>,
    mut control: F,
) -> Result<Trajectory<T>>
where
    F: FnMut(usize, &SystemState<T>) -> Result<DVector<T>>,
{
    config.validate()?;
    check_dims(model, graph, initial)?;
    simulate(config, initial, |step, state| {
        let u = control(step, state)?;
        let xi_dot = controlled_rhs(model, &state.g, &state.xi, &u)
            .map_err(|e| GeoError::AtStep { step, source: Box::new(e) })?;
        Ok((xi_dot, DVector::zeros(0)))
    }, |state| diagnostics(model, graph, state), Ok)
}

fn simulate<T: Scalar>(
    config: &IntegratorConfig<T>,
    initial: &SystemState<T>,
    mut rhs: impl FnMut(usize, &SystemState<T>) -> Result<(DVector<T>, DVector<T>)>,
    diag: impl Fn(&SystemState<T>) -> Result<Diagnostics<T>>,
    post: impl Fn(ProductElement<T>) -> Result<ProductElement<T>>,
) -> Result<Trajectory<T>> {
    let mut records = Vec::with_capacity(config.steps / config.record_every + 1);
    let mut state = SystemState {
        time: T::zero(),
        ..initial.clone()
    };
    for step in 0..=config.steps {
        let (xi_dot, lambda) = rhs(step, &state)?;
        if step % config.record_every == 0 || step == config.steps {
            let diagnostics = diag(&state).map_err(|e| GeoError::AtStep { step, source: Box::new(e) })?;
            records.push(StepRecord {
                step,
                state: state.clone(),
                xi_dot: xi_dot.clone(),
                lambda,
                diagnostics,
            });
        }
        if step == config.steps {
            break;
        }
        let mut next = advance(config.method, &state, &xi_dot, config.h, step)
            .map_err(|e| GeoError::AtStep { step, source: Box::new(e) })?;
        next.g = post(next.g).map_err(|e| GeoError::AtStep { step, source: Box::new(e) })?;
        if next.xi.iter().any(|x| !x.is_finite()) {
            return Err(GeoError::AtStep {
                step,
                source: Box::new(GeoError::Numeric("velocity became non-finite".into())),
            });
        }
        state = next;
    }
    Ok(Trajectory {
        method: config.method,
        h: config.h,
        records,
    })
}
