//! Three underwater vehicles on SE(3) held apart by center-distance constraints.
//!
//! Velocities are `(ν, Ω)` in the body frame; the kinetic metric is
//! `diag(M, J)` with added mass folded into `M`. The potential is
//!
//! ```text
//! U(R, b) = ργg ⟨r̄, Rᵀe₃⟩ + (ργg − m g) b_z
//! ```
//!
//! so the restoring forces are `𝒰 = −Rᵀ∂U/∂b = Rᵀ(m g − ργg) e₃` and
//! `𝒲 = −ργg r̄ × (Rᵀe₃)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};

use crate::constraints::{ConstraintGraph, ConstraintKind, EdgeConstraint};
use crate::dynamics::{control_from_acceleration, AgentModel, LagrangianModel, Potential};
use crate::integrators::{SystemState, Trajectory};
use crate::lie::{vec3, GroupElement, GroupKind, ProductElement};
use crate::{GeoError, Result, Scalar};

/// Sign of the translational buoyancy force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceSignConvention {
    /// `𝒰 = −Rᵀ ∂U/∂b`, consistent with the potential.
    #[default]
    Variational,
    /// The opposite translational sign, `𝒰 = −Rᵀ(m − ργ)g e₃`.
    AsPrinted,
}

impl ForceSignConvention {
    pub fn name(self) -> &'static str {
        match self {
            ForceSignConvention::Variational => "variational",
            ForceSignConvention::AsPrinted => "as_printed",
        }
    }
}

impl fmt::Display for ForceSignConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ForceSignConvention {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variational" => Ok(ForceSignConvention::Variational),
            "as_printed" => Ok(ForceSignConvention::AsPrinted),
            other => Err(GeoError::invalid(format!(
                "unknown force sign convention {other:?} (expected variational or as_printed)"
            ))),
        }
    }
}

/// Physical parameters of one vehicle plus the formation geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct AuvParams<T: Scalar> {
    /// Rigid-body mass `m` (kg).
    pub mass: T,
    /// `M = m·I + added mass` (kg).
    pub mass_matrix: Matrix3<T>,
    /// `J` (kg·m²).
    pub inertia: Matrix3<T>,
    /// Buoyancy lump `ργg` (N).
    pub rho_gamma_g: T,
    /// Center of gravity to center of buoyancy, body frame (m).
    pub r_bar: Vector3<T>,
    /// Radius of the sphere containing the vehicle (m).
    pub radius: T,
    /// Clearance `d` between enclosing spheres (m).
    pub distance: T,
    /// Gravitational acceleration (m/s²), needed for the `m g` weight term.
    pub g_grav: T,
}

impl<T: Scalar> AuvParams<T> {
    /// The published vehicle.
    pub fn published() -> Self {
        let l = T::lit;
        let m = l(123.8);
        Self {
            mass: m,
            mass_matrix: Matrix3::from_diagonal(&Vector3::new(m + l(65.0), m + l(70.0), m + l(75.0))),
            inertia: Matrix3::from_diagonal(&Vector3::new(l(5.46), l(5.29), l(5.72))),
            rho_gamma_g: l(1215.8),
            r_bar: Vector3::new(T::zero(), T::zero(), l(-0.007)),
            radius: T::one(),
            distance: l(10.0),
            g_grav: l(9.81),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("mass_matrix", &self.mass_matrix), ("inertia", &self.inertia)] {
            if (m - m.transpose()).amax() > T::lit(1e-12) * m.amax().max(T::one()) {
                return Err(GeoError::invalid(format!("{name} is not symmetric")));
            }
            if m.cholesky().is_none() {
                return Err(GeoError::invalid(format!("{name} is not positive definite")));
            }
        }
        if !(self.mass > T::zero()) {
            return Err(GeoError::invalid("mass must be positive"));
        }
        if !(self.radius > T::zero()) || !(self.distance > T::zero()) {
            return Err(GeoError::invalid("radius and distance must be positive"));
        }
        Ok(())
    }

    /// `diag(M, J)` in `(ν, Ω)` coordinates.
    pub fn metric(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(6, 6);
        m.view_mut((0, 0), (3, 3)).copy_from(&self.mass_matrix);
        m.view_mut((3, 3), (3, 3)).copy_from(&self.inertia);
        m
    }

    pub fn potential(&self, convention: ForceSignConvention) -> BuoyancyPotential<T> {
        BuoyancyPotential {
            rho_gamma_g: self.rho_gamma_g,
            weight: self.mass * self.g_grav,
            r_bar: self.r_bar,
            convention,
        }
    }
}

/// Gravity plus buoyancy of a submerged rigid body.
#[derive(Debug, Clone, PartialEq)]
pub struct BuoyancyPotential<T: Scalar> {
    pub rho_gamma_g: T,
    /// `m g` (N).
    pub weight: T,
    pub r_bar: Vector3<T>,
    pub convention: ForceSignConvention,
}

impl<T: Scalar> BuoyancyPotential<T> {
    fn e3() -> Vector3<T> {
        Vector3::new(T::zero(), T::zero(), T::one())
    }

    /// `(𝒰, 𝒲)` at `g`.
    pub fn forces(&self, g: &GroupElement<T>) -> (Vector3<T>, Vector3<T>) {
        let rt = g.rotation3().transpose();
        let up = rt * Self::e3();
        let mut u = up * (self.weight - self.rho_gamma_g);
        if self.convention == ForceSignConvention::AsPrinted {
            u = -u;
        }
        let w = -self.r_bar.cross(&up) * self.rho_gamma_g;
        (u, w)
    }
}

impl<T: Scalar> Potential<T> for BuoyancyPotential<T> {
    fn energy(&self, g: &GroupElement<T>) -> T {
        let up = g.rotation3().transpose() * Self::e3();
        self.r_bar.dot(&up) * self.rho_gamma_g + (self.rho_gamma_g - self.weight) * g.translation3()[2]
    }

    fn ambient_gradient(&self, _g: &GroupElement<T>) -> DMatrix<T> {
        let mut m = DMatrix::zeros(4, 4);
        let rot = Self::e3() * self.r_bar.transpose() * self.rho_gamma_g;
        m.view_mut((0, 0), (3, 3)).copy_from(&rot);
        m[(2, 3)] = self.rho_gamma_g - self.weight;
        m
    }

    fn trivialized_gradient(&self, g: &GroupElement<T>) -> DVector<T> {
        let (u, w) = self.forces(g);
        -DVector::from_iterator(6, u.iter().chain(w.iter()).copied())
    }
}

/// `(𝒰_i, 𝒲_i)` for one vehicle.
pub fn potential_forces<T: Scalar>(
    params: &AuvParams<T>,
    g: &GroupElement<T>,
    convention: ForceSignConvention,
) -> Result<(Vector3<T>, Vector3<T>)> {
    if g.kind() != GroupKind::SE3 {
        return Err(GeoError::invalid("vehicle configurations live on SE3"));
    }
    Ok(params.potential(convention).forces(g))
}

/// Identical vehicles, one per agent.
pub fn auv_model<T: Scalar>(
    params: &AuvParams<T>,
    agents: usize,
    convention: ForceSignConvention,
) -> Result<LagrangianModel<T>> {
    params.validate()?;
    let agent = AgentModel::new(params.metric(), Arc::new(params.potential(convention)))?;
    LagrangianModel::new(GroupKind::SE3, vec![agent; agents])
}

/// Fully connected center-distance graph with the vehicle radius and clearance.
pub fn complete_graph<T: Scalar>(params: &AuvParams<T>, agents: usize) -> Result<ConstraintGraph<T>> {
    let mut edges = Vec::new();
    for i in 0..agents {
        for j in i + 1..agents {
            edges.push(EdgeConstraint::new(i, j, edges.len() + 1, params.distance));
        }
    }
    ConstraintGraph::new(agents, ConstraintKind::Se3CenterDistance, vec![params.radius; agents], edges)
}

/// The published initial state: all vehicles level, `Ω = (0.3, 0.2, 0.1)`,
/// world velocity `(0.1, 0.2, 1)`, centers on a 12 m equilateral triangle.
///
/// The third center is the exact triangle vertex (`b₂` rotated by −60° about
/// `e₃`), which agrees with the published rounded coordinates to 5e-5 m.
pub fn published_initial_state<T: Scalar>() -> SystemState<T> {
    let l = T::lit;
    let b2 = Vector3::new(10.0, 44f64.sqrt(), 0.0);
    let b3 = Rotation3::from_axis_angle(&Vector3::z_axis(), -std::f64::consts::FRAC_PI_3) * b2;
    let centres = [Vector3::zeros(), b2, b3];
    let agents = centres
        .iter()
        .map(|b| GroupElement::se3(Matrix3::identity(), b.map(l)).expect("identity rotation is valid"))
        .collect();
    let g = ProductElement::new(agents).expect("same group");
    let world_v = Vector3::new(l(0.1), l(0.2), l(1.0));
    let omega = Vector3::new(l(0.3), l(0.2), l(0.1));
    let mut xi = DVector::zeros(18);
    for i in 0..3 {
        let nu = g.agent(i).rotation3().transpose() * world_v;
        xi.rows_mut(6 * i, 3).copy_from(&nu);
        xi.rows_mut(6 * i + 3, 3).copy_from(&omega);
    }
    SystemState { time: T::zero(), g, xi }
}

/// Body accelerations of the vehicle formation written out in `(ν, Ω)` form:
///
/// ```text
/// M ν̇ = Mν × Ω + 𝒰 + Σ_k 2λ_k R_iᵀ(b_i − b_j)
/// J Ω̇ = JΩ × Ω + Mν × ν + 𝒲
/// ```
pub fn auv_rhs<T: Scalar>(
    params: &AuvParams<T>,
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
    lambda: &DVector<T>,
    convention: ForceSignConvention,
) -> Result<DVector<T>> {
    if graph.kind() != ConstraintKind::Se3CenterDistance && graph.constraint_count() > 0 {
        return Err(GeoError::invalid("vehicle formations use center-distance constraints"));
    }
    if g.kind() != GroupKind::SE3 || xi.len() != 6 * g.len() || graph.agents() != g.len() {
        return Err(GeoError::invalid("state does not match the vehicle formation"));
    }
    if lambda.len() != graph.constraint_count() {
        return Err(GeoError::invalid("one multiplier per constraint is required"));
    }
    let potential = params.potential(convention);
    let mut force: Vec<Vector3<T>> = g.agents().iter().map(|_| Vector3::zeros()).collect();
    for (e, &l) in graph.edges().iter().zip(lambda.iter()) {
        let d = g.agent(e.i).translation3() - g.agent(e.j).translation3();
        let two_l = l + l;
        force[e.i] += g.agent(e.i).rotation3().transpose() * d * two_l;
        force[e.j] -= g.agent(e.j).rotation3().transpose() * d * two_l;
    }
    let m_inv = params
        .mass_matrix
        .try_inverse()
        .ok_or_else(|| GeoError::Numeric("mass matrix is singular".into()))?;
    let j_inv = params
        .inertia
        .try_inverse()
        .ok_or_else(|| GeoError::Numeric("inertia is singular".into()))?;
    let mut out = DVector::zeros(xi.len());
    for (i, gi) in g.agents().iter().enumerate() {
        let nu = vec3(xi, 6 * i);
        let om = vec3(xi, 6 * i + 3);
        let (u, w) = potential.forces(gi);
        let mn = params.mass_matrix * nu;
        let nu_dot = m_inv * (mn.cross(&om) + u + force[i]);
        let om_dot = j_inv * ((params.inertia * om).cross(&om) + mn.cross(&nu) + w);
        out.rows_mut(6 * i, 3).copy_from(&nu_dot);
        out.rows_mut(6 * i + 3, 3).copy_from(&om_dot);
    }
    Ok(out)
}

/// Body forces along a trajectory: translational `u_i` and rotational `ū_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal<T: Scalar> {
    pub times: Vec<T>,
    /// Stacked per-agent body forces, one vector per sample.
    pub forces: Vec<DVector<T>>,
    pub kind: GroupKind,
}

impl<T: Scalar> ControlSignal<T> {
    pub fn len(&self) -> usize {
        self.forces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forces.is_empty()
    }

    pub fn agents(&self) -> usize {
        self.forces.first().map_or(0, |f| f.len() / self.kind.dim())
    }

    /// `u_i` at sample `k`.
    pub fn translational(&self, k: usize, agent: usize) -> DVector<T> {
        let n = self.kind.dim();
        let r = self.kind.translation_coords();
        self.forces[k].rows(agent * n + r.start, r.len()).into_owned()
    }

    /// `ū_i` at sample `k`.
    pub fn rotational(&self, k: usize, agent: usize) -> DVector<T> {
        let n = self.kind.dim();
        let r = self.kind.rotation_coords();
        self.forces[k].rows(agent * n + r.start, r.len()).into_owned()
    }
}

/// Controls that make the unconstrained, fully actuated system follow `trajectory`,
/// using the stored accelerations.
pub fn extract_control<T: Scalar>(
    model: &LagrangianModel<T>,
    trajectory: &Trajectory<T>,
) -> Result<ControlSignal<T>> {
    let forces = trajectory
        .records
        .iter()
        .map(|r| control_from_acceleration(model, &r.state.g, &r.state.xi, &r.xi_dot))
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlSignal {
        times: trajectory.times(),
        forces,
        kind: model.kind(),
    })
}

/// As [`extract_control`] for bare states, with accelerations from forward
/// differences (backward at the last sample). For consecutive explicit-Euler
/// states the forward difference reproduces the step's acceleration.
pub fn extract_control_from_states<T: Scalar>(
    model: &LagrangianModel<T>,
    states: &[SystemState<T>],
) -> Result<ControlSignal<T>> {
    if states.len() < 2 {
        return Err(GeoError::invalid(
            "at least two states are needed to difference velocities",
        ));
    }
    let diff = |a: &SystemState<T>, b: &SystemState<T>| -> Result<DVector<T>> {
        let dt = b.time - a.time;
        if !(dt > T::zero()) {
            return Err(GeoError::invalid("state times must be strictly increasing"));
        }
        Ok((&b.xi - &a.xi) / dt)
    };
    let last = states.len() - 1;
    let forces = (0..states.len())
        .map(|k| {
            let xi_dot = if k < last {
                diff(&states[k], &states[k + 1])?
            } else {
                diff(&states[k - 1], &states[k])?
            };
            control_from_acceleration(model, &states[k].g, &states[k].xi, &xi_dot)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlSignal {
        times: states.iter().map(|s| s.time).collect(),
        forces,
        kind: model.kind(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::constraint_value;
    use crate::dynamics::{regularity_check, solve_multipliers};

    #[test]
    fn published_state_is_feasible_and_regular() {
        let p = AuvParams::<f64>::published();
        let graph = complete_graph(&p, 3).unwrap();
        let s = published_initial_state::<f64>();
        assert!(constraint_value(&graph, &s.g).unwrap().amax() < 1e-10);
        let b3 = s.g.agent(2).translation3();
        assert!((b3 - Vector3::new(10.7446, -5.34363, 0.0)).amax() < 5e-5);
        let model = auv_model(&p, 3, ForceSignConvention::Variational).unwrap();
        assert!(regularity_check(&model, &graph, &s.g).unwrap().regular);
        let sol = solve_multipliers(&model, &graph, &s.g, &s.xi).unwrap();
        assert!(sol.lambda.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn resting_lagrangian() {
        // m g = ργg, level, at b_z = 0: only the metacentric term remains.
        let mut p = AuvParams::<f64>::published();
        p.mass = p.rho_gamma_g / p.g_grav;
        let model = auv_model(&p, 1, ForceSignConvention::Variational).unwrap();
        let g = ProductElement::identity(GroupKind::SE3, 1);
        let l = model.lagrangian(&g, &DVector::zeros(6)).unwrap();
        assert!((l - 1215.8 * 0.007).abs() < 1e-12);
        assert!((l - 8.51).abs() < 1e-2);
    }

    #[test]
    fn level_vehicle_has_no_righting_moment() {
        let p = AuvParams::<f64>::published();
        let (u, w) = potential_forces(&p, &GroupElement::identity(GroupKind::SE3), ForceSignConvention::Variational).unwrap();
        assert_eq!(w, Vector3::zeros());
        assert!((u[2] - (123.8 * 9.81 - 1215.8)).abs() < 1e-12);
        let (u2, _) = potential_forces(&p, &GroupElement::identity(GroupKind::SE3), ForceSignConvention::AsPrinted).unwrap();
        assert_eq!(u2, -u);
    }

    #[test]
    fn convention_names() {
        for c in [ForceSignConvention::Variational, ForceSignConvention::AsPrinted] {
            assert_eq!(c.name().parse::<ForceSignConvention>().unwrap(), c);
        }
        assert!("other".parse::<ForceSignConvention>().is_err());
    }

    #[test]
    fn differencing_needs_two_states() {
        let p = AuvParams::<f64>::published();
        let model = auv_model(&p, 3, ForceSignConvention::Variational).unwrap();
        assert!(extract_control_from_states(&model, &[published_initial_state()]).is_err());
    }
}
