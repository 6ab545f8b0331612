//! Constrained Euler-Lagrange dynamics for left-invariant multi-agent systems.
//!
//! Each agent carries `ℓ_i(g, ξ) = ½ ξᵀ𝕀_i ξ − U_i(g)`. With stacked trivialized
//! constraint rows `A(g)` the body accelerations satisfy
//!
//! ```text
//! 𝕀_i ξ̇_i = ad*_{ξ_i}(𝕀_i ξ_i) − T*_e L_{g_i}(∂U_i/∂g_i) + (Aᵀλ)_i
//! ```
//!
//! and the multipliers follow from `d²Φ/dt² = A ξ̇ + q(g, ξ) = 0`:
//! `A 𝕀⁻¹ Aᵀ λ = −A 𝕀⁻¹ f − q`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constraints::{
    constraint_acceleration_bias, constraint_gradients, constraint_value, ConstraintGraph,
};
use crate::lie::{trivialize_covector, AlgebraElement, GroupElement, GroupKind, ProductElement};
use crate::linalg::{condition_number, full_svd, max_asymmetry};
use crate::{GeoError, Result, Scalar};

/// `A_λ` condition number beyond which the constraint system counts as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative singular-value threshold of the regularity verdict.
pub const REGULARITY_TOL: f64 = 1e-8;

/// Potential energy of a single agent.
pub trait Potential<T: Scalar>: fmt::Debug + Send + Sync {
    fn energy(&self, g: &GroupElement<T>) -> T;

    /// `∂U/∂g` as a matrix of the same shape as `g`.
    fn ambient_gradient(&self, g: &GroupElement<T>) -> DMatrix<T>;

    /// `T*_e L_g(∂U/∂g)` in dual-basis coordinates.
    fn trivialized_gradient(&self, g: &GroupElement<T>) -> DVector<T> {
        trivialize_covector(g, &self.ambient_gradient(g))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoPotential;

impl<T: Scalar> Potential<T> for NoPotential {
    fn energy(&self, _g: &GroupElement<T>) -> T {
        T::zero()
    }

    fn ambient_gradient(&self, g: &GroupElement<T>) -> DMatrix<T> {
        let n = g.kind().matrix_size();
        DMatrix::zeros(n, n)
    }

    fn trivialized_gradient(&self, g: &GroupElement<T>) -> DVector<T> {
        DVector::zeros(g.kind().dim())
    }
}

/// Kinetic metric and potential of one agent.
#[derive(Debug, Clone)]
pub struct AgentModel<T: Scalar> {
    metric: DMatrix<T>,
    metric_inv: DMatrix<T>,
    potential: Arc<dyn Potential<T>>,
}

impl<T: Scalar> AgentModel<T> {
    /// Validates that `metric` is symmetric (to `1e-12` relative) and positive definite.
    pub fn new(metric: DMatrix<T>, potential: Arc<dyn Potential<T>>) -> Result<Self> {
        if !metric.is_square() {
            return Err(GeoError::invalid("kinetic metric must be square"));
        }
        let scale = metric.amax().max(T::one());
        if max_asymmetry(&metric) > T::lit(1e-12) * scale {
            return Err(GeoError::invalid("kinetic metric is not symmetric"));
        }
        let chol = metric
            .clone()
            .cholesky()
            .ok_or_else(|| GeoError::invalid("kinetic metric is not positive definite"))?;
        let metric_inv = chol.inverse();
        Ok(Self { metric, metric_inv, potential })
    }

    pub fn free(metric: DMatrix<T>) -> Result<Self> {
        Self::new(metric, Arc::new(NoPotential))
    }

    pub fn metric(&self) -> &DMatrix<T> {
        &self.metric
    }

    pub fn metric_inverse(&self) -> &DMatrix<T> {
        &self.metric_inv
    }

    pub fn potential(&self) -> &dyn Potential<T> {
        self.potential.as_ref()
    }

    pub fn kinetic_energy(&self, xi: &DVector<T>) -> T {
        (xi.transpose() * &self.metric * xi)[(0, 0)] * T::lit(0.5)
    }

    /// `ad*_ξ(𝕀ξ) − T*_e L_g(∂U/∂g)`.
    pub fn free_force(&self, g: &GroupElement<T>, xi: &DVector<T>) -> DVector<T> {
        let ad = AlgebraElement::from_coords_unchecked(g.kind(), xi.clone()).ad_matrix();
        ad.transpose() * (&self.metric * xi) - self.potential.trivialized_gradient(g)
    }
}

/// Per-agent Lagrangians of a formation on a common group.
#[derive(Debug, Clone)]
pub struct LagrangianModel<T: Scalar> {
    kind: GroupKind,
    agents: Vec<AgentModel<T>>,
}

impl<T: Scalar> LagrangianModel<T> {
    pub fn new(kind: GroupKind, agents: Vec<AgentModel<T>>) -> Result<Self> {
        if agents.is_empty() {
            return Err(GeoError::invalid("model needs at least one agent"));
        }
        for (i, a) in agents.iter().enumerate() {
            if a.metric.nrows() != kind.dim() {
                return Err(GeoError::invalid(format!(
                    "agent {}: metric is {}x{}, {kind} needs {}x{}",
                    i + 1,
                    a.metric.nrows(),
                    a.metric.ncols(),
                    kind.dim(),
                    kind.dim()
                )));
            }
        }
        Ok(Self { kind, agents })
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn agents(&self) -> &[AgentModel<T>] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kind.dim() * self.agents.len()
    }

    fn check(&self, g: &ProductElement<T>, xi: &DVector<T>) -> Result<()> {
        if g.len() != self.agents.len() || g.kind() != self.kind {
            return Err(GeoError::invalid("configuration does not match the model"));
        }
        if xi.len() != self.dim() {
            return Err(GeoError::invalid(format!(
                "velocity has length {}, model expects {}",
                xi.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn blocks<'a>(&'a self, v: &'a DVector<T>) -> impl Iterator<Item = (usize, DVector<T>)> + 'a {
        let n = self.kind.dim();
        (0..self.agents.len()).map(move |i| (i, v.rows(i * n, n).into_owned()))
    }

    /// Block-diagonal `𝕀`.
    pub fn metric(&self) -> DMatrix<T> {
        self.block_diag(|a| &a.metric)
    }

    /// Block-diagonal `𝕀⁻¹`.
    pub fn metric_inverse(&self) -> DMatrix<T> {
        self.block_diag(|a| &a.metric_inv)
    }

    fn block_diag(&self, f: impl Fn(&AgentModel<T>) -> &DMatrix<T>) -> DMatrix<T> {
        let n = self.kind.dim();
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (i, a) in self.agents.iter().enumerate() {
            m.view_mut((i * n, i * n), (n, n)).copy_from(f(a));
        }
        m
    }

    pub fn apply_metric(&self, xi: &DVector<T>) -> DVector<T> {
        self.map_blocks(xi, |a, v| &a.metric * v)
    }

    pub fn apply_metric_inverse(&self, mu: &DVector<T>) -> DVector<T> {
        self.map_blocks(mu, |a, v| &a.metric_inv * v)
    }

    fn map_blocks(&self, v: &DVector<T>, f: impl Fn(&AgentModel<T>, &DVector<T>) -> DVector<T>) -> DVector<T> {
        let n = self.kind.dim();
        let mut out = DVector::zeros(v.len());
        for (i, b) in self.blocks(v) {
            out.rows_mut(i * n, n).copy_from(&f(&self.agents[i], &b));
        }
        out
    }

    pub fn kinetic_energy(&self, xi: &DVector<T>) -> T {
        self.blocks(xi)
            .map(|(i, b)| self.agents[i].kinetic_energy(&b))
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn potential_energy(&self, g: &ProductElement<T>) -> T {
        self.agents
            .iter()
            .zip(g.agents())
            .map(|(a, gi)| a.potential.energy(gi))
            .fold(T::zero(), |a, b| a + b)
    }

    /// `Σ ℓ_i`.
    pub fn lagrangian(&self, g: &ProductElement<T>, xi: &DVector<T>) -> Result<T> {
        self.check(g, xi)?;
        Ok(self.kinetic_energy(xi) - self.potential_energy(g))
    }

    /// Total energy `Σ (½ξᵀ𝕀ξ + U)`.
    pub fn energy(&self, g: &ProductElement<T>, xi: &DVector<T>) -> Result<T> {
        self.check(g, xi)?;
        Ok(self.kinetic_energy(xi) + self.potential_energy(g))
    }

    /// Stacked `ad*_ξ(𝕀ξ) − T*_e L_g(∂U/∂g)`.
    pub fn free_forces(&self, g: &ProductElement<T>, xi: &DVector<T>) -> Result<DVector<T>> {
        self.check(g, xi)?;
        let n = self.kind.dim();
        let mut f = DVector::zeros(self.dim());
        for (i, b) in self.blocks(xi) {
            f.rows_mut(i * n, n).copy_from(&self.agents[i].free_force(g.agent(i), &b));
        }
        Ok(f)
    }

    /// Spatial momenta `Ad*_{g_i⁻¹}(𝕀_i ξ_i)`, stacked.
    pub fn spatial_momentum(&self, g: &ProductElement<T>, xi: &DVector<T>) -> Result<DVector<T>> {
        self.check(g, xi)?;
        let mu = self.apply_metric(xi);
        Ok(g.inverse().adjoint_matrix().transpose() * mu)
    }
}

/// `Σ ℓ_i − λ·Φ(g)`.
pub fn augmented_lagrangian<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
    lambda: &DVector<T>,
) -> Result<T> {
    let phi = constraint_value(graph, g)?;
    if lambda.len() != phi.len() {
        return Err(GeoError::invalid("one multiplier per constraint is required"));
    }
    Ok(model.lagrangian(g, xi)? - lambda.dot(&phi))
}

/// `ξ̇` for given multipliers.
pub fn constrained_el_rhs<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
    lambda: &DVector<T>,
) -> Result<DVector<T>> {
    let f = model.free_forces(g, xi)?;
    let a = constraint_gradients(graph, g)?.trivialized_rows;
    if lambda.len() != a.nrows() {
        return Err(GeoError::invalid("one multiplier per constraint is required"));
    }
    Ok(model.apply_metric_inverse(&(f + a.transpose() * lambda)))
}

/// `ξ̇` of the unconstrained, fully actuated system with body forces `u`.
pub fn controlled_rhs<T: Scalar>(
    model: &LagrangianModel<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
    u: &DVector<T>,
) -> Result<DVector<T>> {
    let f = model.free_forces(g, xi)?;
    if u.len() != f.len() {
        return Err(GeoError::invalid("control has the wrong length"));
    }
    Ok(model.apply_metric_inverse(&(f + u)))
}

/// Body forces that produce `ξ̇` in the unconstrained controlled system.
pub fn control_from_acceleration<T: Scalar>(
    model: &LagrangianModel<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
    xi_dot: &DVector<T>,
) -> Result<DVector<T>> {
    let f = model.free_forces(g, xi)?;
    if xi_dot.len() != f.len() {
        return Err(GeoError::invalid("acceleration has the wrong length"));
    }
    Ok(model.apply_metric(xi_dot) - f)
}

/// Multipliers from the twice-differentiated constraints.
#[derive(Debug, Clone)]
pub struct MultiplierSolve<T: Scalar> {
    /// `A 𝕀⁻¹ Aᵀ`.
    pub a_lambda: DMatrix<T>,
    /// `−A 𝕀⁻¹ f − q`.
    pub c: DVector<T>,
    pub lambda: DVector<T>,
    pub condition_number: T,
    /// `ξ̇` under the solved multipliers.
    pub xi_dot: DVector<T>,
}

/// Solves for `λ` without checking that the state lies on the constraint manifold.
///
/// Integrators call this every step, where small drift is expected.
pub fn resolve_multipliers<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
) -> Result<MultiplierSolve<T>> {
    let f = model.free_forces(g, xi)?;
    let free_acc = model.apply_metric_inverse(&f);
    let m = graph.constraint_count();
    if m == 0 {
        return Ok(MultiplierSolve {
            a_lambda: DMatrix::zeros(0, 0),
            c: DVector::zeros(0),
            lambda: DVector::zeros(0),
            condition_number: T::one(),
            xi_dot: free_acc,
        });
    }
    let a = constraint_gradients(graph, g)?.trivialized_rows;
    let minv_at = model.metric_inverse() * a.transpose();
    let a_lambda = &a * &minv_at;
    let q = constraint_acceleration_bias(graph, g, xi)?;
    let c = -(&a * &free_acc) - q;
    let cond = condition_number(&a_lambda);
    if !(cond <= T::lit(MAX_CONDITION)) {
        return Err(GeoError::SingularConstraint {
            condition: cond.as_f64(),
            reason: "constraint rows are dependent or vanish (coincident agents?)".into(),
        });
    }
    let lambda = a_lambda
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&c))
        .or_else(|| a_lambda.clone().lu().solve(&c))
        .ok_or_else(|| GeoError::SingularConstraint {
            condition: cond.as_f64(),
            reason: "multiplier system could not be factorised".into(),
        })?;
    let xi_dot = free_acc + minv_at * &lambda;
    Ok(MultiplierSolve {
        a_lambda,
        c,
        lambda,
        condition_number: cond,
        xi_dot,
    })
}

/// Multipliers at a state on the constraint manifold (`Φ = 0`, `dΦ/dt = 0`
/// within the scalar's feasibility tolerance).
pub fn solve_multipliers<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
) -> Result<MultiplierSolve<T>> {
    check_on_manifold(graph, g, xi, T::feasibility_tol())?;
    resolve_multipliers(model, graph, g, xi)
}

/// Fails unless `|Φ| ≤ tol` and `|dΦ/dt| ≤ tol` componentwise.
pub fn check_on_manifold<T: Scalar>(
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
    tol: T,
) -> Result<()> {
    let eval = constraint_gradients(graph, g)?;
    if let Some((k, v)) = crate::constraints::worst_violation(&eval.values) {
        if v > tol {
            return Err(GeoError::Infeasible {
                max_violation: v.as_f64(),
                edge: graph.edges()[k].label(),
            });
        }
    }
    if xi.len() != eval.trivialized_rows.ncols() {
        return Err(GeoError::invalid("velocity has the wrong length"));
    }
    let rate = &eval.trivialized_rows * xi;
    if let Some((k, v)) = crate::constraints::worst_violation(&rate) {
        if v > tol {
            let (i, j, kk) = graph.edges()[k].label();
            return Err(GeoError::InfeasibleInitialState(format!(
                "constraint ({i},{j},{kk}) has rate {:e}, velocities must be tangent to the constraint set",
                v.as_f64()
            )));
        }
    }
    Ok(())
}

/// Invertibility certificate for `[[𝕀, Aᵀ], [A, 0]]`.
#[derive(Debug, Clone)]
pub struct RegularityReport<T: Scalar> {
    pub matrix: DMatrix<T>,
    pub sigma_min: T,
    pub sigma_max: T,
    pub regular: bool,
}

impl<T: Scalar> RegularityReport<T> {
    pub fn verdict(&self) -> &'static str {
        if self.regular {
            "regular"
        } else {
            "singular"
        }
    }
}

pub fn regularity_check<T: Scalar>(
    model: &LagrangianModel<T>,
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
) -> Result<RegularityReport<T>> {
    let a = constraint_gradients(graph, g)?.trivialized_rows;
    let (n, m) = (model.dim(), a.nrows());
    if a.ncols() != n {
        return Err(GeoError::invalid("graph does not match the model"));
    }
    let mut matrix = DMatrix::zeros(n + m, n + m);
    matrix.view_mut((0, 0), (n, n)).copy_from(&model.metric());
    matrix.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    matrix.view_mut((n, 0), (m, n)).copy_from(&a);
    let (sv, _) = full_svd(&matrix);
    let sigma_max = sv.first().copied().unwrap_or_else(T::zero);
    let sigma_min = sv.last().copied().unwrap_or_else(T::zero);
    let regular = sigma_min > T::lit(REGULARITY_TOL) * sigma_max;
    Ok(RegularityReport {
        matrix,
        sigma_min,
        sigma_max,
        regular,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ConstraintKind, EdgeConstraint};
    use nalgebra::{Matrix3, Vector3};

    fn rigid_body() -> LagrangianModel<f64> {
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![5.46, 5.29, 5.72]));
        LagrangianModel::new(GroupKind::SO3, vec![AgentModel::free(j).unwrap()]).unwrap()
    }

    #[test]
    fn euler_equations_for_a_free_body() {
        let model = rigid_body();
        let g = ProductElement::identity(GroupKind::SO3, 1);
        let w = Vector3::new(0.3, 0.2, 0.1);
        let xi = DVector::from_column_slice(w.as_slice());
        let f = model.free_forces(&g, &xi).unwrap();
        let j = Matrix3::from_diagonal(&Vector3::new(5.46, 5.29, 5.72));
        let expected = (j * w).cross(&w);
        assert!((f - DVector::from_column_slice(expected.as_slice())).amax() < 1e-15);
    }

    #[test]
    fn metric_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(AgentModel::<f64>::free(bad).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(AgentModel::<f64>::free(indefinite).is_err());
        let wrong_dim = AgentModel::<f64>::free(DMatrix::identity(2, 2)).unwrap();
        assert!(LagrangianModel::new(GroupKind::SE2, vec![wrong_dim]).is_err());
    }

    fn pair(b2: [f64; 3]) -> (LagrangianModel<f64>, ConstraintGraph<f64>, ProductElement<f64>) {
        let agent = AgentModel::free(DMatrix::identity(6, 6)).unwrap();
        let model = LagrangianModel::new(GroupKind::SE3, vec![agent.clone(), agent]).unwrap();
        let graph = ConstraintGraph::new(
            2,
            ConstraintKind::Se3CenterDistance,
            vec![1.0, 1.0],
            vec![EdgeConstraint::new(0, 1, 1, 10.0)],
        )
        .unwrap();
        let g = ProductElement::new(vec![
            GroupElement::identity(GroupKind::SE3),
            GroupElement::se3(Matrix3::identity(), Vector3::from(b2)).unwrap(),
        ])
        .unwrap();
        (model, graph, g)
    }

    #[test]
    fn static_pair_has_zero_multiplier() {
        let (model, graph, g) = pair([12.0, 0.0, 0.0]);
        let s = solve_multipliers(&model, &graph, &g, &DVector::zeros(12)).unwrap();
        assert_eq!(s.lambda.len(), 1);
        assert!(s.lambda[0].abs() < 1e-15);
        assert!(regularity_check(&model, &graph, &g).unwrap().regular);
    }

    #[test]
    fn coincident_agents_are_singular() {
        let (model, graph, g) = pair([0.0, 0.0, 0.0]);
        assert!(matches!(
            resolve_multipliers(&model, &graph, &g, &DVector::zeros(12)),
            Err(GeoError::SingularConstraint { .. })
        ));
        assert!(!regularity_check(&model, &graph, &g).unwrap().regular);
    }

    #[test]
    fn rotating_pair_needs_centripetal_multiplier() {
        // Agent 2 orbits with body velocity along +y at 12 m: needs a pull towards agent 1.
        let (model, graph, g) = pair([12.0, 0.0, 0.0]);
        let mut xi = DVector::zeros(12);
        xi[7] = 1.0;
        let s = solve_multipliers(&model, &graph, &g, &xi).unwrap();
        let acc = s.xi_dot.rows(6, 3).into_owned();
        // relative acceleration along the separation cancels |v|²/|Δb| growth
        assert!(acc[0] < 0.0);
        let q = constraint_acceleration_bias(&graph, &g, &xi).unwrap();
        let a = constraint_gradients(&graph, &g).unwrap().trivialized_rows;
        assert!((&a * &s.xi_dot + q).amax() < 1e-12);
    }

    #[test]
    fn augmented_lagrangian_ignores_multipliers_on_the_constraint_set() {
        let (model, graph, g) = pair([12.0, 0.0, 0.0]);
        let xi = DVector::from_fn(12, |i, _| 0.1 * i as f64);
        let a = augmented_lagrangian(&model, &graph, &g, &xi, &DVector::from_vec(vec![0.0])).unwrap();
        let b = augmented_lagrangian(&model, &graph, &g, &xi, &DVector::from_vec(vec![7.0])).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(a, model.lagrangian(&g, &xi).unwrap());
    }

    #[test]
    fn off_manifold_state_is_rejected() {
        let (model, graph, g) = pair([13.0, 0.0, 0.0]);
        assert!(matches!(
            solve_multipliers(&model, &graph, &g, &DVector::zeros(12)),
            Err(GeoError::Infeasible { edge: (1, 2, 1), .. })
        ));
    }
}
