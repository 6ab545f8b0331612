//! Admissible velocities of kinematic left-invariant multi-agent systems.
//!
//! Constraint rows `T*_e L_{g_i}(∂φ/∂g_i)` are transported blockwise by the
//! co-adjoint action at `g_i⁻¹`. The kernel of the resulting matrix is the set
//! of admissible velocities `𝒪`, expressed in transported (spatial)
//! coordinates: `ξ ∈ 𝒪` moves agent `i` with body velocity `Ad_{g_i⁻¹} ξ_i`.

use nalgebra::{DMatrix, DVector};

use crate::constraints::{constraint_gradients, constraint_value, worst_violation, ConstraintGraph};
use crate::lie::{GroupElement, GroupKind, ProductAlgebraElement, ProductElement};
use crate::linalg::{canonical_basis, nullspace, polar_factor, solve_symmetric};
use crate::{GeoError, Result, Scalar};

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// `Ad*_{g⁻¹}` applied blockwise to the rows of a trivialized constraint matrix.
pub fn coadjoint_transport<T: Scalar>(g: &ProductElement<T>, rows: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = g.kind().dim();
    if rows.ncols() != n * g.len() {
        return Err(GeoError::invalid("constraint rows do not match the configuration"));
    }
    let mut out = DMatrix::zeros(rows.nrows(), rows.ncols());
    for (i, gi) in g.agents().iter().enumerate() {
        // coAd(g⁻¹, μ) = Ad_{g⁻¹}ᵀ μ, applied to every row at once
        let ad_inv = gi.inverse().adjoint_matrix();
        let block = rows.columns(i * n, n) * ad_inv;
        out.columns_mut(i * n, n).copy_from(&block);
    }
    Ok(out)
}

/// Coordinate order used to canonicalise nullspace bases: all translational
/// coordinates (agent by agent) first, then all rotational ones.
pub fn translation_first_order(kind: GroupKind, agents: usize) -> Vec<usize> {
    let n = kind.dim();
    let mut order = Vec::with_capacity(n * agents);
    for i in 0..agents {
        order.extend(kind.translation_coords().map(|c| i * n + c));
    }
    for i in 0..agents {
        order.extend(kind.rotation_coords().map(|c| i * n + c));
    }
    order
}

/// The admissible-velocity linear system at one base point.
#[derive(Debug, Clone)]
pub struct FeasibilitySystem<T: Scalar> {
    pub base_point: ProductElement<T>,
    /// `m̄ × (r·n)` coefficient matrix of transported rows.
    pub coefficient_matrix: DMatrix<T>,
    pub rank: usize,
    pub singular_values: Vec<T>,
    /// Orthonormal columns spanning `𝒪`.
    pub nullspace_basis: DMatrix<T>,
}

impl<T: Scalar> FeasibilitySystem<T> {
    pub fn nullspace_dim(&self) -> usize {
        self.nullspace_basis.ncols()
    }

    pub fn basis_elements(&self) -> Vec<ProductAlgebraElement<T>> {
        let kind = self.base_point.kind();
        let r = self.base_point.len();
        self.nullspace_basis
            .column_iter()
            .map(|c| {
                ProductAlgebraElement::from_stacked(kind, r, &c.into_owned())
                    .expect("basis columns have the product dimension")
            })
            .collect()
    }

    /// `max_k |A·K_k|`.
    pub fn residual(&self) -> T {
        (&self.coefficient_matrix * &self.nullspace_basis)
            .iter()
            .fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

/// Admissible velocities at a feasible base point.
///
/// Fails with [`GeoError::Infeasible`] when `max |φ| > 1e-6` (for `f64`).
pub fn admissible_velocity_space<T: Scalar>(
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
) -> Result<FeasibilitySystem<T>> {
    let eval = constraint_gradients(graph, g)?;
    if let Some((k, v)) = worst_violation(&eval.values) {
        if v > T::feasibility_tol() {
            return Err(GeoError::Infeasible {
                max_violation: v.as_f64(),
                edge: graph.edges()[k].label(),
            });
        }
    }
    let coefficient_matrix = coadjoint_transport(g, &eval.trivialized_rows)?;
    let ns = nullspace(&coefficient_matrix, T::lit(RANK_TOL));
    let order = translation_first_order(g.kind(), g.len());
    let basis = canonical_basis(&ns.basis, &order);
    Ok(FeasibilitySystem {
        base_point: g.clone(),
        coefficient_matrix,
        rank: ns.rank,
        singular_values: ns.singular_values,
        nullspace_basis: basis,
    })
}

/// One step of the group abstraction `ġ = Σ ω_k K_k`.
///
/// The combination `v = Σ ω_k K_k` is in transported coordinates, so agent `i`
/// moves by `g_i·exp(h·Ad_{g_i⁻¹} v_i)`, which equals `exp(h v_i)·g_i`.
pub fn abstraction_step<T: Scalar>(
    basis: &DMatrix<T>,
    omega: &[T],
    g: &ProductElement<T>,
    h: T,
) -> Result<ProductElement<T>> {
    if basis.ncols() != omega.len() {
        return Err(GeoError::invalid(format!(
            "{} inputs for a basis of {} elements",
            omega.len(),
            basis.ncols()
        )));
    }
    if basis.nrows() != g.algebra_dim() {
        return Err(GeoError::invalid("basis does not match the configuration"));
    }
    let v = basis * DVector::from_column_slice(omega);
    let body = g.inverse().adjoint_matrix() * v * h;
    g.right_exp(&body)
}

/// How the abstraction integrator treats the basis between steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisMode {
    /// Basis computed once at the initial configuration.
    Frozen,
    /// Basis recomputed every step and aligned with the previous one.
    Refresh,
    /// As `Refresh`, plus a Gauss-Newton projection back onto `Φ = 0`.
    RefreshProject,
}

/// Per-step record of an abstraction run.
#[derive(Debug, Clone)]
pub struct AbstractionRun<T: Scalar> {
    pub configurations: Vec<ProductElement<T>>,
    /// `max |φ|` after each step, starting with the initial configuration.
    pub drift: Vec<T>,
}

impl<T: Scalar> AbstractionRun<T> {
    pub fn max_drift(&self) -> T {
        self.drift.iter().fold(T::zero(), |m, &d| m.max(d))
    }
}

/// Rotates a fresh orthonormal basis of the same subspace into the one closest
/// to `previous`; the result depends on the subspace only, so it varies
/// smoothly along a trajectory.
fn align_basis<T: Scalar>(fresh: &DMatrix<T>, previous: &DMatrix<T>) -> DMatrix<T> {
    if fresh.ncols() != previous.ncols() || fresh.ncols() == 0 {
        return fresh.clone();
    }
    let overlap = fresh.transpose() * previous;
    fresh * polar_factor(&overlap)
}

/// Integrates the abstracted system for `steps` steps with inputs `omega(t)`.
pub fn run_abstraction<T: Scalar, F>(
    graph: &ConstraintGraph<T>,
    initial: &ProductElement<T>,
    mut omega: F,
    h: T,
    steps: usize,
    mode: BasisMode,
) -> Result<AbstractionRun<T>>
where
    F: FnMut(T, usize) -> Vec<T>,
{
    let system = admissible_velocity_space(graph, initial)?;
    let mut basis = system.nullspace_basis;
    let mut g = initial.clone();
    let mut configurations = vec![g.clone()];
    let mut drift = vec![max_abs(&constraint_value(graph, &g)?)];
    for step in 0..steps {
        let t = h * T::lit(step as f64);
        let w = omega(t, basis.ncols());
        g = abstraction_step(&basis, &w, &g, h)?;
        if mode == BasisMode::RefreshProject {
            g = project_onto_constraints(graph, &g, T::lit(1e-13), 20)?;
        }
        if mode != BasisMode::Frozen {
            let eval = constraint_gradients(graph, &g)?;
            let a = coadjoint_transport(&g, &eval.trivialized_rows)?;
            let ns = nullspace(&a, T::lit(RANK_TOL));
            basis = align_basis(&ns.basis, &basis);
        }
        drift.push(max_abs(&constraint_value(graph, &g)?));
        configurations.push(g.clone());
    }
    Ok(AbstractionRun { configurations, drift })
}

fn max_abs<T: Scalar>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Gauss-Newton projection onto `Φ = 0` with minimum-norm body corrections.
pub fn project_onto_constraints<T: Scalar>(
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    tol: T,
    max_iter: usize,
) -> Result<ProductElement<T>> {
    let mut g = g.clone();
    for _ in 0..max_iter {
        let eval = constraint_gradients(graph, &g)?;
        if eval.max_violation() <= tol || graph.constraint_count() == 0 {
            break;
        }
        let a = &eval.trivialized_rows;
        let gram = a * a.transpose();
        let y = solve_symmetric(&gram, &eval.values)?;
        let delta = -(a.transpose() * y);
        g = g.right_exp(&delta)?;
    }
    Ok(g)
}

/// The planar three-agent example assembled by hand instead of through the
/// generic duality pipeline.
///
/// Rows are read off `g_iᵀ·∂φ/∂g_i` (entries 13, 23 for the translational
/// duals, antisymmetric 21/12 part for the rotational one), then transported
/// with the closed-form planar co-adjoint action
/// `Ad*_{(R,p)⁻¹}(β, μ) = (Rβ, μ − (Rβ)·Jp)`, `J = [[0, 1], [−1, 0]]`.
pub mod planar {
    use super::*;
    use crate::constraints::{ConstraintKind, EdgeConstraint};
    use nalgebra::Vector2;

    /// Equilateral triangle of side `d` with the given headings, centred at the origin.
    pub fn triangle(d: f64, headings: [f64; 3]) -> (ConstraintGraph<f64>, ProductElement<f64>) {
        let rad = d / 3f64.sqrt();
        let agents = (0..3)
            .map(|k| {
                let a = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::PI / 3.0;
                GroupElement::se2(rad * a.cos(), rad * a.sin(), headings[k])
            })
            .collect();
        let graph = ConstraintGraph::new(
            3,
            ConstraintKind::Se2Frobenius,
            vec![],
            vec![
                EdgeConstraint::new(0, 1, 1, d),
                EdgeConstraint::new(0, 2, 2, d),
                EdgeConstraint::new(1, 2, 3, d),
            ],
        )
        .expect("triangle graph is valid");
        (graph, ProductElement::new(agents).expect("same group"))
    }

    /// Closed-form `Ad*_{g⁻¹}` on se(2)* in `(β₁, β₂, μ)` coordinates.
    pub fn coadjoint_inverse<T: Scalar>(g: &GroupElement<T>, beta: Vector2<T>, mu: T) -> (Vector2<T>, T) {
        let r = g.rotation2();
        let p = g.translation();
        let jp = Vector2::new(p[1], -p[0]);
        let rb = r * beta;
        (rb, mu - rb.dot(&jp))
    }

    fn read_row<T: Scalar>(g: &GroupElement<T>, ambient: &DMatrix<T>) -> (Vector2<T>, T) {
        let m = g.matrix().transpose() * ambient;
        (Vector2::new(m[(0, 2)], m[(1, 2)]), m[(1, 0)] - m[(0, 1)])
    }

    /// Transported coefficient matrix built from the explicit formulas.
    pub fn explicit_coefficients<T: Scalar>(
        graph: &ConstraintGraph<T>,
        g: &ProductElement<T>,
    ) -> Result<DMatrix<T>> {
        if graph.kind() != ConstraintKind::Se2Frobenius {
            return Err(GeoError::invalid("explicit assembly is for the planar constraint"));
        }
        let eval = constraint_gradients(graph, g)?;
        let mut out = DMatrix::zeros(graph.constraint_count(), 3 * g.len());
        for (row, (e, grad)) in graph.edges().iter().zip(&eval.ambient_gradients).enumerate() {
            for (agent, ambient) in [(e.i, &grad.wrt_i), (e.j, &grad.wrt_j)] {
                let gi = g.agent(agent);
                let (beta, mu) = read_row(gi, ambient);
                let (tb, tm) = coadjoint_inverse(gi, beta, mu);
                out[(row, 3 * agent)] = tb[0];
                out[(row, 3 * agent + 1)] = tb[1];
                out[(row, 3 * agent + 2)] = tm;
            }
        }
        Ok(out)
    }
}
