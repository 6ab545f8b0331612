//! Holonomic inter-agent distance constraints.
//!
//! Two families are supported:
//!
//! * [`ConstraintKind::Se2Frobenius`]: `φ_ij = ‖ψ(g_j) g_i‖²_F − (d² + 3)` on SE(2),
//!   where `ψ` strips the rotation and negates the translation of `g_j`.
//! * [`ConstraintKind::Se3CenterDistance`]: `φ_ij = ‖b_i − b_j‖² − (r_i + r_j + d)²` on SE(3).
//!
//! Both reduce to `‖p_i − p_j‖² − c²` in the positions, which is what the
//! velocity-dependent second-derivative term exploits. Gradients keep the
//! analytic factor 2; multipliers are therefore half the size they would be
//! with a `½λ·Φ` penalty.

use nalgebra::{DMatrix, DVector};

use crate::lie::{trivialize_covector, GroupElement, GroupKind, ProductElement};
use crate::{GeoError, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Se2Frobenius,
    Se3CenterDistance,
}

impl ConstraintKind {
    pub fn group(self) -> GroupKind {
        match self {
            ConstraintKind::Se2Frobenius => GroupKind::SE2,
            ConstraintKind::Se3CenterDistance => GroupKind::SE3,
        }
    }
}

/// One constraint `φ_ij^k` on the (undirected) edge `i < j`. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeConstraint<T: Scalar> {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    /// Prescribed distance `d_ij^k` in meters.
    pub distance: T,
}

impl<T: Scalar> EdgeConstraint<T> {
    pub fn new(i: usize, j: usize, k: usize, distance: T) -> Self {
        Self { i, j, k, distance }
    }

    /// `(i, j, k)` with 1-based agent indices, as used in configs and reports.
    pub fn label(&self) -> (usize, usize, usize) {
        (self.i + 1, self.j + 1, self.k)
    }
}

/// The constraint set `𝒞` indexed by graph edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGraph<T: Scalar> {
    agents: usize,
    kind: ConstraintKind,
    radii: Vec<T>,
    edges: Vec<EdgeConstraint<T>>,
}

impl<T: Scalar> ConstraintGraph<T> {
    /// Edges are normalised to `i < j` and sorted by `(i, j, k)`; that order
    /// fixes the meaning of each multiplier component.
    pub fn new(
        agents: usize,
        kind: ConstraintKind,
        radii: Vec<T>,
        edges: Vec<EdgeConstraint<T>>,
    ) -> Result<Self> {
        if agents == 0 {
            return Err(GeoError::invalid("constraint graph needs at least one agent"));
        }
        let radii = match kind {
            ConstraintKind::Se2Frobenius if radii.is_empty() => vec![T::zero(); agents],
            _ => radii,
        };
        if radii.len() != agents {
            return Err(GeoError::invalid(format!(
                "expected {agents} radii, got {}",
                radii.len()
            )));
        }
        if radii.iter().any(|r| !(*r >= T::zero())) {
            return Err(GeoError::invalid("radii must be non-negative"));
        }
        let mut normalised = Vec::with_capacity(edges.len());
        for e in edges {
            if e.i == e.j {
                return Err(GeoError::invalid(format!("edge ({}, {}) is a self-loop", e.i + 1, e.j + 1)));
            }
            if e.i >= agents || e.j >= agents {
                return Err(GeoError::invalid(format!(
                    "edge ({}, {}) references an agent beyond {agents}",
                    e.i + 1,
                    e.j + 1
                )));
            }
            if !(e.distance > T::zero()) {
                return Err(GeoError::invalid(format!(
                    "edge ({}, {}, {}) needs a positive distance",
                    e.i + 1,
                    e.j + 1,
                    e.k
                )));
            }
            let (i, j) = if e.i < e.j { (e.i, e.j) } else { (e.j, e.i) };
            normalised.push(EdgeConstraint { i, j, ..e });
        }
        normalised.sort_by_key(|e| (e.i, e.j, e.k));
        for w in normalised.windows(2) {
            if (w[0].i, w[0].j, w[0].k) == (w[1].i, w[1].j, w[1].k) {
                return Err(GeoError::invalid(format!("duplicate constraint {:?}", w[0].label())));
            }
        }
        Ok(Self {
            agents,
            kind,
            radii,
            edges: normalised,
        })
    }

    /// Graph with no constraints (free agents).
    pub fn unconstrained(agents: usize, kind: ConstraintKind) -> Self {
        Self {
            agents,
            kind,
            radii: vec![T::zero(); agents],
            edges: Vec::new(),
        }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn group(&self) -> GroupKind {
        self.kind.group()
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn edges(&self) -> &[EdgeConstraint<T>] {
        &self.edges
    }

    /// `m̄`, the total number of scalar constraints.
    pub fn constraint_count(&self) -> usize {
        self.edges.len()
    }

    /// Same agents and kind, no edges.
    pub fn without_edges(&self) -> Self {
        Self {
            edges: Vec::new(),
            ..self.clone()
        }
    }

    /// Squared separation `c²` the edge enforces between positions.
    pub fn squared_separation(&self, e: &EdgeConstraint<T>) -> T {
        match self.kind {
            ConstraintKind::Se2Frobenius => e.distance * e.distance,
            ConstraintKind::Se3CenterDistance => {
                let s = self.radii[e.i] + self.radii[e.j] + e.distance;
                s * s
            }
        }
    }

    fn check(&self, g: &ProductElement<T>) -> Result<()> {
        if g.len() != self.agents {
            return Err(GeoError::invalid(format!(
                "configuration has {} agents, graph expects {}",
                g.len(),
                self.agents
            )));
        }
        // An edge-free graph constrains nothing and accepts any group.
        if self.edges.is_empty() {
            return Ok(());
        }
        self.group().check_same(g.kind())
    }
}

/// `ψ(g)`: identity rotation, negated translation.
pub fn psi<T: Scalar>(g: &GroupElement<T>) -> Result<GroupElement<T>> {
    if g.kind() != GroupKind::SE2 {
        return Err(GeoError::invalid(format!("psi is defined on SE2, got {}", g.kind())));
    }
    let m = g.matrix();
    Ok(GroupElement::se2(-m[(0, 2)], -m[(1, 2)], T::zero()))
}

/// Value of a single constraint on the pair `(g_i, g_j)`.
pub fn edge_value<T: Scalar>(
    graph: &ConstraintGraph<T>,
    edge: &EdgeConstraint<T>,
    gi: &GroupElement<T>,
    gj: &GroupElement<T>,
) -> Result<T> {
    match graph.kind {
        ConstraintKind::Se2Frobenius => {
            let rel = psi(gj)?.compose(gi)?;
            let fro = rel.matrix().norm_squared();
            Ok(fro - (edge.distance * edge.distance + T::lit(3.0)))
        }
        ConstraintKind::Se3CenterDistance => {
            let d = gi.translation3() - gj.translation3();
            Ok(d.norm_squared() - graph.squared_separation(edge))
        }
    }
}

/// `Φ(g)`, one entry per edge constraint in graph order.
pub fn constraint_value<T: Scalar>(
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
) -> Result<DVector<T>> {
    graph.check(g)?;
    let values = graph
        .edges
        .iter()
        .map(|e| edge_value(graph, e, g.agent(e.i), g.agent(e.j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

/// Ambient (matrix) gradients of one constraint with respect to its two agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientGradient<T: Scalar> {
    pub wrt_i: DMatrix<T>,
    pub wrt_j: DMatrix<T>,
}

/// Constraint values and first-order data at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEvaluation<T: Scalar> {
    pub values: DVector<T>,
    pub ambient_gradients: Vec<AmbientGradient<T>>,
    /// `m̄ × (r·n)`: row `k` holds `T*_e L_{g_i}(∂φ_k/∂g_i)` in agent `i`'s block.
    pub trivialized_rows: DMatrix<T>,
}

impl<T: Scalar> ConstraintEvaluation<T> {
    pub fn max_violation(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

fn ambient_gradient<T: Scalar>(
    graph: &ConstraintGraph<T>,
    gi: &GroupElement<T>,
    gj: &GroupElement<T>,
) -> Result<AmbientGradient<T>> {
    let two = T::lit(2.0);
    match graph.kind {
        ConstraintKind::Se2Frobenius => {
            let psi_j = psi(gj)?.into_matrix();
            let gi_m = gi.matrix();
            let wrt_i = psi_j.transpose() * &psi_j * gi_m * two;
            // ψ depends on g_j only through its translation entries, which it negates.
            let d_psi = &psi_j * gi_m * gi_m.transpose() * two;
            let mut wrt_j = DMatrix::zeros(3, 3);
            wrt_j[(0, 2)] = -d_psi[(0, 2)];
            wrt_j[(1, 2)] = -d_psi[(1, 2)];
            Ok(AmbientGradient { wrt_i, wrt_j })
        }
        ConstraintKind::Se3CenterDistance => {
            let d = (gi.translation3() - gj.translation3()) * two;
            let mut wrt_i = DMatrix::zeros(4, 4);
            wrt_i.view_mut((0, 3), (3, 1)).copy_from(&d);
            let wrt_j = -&wrt_i;
            Ok(AmbientGradient { wrt_i, wrt_j })
        }
    }
}

/// Values, ambient gradients and left-trivialized rows of `Φ` at `g`.
pub fn constraint_gradients<T: Scalar>(
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
) -> Result<ConstraintEvaluation<T>> {
    graph.check(g)?;
    let n = g.kind().dim();
    let m = graph.constraint_count();
    let mut rows = DMatrix::zeros(m, n * graph.agents);
    let mut values = DVector::zeros(m);
    let mut ambient = Vec::with_capacity(m);
    for (row, e) in graph.edges.iter().enumerate() {
        let (gi, gj) = (g.agent(e.i), g.agent(e.j));
        values[row] = edge_value(graph, e, gi, gj)?;
        let grad = ambient_gradient(graph, gi, gj)?;
        let ri = trivialize_covector(gi, &grad.wrt_i);
        let rj = trivialize_covector(gj, &grad.wrt_j);
        rows.view_mut((row, e.i * n), (1, n)).copy_from(&ri.transpose());
        rows.view_mut((row, e.j * n), (1, n)).copy_from(&rj.transpose());
        ambient.push(grad);
    }
    Ok(ConstraintEvaluation {
        values,
        ambient_gradients: ambient,
        trivialized_rows: rows,
    })
}

/// `dΦ/dt` along body velocities `ξ` (stacked).
pub fn constraint_rate<T: Scalar>(
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
) -> Result<DVector<T>> {
    let eval = constraint_gradients(graph, g)?;
    Ok(&eval.trivialized_rows * xi)
}

/// Position velocity and acceleration of one agent along `t ↦ g·exp(tξ)` at `t = 0`.
fn position_jets<T: Scalar>(g: &GroupElement<T>, xi: &DVector<T>) -> (DVector<T>, DVector<T>) {
    let kind = g.kind();
    let n = kind.matrix_size();
    let t = kind.translation_dim();
    let xm = crate::lie::AlgebraElement::from_coords_unchecked(kind, xi.clone()).matrix();
    let first = g.matrix() * &xm;
    let second = &first * &xm;
    (
        first.view((0, n - 1), (t, 1)).column(0).into_owned(),
        second.view((0, n - 1), (t, 1)).column(0).into_owned(),
    )
}

/// `d²/dε² Φ(g·exp(εξ))` at `ε = 0`: the velocity-dependent part of `d²Φ/dt²`.
///
/// Along a trajectory, `d²Φ/dt² = A(g) ξ̇ + bias(g, ξ)` with `A` the trivialized rows.
pub fn constraint_acceleration_bias<T: Scalar>(
    graph: &ConstraintGraph<T>,
    g: &ProductElement<T>,
    xi: &DVector<T>,
) -> Result<DVector<T>> {
    graph.check(g)?;
    let n = g.kind().dim();
    if xi.len() != n * graph.agents {
        return Err(GeoError::invalid("velocity has the wrong length"));
    }
    let two = T::lit(2.0);
    let jets: Vec<_> = g
        .agents()
        .iter()
        .enumerate()
        .map(|(i, gi)| position_jets(gi, &xi.rows(i * n, n).into_owned()))
        .collect();
    let bias = graph
        .edges
        .iter()
        .map(|e| {
            let dp = g.agent(e.i).translation() - g.agent(e.j).translation();
            let dv = &jets[e.i].0 - &jets[e.j].0;
            let da = &jets[e.i].1 - &jets[e.j].1;
            (dv.norm_squared() + dp.dot(&da)) * two
        })
        .collect::<Vec<_>>();
    Ok(DVector::from_vec(bias))
}

/// Index of the constraint with the largest `|φ|` together with that value.
pub fn worst_violation<T: Scalar>(values: &DVector<T>) -> Option<(usize, T)> {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| (k, v.abs()))
        .fold(None, |best, (k, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((k, v)),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    fn se3(b: [f64; 3]) -> GroupElement<f64> {
        GroupElement::se3(Matrix3::identity(), Vector3::from(b)).unwrap()
    }

    fn auv_graph(r: usize, edges: &[(usize, usize)]) -> ConstraintGraph<f64> {
        ConstraintGraph::new(
            r,
            ConstraintKind::Se3CenterDistance,
            vec![1.0; r],
            edges
                .iter()
                .enumerate()
                .map(|(k, &(i, j))| EdgeConstraint::new(i, j, k + 1, 10.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn psi_of_identity_and_pose() {
        let e = GroupElement::<f64>::identity(GroupKind::SE2);
        assert_eq!(psi(&e).unwrap(), e);
        let g = GroupElement::se2(1.0, 2.0, 0.8);
        let p = psi(&g).unwrap();
        assert_eq!(p.translation().as_slice(), &[-1.0, -2.0]);
        assert_eq!(p.rotation(), DMatrix::identity(2, 2));
        assert!(psi(&se3([0.0; 3])).is_err());
    }

    #[test]
    fn psi_times_g_strips_translation() {
        let g = GroupElement::se2(1.0, 2.0, 0.8);
        let prod = psi(&g).unwrap().compose(&g).unwrap();
        let direct = psi(&g).unwrap().matrix() * g.matrix();
        assert_eq!(prod.matrix(), &direct);
        assert!(prod.translation().amax() < 1e-15);
        assert_eq!(prod.rotation(), g.rotation());
    }

    #[test]
    fn published_initial_pair_is_on_the_constraint() {
        let graph = auv_graph(2, &[(0, 1)]);
        let g = ProductElement::new(vec![se3([0.0, 0.0, 0.0]), se3([10.0, 6.63324958, 0.0])]).unwrap();
        let phi = constraint_value(&graph, &g).unwrap();
        assert!(phi[0].abs() < 1e-5, "{}", phi[0]);
    }

    #[test]
    fn coincident_agents_violate_by_full_separation() {
        let graph = auv_graph(2, &[(0, 1)]);
        let g = ProductElement::new(vec![se3([1.0, 2.0, 3.0]), se3([1.0, 2.0, 3.0])]).unwrap();
        let phi = constraint_value(&graph, &g).unwrap();
        assert_eq!(phi[0], -144.0);
    }

    #[test]
    fn se3_row_closed_form() {
        let graph = auv_graph(2, &[(0, 1)]);
        let g = ProductElement::new(vec![se3([12.0, 0.0, 0.0]), se3([0.0, 0.0, 0.0])]).unwrap();
        let eval = constraint_gradients(&graph, &g).unwrap();
        let row = eval.trivialized_rows.row(0);
        assert_eq!(row.columns(0, 6).iter().copied().collect::<Vec<_>>(), vec![24.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(row.columns(6, 6).iter().copied().collect::<Vec<_>>(), vec![-24.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_incident_blocks_are_zero() {
        let graph = auv_graph(3, &[(0, 1)]);
        let g = ProductElement::new(vec![se3([0.0; 3]), se3([5.0, 1.0, 0.0]), se3([3.0, 3.0, 3.0])]).unwrap();
        let eval = constraint_gradients(&graph, &g).unwrap();
        assert!(eval.trivialized_rows.view((0, 12), (1, 6)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn edges_are_sorted_and_normalised() {
        let graph = ConstraintGraph::new(
            3,
            ConstraintKind::Se2Frobenius,
            vec![],
            vec![
                EdgeConstraint::new(2, 1, 3, 1.0),
                EdgeConstraint::new(0, 2, 2, 1.0),
                EdgeConstraint::new(0, 1, 1, 1.0),
            ],
        )
        .unwrap();
        let order: Vec<_> = graph.edges().iter().map(|e| e.label()).collect();
        assert_eq!(order, vec![(1, 2, 1), (1, 3, 2), (2, 3, 3)]);
    }

    #[test]
    fn invalid_graphs() {
        let bad_loop = ConstraintGraph::new(2, ConstraintKind::Se2Frobenius, vec![], vec![EdgeConstraint::new(1, 1, 1, 1.0)]);
        assert!(bad_loop.is_err());
        let bad_dist = ConstraintGraph::new(2, ConstraintKind::Se2Frobenius, vec![], vec![EdgeConstraint::new(0, 1, 1, 0.0)]);
        assert!(bad_dist.is_err());
        let dup = ConstraintGraph::new(
            2,
            ConstraintKind::Se2Frobenius,
            vec![],
            vec![EdgeConstraint::new(0, 1, 1, 1.0), EdgeConstraint::new(1, 0, 1, 2.0)],
        );
        assert!(dup.is_err());
        let radii = ConstraintGraph::<f64>::new(2, ConstraintKind::Se3CenterDistance, vec![1.0], vec![]);
        assert!(radii.is_err());
    }

    #[test]
    fn worst_violation_picks_largest_magnitude() {
        let v = DVector::from_vec(vec![0.1, -0.5, 0.3]);
        assert_eq!(worst_violation(&v), Some((1, 0.5)));
        assert_eq!(worst_violation(&DVector::<f64>::zeros(0)), None);
    }
}
