//! Analytic first- and second-order data checked against central differences
//! along right-translated curves `g·exp(εe_s)`.

use geofeas_core::auv::{potential_forces, AuvParams, ForceSignConvention};
use geofeas_core::constraints::{constraint_acceleration_bias, constraint_gradients, constraint_value, edge_value};
use geofeas_core::dynamics::Potential;
use geofeas_core::lie::trivialize_covector;
use geofeas_core::{
    AlgebraElement, ConstraintGraph, ConstraintKind, EdgeConstraint, GroupElement, GroupKind, ProductElement,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POSES: usize = 200;
const REL_TOL: f64 = 1e-6;

fn random_element(rng: &mut ChaCha8Rng, kind: GroupKind, spread: f64) -> GroupElement<f64> {
    let mut c: Vec<f64> = (0..kind.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
    for s in kind.translation_coords() {
        c[s] *= spread;
    }
    GroupElement::exp(&AlgebraElement::hat(kind, &c).unwrap())
}

fn random_config(rng: &mut ChaCha8Rng, kind: GroupKind, r: usize) -> ProductElement<f64> {
    ProductElement::new((0..r).map(|_| random_element(rng, kind, 4.0)).collect()).unwrap()
}

fn perturbed(g: &ProductElement<f64>, agent: usize, s: usize, eps: f64) -> ProductElement<f64> {
    let kind = g.kind();
    let mut agents = g.agents().to_vec();
    let step = GroupElement::exp(&AlgebraElement::basis(kind, s).scale(eps));
    agents[agent] = agents[agent].compose(&step).unwrap();
    ProductElement::new(agents).unwrap()
}

fn rel_err(analytic: &DVector<f64>, fd: &DVector<f64>) -> f64 {
    (analytic - fd).norm() / analytic.norm().max(fd.norm()).max(1e-300)
}

fn graphs() -> Vec<ConstraintGraph<f64>> {
    let edges = |d: f64| {
        vec![
            EdgeConstraint::new(0, 1, 1, d),
            EdgeConstraint::new(0, 2, 2, d),
            EdgeConstraint::new(1, 2, 3, d),
        ]
    };
    vec![
        ConstraintGraph::new(3, ConstraintKind::Se2Frobenius, vec![], edges(10.0)).unwrap(),
        ConstraintGraph::new(3, ConstraintKind::Se3CenterDistance, vec![1.0, 0.5, 2.0], edges(10.0)).unwrap(),
    ]
}

#[test]
fn constraint_rows_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let eps = 1e-5;
    for graph in graphs() {
        let kind = graph.group();
        let n = kind.dim();
        let mut worst = 0.0f64;
        for _ in 0..POSES {
            let g = random_config(&mut rng, kind, 3);
            let rows = constraint_gradients(&graph, &g).unwrap().trivialized_rows;
            for k in 0..graph.constraint_count() {
                let mut fd = DVector::zeros(3 * n);
                for a in 0..3 {
                    for s in 0..n {
                        let plus = constraint_value(&graph, &perturbed(&g, a, s, eps)).unwrap()[k];
                        let minus = constraint_value(&graph, &perturbed(&g, a, s, -eps)).unwrap()[k];
                        fd[a * n + s] = (plus - minus) / (2.0 * eps);
                    }
                }
                let an = rows.row(k).transpose();
                worst = worst.max(rel_err(&an, &fd));
            }
        }
        assert!(worst <= REL_TOL, "{kind}: worst relative error {worst:e}");
    }
}

#[test]
fn ambient_gradients_trivialize_to_the_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for graph in graphs() {
        let n = graph.group().dim();
        for _ in 0..20 {
            let g = random_config(&mut rng, graph.group(), 3);
            let eval = constraint_gradients(&graph, &g).unwrap();
            for (k, (e, amb)) in graph.edges().iter().zip(&eval.ambient_gradients).enumerate() {
                let ri = trivialize_covector(g.agent(e.i), &amb.wrt_i);
                let rj = trivialize_covector(g.agent(e.j), &amb.wrt_j);
                let row = eval.trivialized_rows.row(k);
                assert!((row.columns(e.i * n, n).transpose() - ri).amax() < 1e-12);
                assert!((row.columns(e.j * n, n).transpose() - rj).amax() < 1e-12);
            }
        }
    }
}

#[test]
fn acceleration_bias_matches_second_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let eps = 1e-4;
    for graph in graphs() {
        let kind = graph.group();
        let n = kind.dim();
        for _ in 0..50 {
            let g = random_config(&mut rng, kind, 3);
            let xi = DVector::from_fn(3 * n, |_, _| rng.gen_range(-1.0..1.0));
            let along = |t: f64| constraint_value(&graph, &g.right_exp(&(&xi * t)).unwrap()).unwrap();
            let fd = (along(eps) - along(0.0) * 2.0 + along(-eps)) / (eps * eps);
            let an = constraint_acceleration_bias(&graph, &g, &xi).unwrap();
            let err = (&an - &fd).amax() / an.amax().max(1.0);
            assert!(err < 1e-5, "{kind}: {err:e}");
        }
    }
}

#[test]
fn potential_forces_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let params = AuvParams::<f64>::published();
    let pot = params.potential(ForceSignConvention::Variational);
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..POSES {
        let gi = random_element(&mut rng, GroupKind::SE3, 5.0);
        let g = ProductElement::new(vec![gi.clone()]).unwrap();
        let fd = DVector::from_fn(6, |s, _| {
            let up = pot.energy(perturbed(&g, 0, s, eps).agent(0));
            let down = pot.energy(perturbed(&g, 0, s, -eps).agent(0));
            (up - down) / (2.0 * eps)
        });
        // The forces are minus the trivialized differential of the potential.
        let (u, w) = potential_forces(&params, &gi, ForceSignConvention::Variational).unwrap();
        let an = -DVector::from_iterator(6, u.iter().chain(w.iter()).copied());
        worst = worst.max(rel_err(&an, &fd));
        // The translational and rotational blocks separately, so a small 𝒲 cannot hide.
        assert!(rel_err(&an.rows(0, 3).into_owned(), &fd.rows(0, 3).into_owned()) <= REL_TOL);
        assert!(rel_err(&an.rows(3, 3).into_owned(), &fd.rows(3, 3).into_owned()) <= REL_TOL);
    }
    assert!(worst <= REL_TOL, "worst relative error {worst:e}");
}

#[test]
fn potential_ambient_gradient_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let pot = AuvParams::<f64>::published().potential(ForceSignConvention::Variational);
    for _ in 0..50 {
        let g = random_element(&mut rng, GroupKind::SE3, 5.0);
        let via_ambient = trivialize_covector(&g, &pot.ambient_gradient(&g));
        assert!((via_ambient - pot.trivialized_gradient(&g)).amax() < 1e-10);
    }
}

#[test]
fn as_printed_convention_flips_only_the_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let params = AuvParams::<f64>::published();
    for _ in 0..20 {
        let g = random_element(&mut rng, GroupKind::SE3, 5.0);
        let (u1, w1) = potential_forces(&params, &g, ForceSignConvention::Variational).unwrap();
        let (u2, w2) = potential_forces(&params, &g, ForceSignConvention::AsPrinted).unwrap();
        assert_eq!(u1, -u2);
        assert_eq!(w1, w2);
    }
}

#[test]
fn level_vehicle_forces() {
    let params = AuvParams::<f64>::published();
    let (u, w) = potential_forces(&params, &GroupElement::identity(GroupKind::SE3), ForceSignConvention::Variational)
        .unwrap();
    // Net vertical force is weight minus buoyancy; a level body feels no restoring torque.
    assert!((u[2] - (123.8 * 9.81 - 1215.8)).abs() < 1e-9);
    assert_eq!((u[0], u[1]), (0.0, 0.0));
    assert!(w.norm() < 1e-15);
}

#[test]
fn se2_constraint_is_the_squared_distance() {
    let graph = &graphs()[0];
    let e = graph.edges()[0];
    let gi = GroupElement::se2(3.0, 4.0, 0.7);
    let gj = GroupElement::se2(-1.0, 1.0, -2.0);
    // ‖ψ(g_j) g_i‖²_F = 3 + ‖b_i − b_j‖², so φ = 25 − 100.
    assert!((edge_value(graph, &e, &gi, &gj).unwrap() - (25.0 - 100.0)).abs() < 1e-12);
}
