//! Shared test helpers: a fourth-order reference path for constrained flows
//! and random draws.
//!
//! The reference is classical RK4 on the ambient matrix embedding, with the
//! vector field evaluated at the nearest group element. The exact flow of that
//! field stays on the group, so RK4 keeps fourth order.
#![allow(dead_code)]

use geofeas_core::{AlgebraElement, GroupElement, GroupKind, ProductElement};
use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Field<'a> = dyn Fn(&ProductElement<f64>, &DVector<f64>) -> DVector<f64> + 'a;

#[derive(Clone)]
pub struct Ambient {
    pub kind: GroupKind,
    pub mats: Vec<DMatrix<f64>>,
    pub xi: DVector<f64>,
}

impl Ambient {
    pub fn new(g: &ProductElement<f64>, xi: &DVector<f64>) -> Self {
        Self {
            kind: g.kind(),
            mats: g.agents().iter().map(|a| a.matrix().clone()).collect(),
            xi: xi.clone(),
        }
    }

    pub fn group(&self) -> ProductElement<f64> {
        let agents = self
            .mats
            .iter()
            .map(|m| GroupElement::from_matrix_projected(self.kind, m.clone()).unwrap())
            .collect();
        ProductElement::new(agents).unwrap()
    }

    pub fn deriv(&self, acc: &Field) -> Self {
        let n = self.kind.dim();
        let mats = self
            .mats
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let xi_i = AlgebraElement::from_coords(self.kind, self.xi.rows(i * n, n).into_owned()).unwrap();
                m * xi_i.matrix()
            })
            .collect();
        Self {
            kind: self.kind,
            mats,
            xi: acc(&self.group(), &self.xi),
        }
    }

    pub fn axpy(&self, s: f64, d: &Self) -> Self {
        Self {
            kind: self.kind,
            mats: self.mats.iter().zip(&d.mats).map(|(a, b)| a + b * s).collect(),
            xi: &self.xi + &d.xi * s,
        }
    }

    pub fn rk4(&self, h: f64, acc: &Field) -> Self {
        let k1 = self.deriv(acc);
        let k2 = self.axpy(h / 2.0, &k1).deriv(acc);
        let k3 = self.axpy(h / 2.0, &k2).deriv(acc);
        let k4 = self.axpy(h, &k3).deriv(acc);
        let mut out = self.axpy(h / 6.0, &k1);
        out = out.axpy(h / 3.0, &k2);
        out = out.axpy(h / 3.0, &k3);
        out.axpy(h / 6.0, &k4)
    }
}

/// Richardson-extrapolated central estimate of the first and second time
/// derivatives of `f` along the reference path through `(g, ξ)`.
pub fn path_derivatives(
    g: &ProductElement<f64>,
    xi: &DVector<f64>,
    acc: &Field,
    f: &dyn Fn(&Ambient) -> DVector<f64>,
    h: f64,
) -> (DVector<f64>, DVector<f64>) {
    let start = Ambient::new(g, xi);
    let f0 = f(&start);
    let central = |h: f64| {
        let (fp, fm) = (f(&start.rk4(h, acc)), f(&start.rk4(-h, acc)));
        ((&fp - &fm) / (2.0 * h), (&fp - &f0 * 2.0 + &fm) / (h * h))
    };
    let (d1, d2) = central(h);
    let (e1, e2) = central(h / 2.0);
    ((e1 * 4.0 - d1) / 3.0, (e2 * 4.0 - d2) / 3.0)
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&l * l.transpose() + DMatrix::identity(n, n)) * scale
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
    Rotation3::new(axis).into_inner()
}


/// `steps` RK4 steps of size `h`, returned on the group.
pub fn reference_flow(
    g: &ProductElement<f64>,
    xi: &DVector<f64>,
    acc: &Field,
    h: f64,
    steps: usize,
) -> (ProductElement<f64>, DVector<f64>) {
    let mut s = Ambient::new(g, xi);
    for _ in 0..steps {
        s = s.rk4(h, acc);
    }
    (s.group(), s.xi)
}
