use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};

use super::{skew, vec3, AlgebraElement, CoAlgebraElement, GroupKind};
use crate::linalg::nearest_rotation;
use crate::{GeoError, Result, Scalar};

/// An element of SO(3), SE(2) or SE(3) in homogeneous-matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement<T: Scalar> {
    kind: GroupKind,
    matrix: DMatrix<T>,
}

impl<T: Scalar> GroupElement<T> {
    pub fn identity(kind: GroupKind) -> Self {
        let n = kind.matrix_size();
        Self {
            kind,
            matrix: DMatrix::identity(n, n),
        }
    }

    /// Validates a homogeneous matrix.
    ///
    /// A rotation block within [`Scalar::orthogonality_tol`] is accepted verbatim;
    /// one within [`Scalar::reprojection_tol`] is replaced by its nearest rotation;
    /// anything worse is rejected. The homogeneous bottom row must be exact.
    pub fn from_matrix(kind: GroupKind, matrix: DMatrix<T>) -> Result<Self> {
        let n = kind.matrix_size();
        if matrix.shape() != (n, n) {
            return Err(GeoError::invalid(format!(
                "{kind} expects a {n}x{n} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(GeoError::invalid("group element has non-finite entries"));
        }
        if kind.is_euclidean() {
            for c in 0..n {
                let expected = if c == n - 1 { T::one() } else { T::zero() };
                if matrix[(n - 1, c)] != expected {
                    return Err(GeoError::invalid(format!(
                        "{kind} bottom row must be (0,…,0,1)"
                    )));
                }
            }
        }
        let mut element = Self { kind, matrix };
        let err = element.orthogonality_error();
        if err <= T::orthogonality_tol() {
            return Ok(element);
        }
        if err <= T::reprojection_tol() {
            element.reproject();
            return Ok(element);
        }
        Err(GeoError::invalid(format!(
            "rotation block is not orthonormal (error {:e})",
            err.as_f64()
        )))
    }

    /// Builds an element from any matrix whose rotation block is close to a
    /// rotation, re-projecting unconditionally. Used after additive updates.
    pub fn from_matrix_projected(kind: GroupKind, mut matrix: DMatrix<T>) -> Result<Self> {
        let n = kind.matrix_size();
        if matrix.shape() != (n, n) {
            return Err(GeoError::invalid("matrix has the wrong shape"));
        }
        if kind.is_euclidean() {
            for c in 0..n {
                matrix[(n - 1, c)] = if c == n - 1 { T::one() } else { T::zero() };
            }
        }
        let mut element = Self { kind, matrix };
        element.reproject();
        Ok(element)
    }

    /// Wraps a matrix that is known to be valid (products/inverses of valid elements).
    pub(crate) fn from_raw(kind: GroupKind, matrix: DMatrix<T>) -> Self {
        Self { kind, matrix }
    }

    pub fn so3(rotation: Matrix3<T>) -> Result<Self> {
        Self::from_matrix(GroupKind::SO3, DMatrix::from_iterator(3, 3, rotation.iter().copied()))
    }

    pub fn se3(rotation: Matrix3<T>, translation: Vector3<T>) -> Result<Self> {
        let mut m = DMatrix::identity(4, 4);
        m.view_mut((0, 0), (3, 3)).copy_from(&rotation);
        m.view_mut((0, 3), (3, 1)).copy_from(&translation);
        Self::from_matrix(GroupKind::SE3, m)
    }

    /// Planar pose `(x, y, θ)`.
    pub fn se2(x: T, y: T, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        let mut m = DMatrix::identity(3, 3);
        m[(0, 0)] = c;
        m[(0, 1)] = -s;
        m[(1, 0)] = s;
        m[(1, 1)] = c;
        m[(0, 2)] = x;
        m[(1, 2)] = y;
        Self::from_raw(GroupKind::SE2, m)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    pub fn rotation(&self) -> DMatrix<T> {
        let k = self.kind.rotation_size();
        self.matrix.view((0, 0), (k, k)).into_owned()
    }

    /// Translation column (empty for SO(3)).
    pub fn translation(&self) -> DVector<T> {
        let t = self.kind.translation_dim();
        if t == 0 {
            return DVector::zeros(0);
        }
        self.matrix.view((0, t), (t, 1)).column(0).into_owned()
    }

    /// Rotation block of a 3-D group as a fixed-size matrix.
    pub fn rotation3(&self) -> Matrix3<T> {
        assert_eq!(self.kind.rotation_size(), 3, "rotation3 on a planar group");
        Matrix3::from_fn(|i, j| self.matrix[(i, j)])
    }

    pub fn translation3(&self) -> Vector3<T> {
        assert_eq!(self.kind, GroupKind::SE3, "translation3 needs SE3");
        Vector3::new(self.matrix[(0, 3)], self.matrix[(1, 3)], self.matrix[(2, 3)])
    }

    pub fn rotation2(&self) -> Matrix2<T> {
        assert_eq!(self.kind, GroupKind::SE2, "rotation2 needs SE2");
        Matrix2::new(
            self.matrix[(0, 0)],
            self.matrix[(0, 1)],
            self.matrix[(1, 0)],
            self.matrix[(1, 1)],
        )
    }

    /// `‖RᵀR − I‖_F + |det R − 1|`.
    pub fn orthogonality_error(&self) -> T {
        let r = self.rotation();
        let k = r.nrows();
        let gram = r.transpose() * &r - DMatrix::<T>::identity(k, k);
        gram.norm() + (r.determinant() - T::one()).abs()
    }

    fn reproject(&mut self) {
        let k = self.kind.rotation_size();
        let r = nearest_rotation(&self.rotation());
        self.matrix.view_mut((0, 0), (k, k)).copy_from(&r);
    }

    /// Left translation `L_g(h) = g·h`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.kind.check_same(other.kind)?;
        Ok(Self::from_raw(self.kind, &self.matrix * &other.matrix))
    }

    pub fn inverse(&self) -> Self {
        let k = self.kind.rotation_size();
        let rt = self.rotation().transpose();
        let n = self.kind.matrix_size();
        let mut m = DMatrix::identity(n, n);
        m.view_mut((0, 0), (k, k)).copy_from(&rt);
        if self.kind.is_euclidean() {
            let b = self.translation();
            let t = -(&rt * b);
            m.view_mut((0, k), (k, 1)).copy_from(&t);
        }
        Self::from_raw(self.kind, m)
    }

    /// Exponential of an algebra element in closed form, with a Taylor
    /// fallback below [`Scalar::series_threshold`].
    pub fn exp(xi: &AlgebraElement<T>) -> Self {
        let kind = xi.kind();
        let v = xi.coords();
        let small = T::series_threshold();
        let half = T::lit(0.5);
        let sixth = T::lit(1.0 / 6.0);
        match kind {
            GroupKind::SO3 => {
                let r = so3_exp(&vec3(v, 0), small);
                Self::from_raw(kind, DMatrix::from_iterator(3, 3, r.iter().copied()))
            }
            GroupKind::SE3 => {
                let nu = vec3(v, 0);
                let w = vec3(v, 3);
                let r = so3_exp(&w, small);
                let theta = w.norm();
                let wx = skew(&w);
                let wx2 = wx * wx;
                let (a, b) = if theta < small {
                    (half, sixth)
                } else {
                    (one_minus_cos_sq(theta), theta_minus_sin_cube(theta))
                };
                let jac = Matrix3::identity() + wx * a + wx2 * b;
                let t = jac * nu;
                let mut m = DMatrix::identity(4, 4);
                m.view_mut((0, 0), (3, 3)).copy_from(&r);
                m.view_mut((0, 3), (3, 1)).copy_from(&t);
                Self::from_raw(kind, m)
            }
            GroupKind::SE2 => {
                let theta = v[2];
                let (s, c) = theta.sin_cos();
                let (a, b) = if theta.abs() < small {
                    (T::one() - theta * theta * sixth, theta * half)
                } else {
                    (s / theta, one_minus_cos_sq(theta) * theta)
                };
                let x = a * v[0] - b * v[1];
                let y = b * v[0] + a * v[1];
                let mut m = DMatrix::identity(3, 3);
                m[(0, 0)] = c;
                m[(0, 1)] = -s;
                m[(1, 0)] = s;
                m[(1, 1)] = c;
                m[(0, 2)] = x;
                m[(1, 2)] = y;
                Self::from_raw(kind, m)
            }
        }
    }

    /// Matrix of `Ad_g` in the algebra's coordinates (columns are `Ad_g e_s`).
    pub fn adjoint_matrix(&self) -> DMatrix<T> {
        let n = self.kind.dim();
        let mut m = DMatrix::zeros(n, n);
        match self.kind {
            GroupKind::SO3 => m.copy_from(&self.rotation()),
            GroupKind::SE2 => {
                let r = self.rotation();
                m.view_mut((0, 0), (2, 2)).copy_from(&r);
                // rotation generator acts on the translation through −S p = (p_y, −p_x)
                m[(0, 2)] = self.matrix[(1, 2)];
                m[(1, 2)] = -self.matrix[(0, 2)];
                m[(2, 2)] = T::one();
            }
            GroupKind::SE3 => {
                let r = self.rotation3();
                let bx = skew(&self.translation3());
                m.view_mut((0, 0), (3, 3)).copy_from(&r);
                m.view_mut((0, 3), (3, 3)).copy_from(&(bx * r));
                m.view_mut((3, 3), (3, 3)).copy_from(&r);
            }
        }
        m
    }

    /// `Ad_g ξ = g ξ g⁻¹`.
    pub fn adjoint(&self, xi: &AlgebraElement<T>) -> Result<AlgebraElement<T>> {
        self.kind.check_same(xi.kind())?;
        Ok(AlgebraElement::from_coords_unchecked(
            self.kind,
            self.adjoint_matrix() * xi.coords(),
        ))
    }

    /// Dual of `Ad_g`: `⟨coAd(g, μ), ξ⟩ = ⟨μ, Ad_g ξ⟩`.
    ///
    /// With this convention the conventional `Ad*_{g⁻¹} μ` is `coadjoint` at `g.inverse()`.
    pub fn coadjoint(&self, mu: &CoAlgebraElement<T>) -> Result<CoAlgebraElement<T>> {
        self.kind.check_same(mu.kind())?;
        Ok(CoAlgebraElement::from_coords_unchecked(
            self.kind,
            self.adjoint_matrix().transpose() * mu.coords(),
        ))
    }
}

fn so3_exp<T: Scalar>(w: &Vector3<T>, small: T) -> Matrix3<T> {
    let theta = w.norm();
    let wx = skew(w);
    let wx2 = wx * wx;
    let (a, b) = if theta < small {
        (T::one() - theta * theta / T::lit(6.0), T::lit(0.5))
    } else {
        (theta.sin() / theta, one_minus_cos_sq(theta))
    };
    Matrix3::identity() + wx * a + wx2 * b
}

/// `(1 − cos θ)/θ²` without cancellation.
fn one_minus_cos_sq<T: Scalar>(theta: T) -> T {
    let s = (theta * T::lit(0.5)).sin();
    T::lit(2.0) * s * s / (theta * theta)
}

/// `(θ − sin θ)/θ³`, switching to its series where the difference cancels.
fn theta_minus_sin_cube<T: Scalar>(theta: T) -> T {
    let t2 = theta * theta;
    if theta.abs() < T::lit(1e-2) {
        T::lit(1.0 / 6.0) - t2 / T::lit(120.0) + t2 * t2 / T::lit(5040.0)
    } else {
        (theta - theta.sin()) / (t2 * theta)
    }
}
