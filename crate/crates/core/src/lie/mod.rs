//! Matrix Lie group kernel for SO(3), SE(2), SE(3) and finite products.
//!
//! Algebra coordinates:
//!
//! | group | coords | basis |
//! |-------|--------|-------|
//! | SO(3) | `ω` | `hat(e_k)` |
//! | SE(2) | `(v₁, v₂, ω)` | `E₁₃`, `E₂₃`, `E₂₁ − E₁₂` |
//! | SE(3) | `(ν, Ω)` | translation `E_{k4}`, then `hat(e_k)` in the top-left block |
//!
//! Co-algebra elements are stored as coordinates against the dual basis, so the
//! canonical pairing is the dot product. The trace pairing `tr(α ξ)` is available
//! through [`CoAlgebraElement::dual_matrix`] and [`trace_pairing`], which
//! reproduce the same numbers.

mod algebra;
mod group;
mod product;

pub use algebra::{trace_pairing, AlgebraElement, CoAlgebraElement};
pub use group::GroupElement;
pub use product::{ProductAlgebraElement, ProductElement};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::{GeoError, Result, Scalar};

/// The groups the kernel knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    SO3,
    SE2,
    SE3,
}

impl GroupKind {
    /// Dimension of the algebra.
    pub const fn dim(self) -> usize {
        match self {
            GroupKind::SO3 | GroupKind::SE2 => 3,
            GroupKind::SE3 => 6,
        }
    }

    /// Side length of the homogeneous matrix.
    pub const fn matrix_size(self) -> usize {
        match self {
            GroupKind::SO3 | GroupKind::SE2 => 3,
            GroupKind::SE3 => 4,
        }
    }

    /// Side length of the rotation block.
    pub const fn rotation_size(self) -> usize {
        match self {
            GroupKind::SE2 => 2,
            GroupKind::SO3 | GroupKind::SE3 => 3,
        }
    }

    /// Number of translational coordinates (0 for SO(3)).
    pub const fn translation_dim(self) -> usize {
        match self {
            GroupKind::SO3 => 0,
            GroupKind::SE2 => 2,
            GroupKind::SE3 => 3,
        }
    }

    pub const fn is_euclidean(self) -> bool {
        !matches!(self, GroupKind::SO3)
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::SO3 => "SO3",
            GroupKind::SE2 => "SE2",
            GroupKind::SE3 => "SE3",
        }
    }

    /// Indices of the translational coordinates within an algebra vector.
    pub fn translation_coords(self) -> std::ops::Range<usize> {
        0..self.translation_dim()
    }

    /// Indices of the rotational coordinates within an algebra vector.
    pub fn rotation_coords(self) -> std::ops::Range<usize> {
        self.translation_dim()..self.dim()
    }

    pub(crate) fn check_same(self, other: GroupKind) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(GeoError::invalid(format!(
                "group mismatch: {} vs {}",
                self.name(),
                other.name()
            )))
        }
    }

    /// Matrix of the `s`-th basis element.
    pub fn basis_matrix<T: Scalar>(self, s: usize) -> DMatrix<T> {
        let mut coords = DVector::zeros(self.dim());
        coords[s] = T::one();
        hat_matrix(self, &coords)
    }
}

impl std::fmt::Display for GroupKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GroupKind {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SO3" | "SO(3)" => Ok(GroupKind::SO3),
            "SE2" | "SE(2)" => Ok(GroupKind::SE2),
            "SE3" | "SE(3)" => Ok(GroupKind::SE3),
            other => Err(GeoError::invalid(format!("unknown group `{other}`"))),
        }
    }
}

/// `hat: ℝ³ → so(3)`.
pub fn skew<T: Scalar>(w: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(
        T::zero(),
        -w.z,
        w.y,
        w.z,
        T::zero(),
        -w.x,
        -w.y,
        w.x,
        T::zero(),
    )
}

pub(crate) fn hat_matrix<T: Scalar>(kind: GroupKind, v: &DVector<T>) -> DMatrix<T> {
    let size = kind.matrix_size();
    let mut m = DMatrix::zeros(size, size);
    match kind {
        GroupKind::SO3 => {
            let w = skew(&Vector3::new(v[0], v[1], v[2]));
            m.copy_from(&w);
        }
        GroupKind::SE2 => {
            m[(0, 1)] = -v[2];
            m[(1, 0)] = v[2];
            m[(0, 2)] = v[0];
            m[(1, 2)] = v[1];
        }
        GroupKind::SE3 => {
            let w = skew(&Vector3::new(v[3], v[4], v[5]));
            m.view_mut((0, 0), (3, 3)).copy_from(&w);
            m[(0, 3)] = v[0];
            m[(1, 3)] = v[1];
            m[(2, 3)] = v[2];
        }
    }
    m
}

pub(crate) fn vee_matrix<T: Scalar>(kind: GroupKind, m: &DMatrix<T>) -> DVector<T> {
    match kind {
        GroupKind::SO3 => DVector::from_vec(vec![m[(2, 1)], m[(0, 2)], m[(1, 0)]]),
        GroupKind::SE2 => DVector::from_vec(vec![m[(0, 2)], m[(1, 2)], m[(1, 0)]]),
        GroupKind::SE3 => DVector::from_vec(vec![
            m[(0, 3)],
            m[(1, 3)],
            m[(2, 3)],
            m[(2, 1)],
            m[(0, 2)],
            m[(1, 0)],
        ]),
    }
}

pub(crate) fn vec3<T: Scalar>(v: &DVector<T>, offset: usize) -> Vector3<T> {
    Vector3::new(v[offset], v[offset + 1], v[offset + 2])
}

/// Coordinates of `T*_e L_g(G)`: the ambient covector `G` (a matrix gradient
/// under the Frobenius pairing) pulled back to the algebra, i.e. the numbers
/// `⟨G, g·e_s⟩_F` for each basis element `e_s`.
pub fn trivialize_covector<T: Scalar>(g: &GroupElement<T>, ambient: &DMatrix<T>) -> DVector<T> {
    let kind = g.kind();
    let pulled = g.matrix().transpose() * ambient;
    DVector::from_fn(kind.dim(), |s, _| {
        let basis = kind.basis_matrix::<T>(s);
        pulled.component_mul(&basis).sum()
    })
}
