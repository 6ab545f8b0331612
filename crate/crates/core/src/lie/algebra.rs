use nalgebra::{DMatrix, DVector, Matrix2};

use super::{hat_matrix, skew, vec3, vee_matrix, GroupKind};
use crate::{GeoError, Result, Scalar};

/// Element of the Lie algebra stored as coordinates against the fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement<T: Scalar> {
    kind: GroupKind,
    coords: DVector<T>,
}

impl<T: Scalar> AlgebraElement<T> {
    /// `hat`: coordinates to algebra element.
    pub fn hat(kind: GroupKind, coords: &[T]) -> Result<Self> {
        Self::from_coords(kind, DVector::from_column_slice(coords))
    }

    pub fn from_coords(kind: GroupKind, coords: DVector<T>) -> Result<Self> {
        if coords.len() != kind.dim() {
            return Err(GeoError::invalid(format!(
                "{kind} algebra has dimension {}, got {} coordinates",
                kind.dim(),
                coords.len()
            )));
        }
        Ok(Self { kind, coords })
    }

    pub(crate) fn from_coords_unchecked(kind: GroupKind, coords: DVector<T>) -> Self {
        debug_assert_eq!(coords.len(), kind.dim());
        Self { kind, coords }
    }

    /// Reads coordinates off a matrix in the algebra's matrix form.
    pub fn from_matrix(kind: GroupKind, m: &DMatrix<T>) -> Result<Self> {
        let n = kind.matrix_size();
        if m.shape() != (n, n) {
            return Err(GeoError::invalid(format!("{kind} algebra expects a {n}x{n} matrix")));
        }
        Ok(Self {
            kind,
            coords: vee_matrix(kind, m),
        })
    }

    pub fn zero(kind: GroupKind) -> Self {
        Self {
            kind,
            coords: DVector::zeros(kind.dim()),
        }
    }

    pub fn basis(kind: GroupKind, s: usize) -> Self {
        let mut coords = DVector::zeros(kind.dim());
        coords[s] = T::one();
        Self { kind, coords }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// `vee`.
    pub fn coords(&self) -> &DVector<T> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<T> {
        self.coords
    }

    pub fn matrix(&self) -> DMatrix<T> {
        hat_matrix(self.kind, &self.coords)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            kind: self.kind,
            coords: &self.coords * s,
        }
    }

    /// Matrix of `ad_ξ` in coordinates (columns are `[ξ, e_s]`).
    pub fn ad_matrix(&self) -> DMatrix<T> {
        let n = self.kind.dim();
        let v = &self.coords;
        let mut m = DMatrix::zeros(n, n);
        match self.kind {
            GroupKind::SO3 => m.copy_from(&skew(&vec3(v, 0))),
            GroupKind::SE2 => {
                let w = v[2];
                m[(0, 1)] = -w;
                m[(1, 0)] = w;
                // −S v = (v₂, −v₁)
                m[(0, 2)] = v[1];
                m[(1, 2)] = -v[0];
            }
            GroupKind::SE3 => {
                let nu = skew(&vec3(v, 0));
                let w = skew(&vec3(v, 3));
                m.view_mut((0, 0), (3, 3)).copy_from(&w);
                m.view_mut((0, 3), (3, 3)).copy_from(&nu);
                m.view_mut((3, 3), (3, 3)).copy_from(&w);
            }
        }
        m
    }

    /// `ad_ξ η = [ξ, η] = ξη − ηξ`.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.kind.check_same(other.kind)?;
        Ok(Self {
            kind: self.kind,
            coords: self.ad_matrix() * &other.coords,
        })
    }

    /// `ad*_ξ μ`, defined by `⟨ad*_ξ μ, η⟩ = ⟨μ, ad_ξ η⟩`.
    pub fn coad(&self, mu: &CoAlgebraElement<T>) -> Result<CoAlgebraElement<T>> {
        self.kind.check_same(mu.kind())?;
        Ok(CoAlgebraElement::from_coords_unchecked(
            self.kind,
            self.ad_matrix().transpose() * mu.coords(),
        ))
    }
}

/// Element of the dual algebra: coordinates against the dual basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoAlgebraElement<T: Scalar> {
    kind: GroupKind,
    coords: DVector<T>,
}

impl<T: Scalar> CoAlgebraElement<T> {
    pub fn new(kind: GroupKind, coords: &[T]) -> Result<Self> {
        Self::from_coords(kind, DVector::from_column_slice(coords))
    }

    pub fn from_coords(kind: GroupKind, coords: DVector<T>) -> Result<Self> {
        if coords.len() != kind.dim() {
            return Err(GeoError::invalid(format!(
                "{kind} dual has dimension {}, got {} coordinates",
                kind.dim(),
                coords.len()
            )));
        }
        Ok(Self { kind, coords })
    }

    pub(crate) fn from_coords_unchecked(kind: GroupKind, coords: DVector<T>) -> Self {
        Self { kind, coords }
    }

    pub fn zero(kind: GroupKind) -> Self {
        Self {
            kind,
            coords: DVector::zeros(kind.dim()),
        }
    }

    pub fn dual_basis(kind: GroupKind, k: usize) -> Self {
        let mut coords = DVector::zeros(kind.dim());
        coords[k] = T::one();
        Self { kind, coords }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn coords(&self) -> &DVector<T> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<T> {
        self.coords
    }

    /// Canonical pairing `⟨μ, ξ⟩`: the dot product of coordinates.
    pub fn pairing(&self, xi: &AlgebraElement<T>) -> Result<T> {
        self.kind.check_same(xi.kind())?;
        Ok(self.coords.dot(xi.coords()))
    }

    /// Matrix `α` with `tr(α ξ) = ⟨μ, ξ⟩` for every `ξ`.
    ///
    /// Translational duals sit in the bottom row (`E_{N,k}`), rotational duals
    /// are `−½·hat`. For se(2) this reproduces the planar dual basis
    /// `E₃₁`, `E₃₂`, `½(E₁₂ − E₂₁)` exactly.
    pub fn dual_matrix(&self) -> DMatrix<T> {
        let kind = self.kind;
        let n = kind.matrix_size();
        let half = T::lit(0.5);
        let mut m = DMatrix::zeros(n, n);
        let t = kind.translation_dim();
        for a in 0..t {
            m[(n - 1, a)] = self.coords[a];
        }
        match kind {
            GroupKind::SE2 => {
                let w = self.coords[2];
                let block = Matrix2::new(T::zero(), w * half, -w * half, T::zero());
                m.view_mut((0, 0), (2, 2)).copy_from(&block);
            }
            GroupKind::SO3 | GroupKind::SE3 => {
                let w = vec3(&self.coords, t);
                let block = -skew(&w) * half;
                m.view_mut((0, 0), (3, 3)).copy_from(&block);
            }
        }
        m
    }
}

/// Trace pairing `tr(α ξ)` between a dual matrix and an algebra element.
pub fn trace_pairing<T: Scalar>(alpha: &DMatrix<T>, xi: &AlgebraElement<T>) -> Result<T> {
    let m = xi.matrix();
    if alpha.shape() != m.shape() {
        return Err(GeoError::invalid("trace pairing of mismatched shapes"));
    }
    Ok((alpha * m).trace())
}
