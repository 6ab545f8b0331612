use nalgebra::{DMatrix, DVector};

use super::{AlgebraElement, GroupElement, GroupKind};
use crate::{GeoError, Result, Scalar};

/// Element of `G^r`: one configuration per agent, all on the same group.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductElement<T: Scalar> {
    kind: GroupKind,
    agents: Vec<GroupElement<T>>,
}

impl<T: Scalar> ProductElement<T> {
    pub fn new(agents: Vec<GroupElement<T>>) -> Result<Self> {
        let first = agents
            .first()
            .ok_or_else(|| GeoError::invalid("a product needs at least one factor"))?;
        let kind = first.kind();
        for g in &agents {
            kind.check_same(g.kind())?;
        }
        Ok(Self { kind, agents })
    }

    pub fn identity(kind: GroupKind, r: usize) -> Self {
        Self {
            kind,
            agents: vec![GroupElement::identity(kind); r],
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[GroupElement<T>] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &GroupElement<T> {
        &self.agents[i]
    }

    pub fn into_agents(self) -> Vec<GroupElement<T>> {
        self.agents
    }

    /// Dimension of `𝔤^r`.
    pub fn algebra_dim(&self) -> usize {
        self.kind.dim() * self.agents.len()
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(GeoError::invalid("product factors differ in length"));
        }
        let agents = self
            .agents
            .iter()
            .zip(&other.agents)
            .map(|(a, b)| a.compose(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind: self.kind, agents })
    }

    pub fn inverse(&self) -> Self {
        Self {
            kind: self.kind,
            agents: self.agents.iter().map(GroupElement::inverse).collect(),
        }
    }

    /// Applies `a·g_i` to every factor.
    pub fn left_translate_all(&self, a: &GroupElement<T>) -> Result<Self> {
        let agents = self
            .agents
            .iter()
            .map(|g| a.compose(g))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind: self.kind, agents })
    }

    /// `g·exp(ξ)` factorwise for a stacked algebra vector.
    pub fn right_exp(&self, stacked: &DVector<T>) -> Result<Self> {
        let xi = ProductAlgebraElement::from_stacked(self.kind, self.len(), stacked)?;
        let agents = self
            .agents
            .iter()
            .zip(xi.components())
            .map(|(g, x)| g.compose(&GroupElement::exp(x)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind: self.kind, agents })
    }

    /// Block-diagonal matrix of `Ad_g` across the factors.
    pub fn adjoint_matrix(&self) -> DMatrix<T> {
        let n = self.kind.dim();
        let mut m = DMatrix::zeros(self.algebra_dim(), self.algebra_dim());
        for (i, g) in self.agents.iter().enumerate() {
            m.view_mut((i * n, i * n), (n, n)).copy_from(&g.adjoint_matrix());
        }
        m
    }

    /// Largest rotation-block orthogonality error over the factors.
    pub fn orthogonality_error(&self) -> T {
        self.agents
            .iter()
            .map(GroupElement::orthogonality_error)
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Element of `𝔤^r` with the componentwise bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductAlgebraElement<T: Scalar> {
    kind: GroupKind,
    components: Vec<AlgebraElement<T>>,
}

impl<T: Scalar> ProductAlgebraElement<T> {
    pub fn new(components: Vec<AlgebraElement<T>>) -> Result<Self> {
        let kind = components
            .first()
            .ok_or_else(|| GeoError::invalid("a product needs at least one factor"))?
            .kind();
        for c in &components {
            kind.check_same(c.kind())?;
        }
        Ok(Self { kind, components })
    }

    pub fn zero(kind: GroupKind, r: usize) -> Self {
        Self {
            kind,
            components: vec![AlgebraElement::zero(kind); r],
        }
    }

    /// Splits a stacked coordinate vector `(ξ₁, …, ξ_r)`.
    pub fn from_stacked(kind: GroupKind, r: usize, stacked: &DVector<T>) -> Result<Self> {
        let n = kind.dim();
        if stacked.len() != n * r {
            return Err(GeoError::invalid(format!(
                "stacked algebra vector has length {}, expected {}",
                stacked.len(),
                n * r
            )));
        }
        let components = (0..r)
            .map(|i| {
                AlgebraElement::from_coords_unchecked(kind, stacked.rows(i * n, n).into_owned())
            })
            .collect();
        Ok(Self { kind, components })
    }

    pub fn stacked(&self) -> DVector<T> {
        let n = self.kind.dim();
        let mut v = DVector::zeros(n * self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            v.rows_mut(i * n, n).copy_from(c.coords());
        }
        v
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn components(&self) -> &[AlgebraElement<T>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn bracket(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(GeoError::invalid("product factors differ in length"));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.bracket(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind: self.kind, components })
    }
}
