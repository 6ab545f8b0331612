//! Small dense linear algebra helpers on top of nalgebra: rank-revealing
//! nullspaces, principal angles, nearest rotations and condition numbers.

use nalgebra::{DMatrix, DVector};

use crate::{GeoError, Result, Scalar};

/// Singular values in descending order together with the matching right singular vectors.
///
/// The matrix is zero-padded to square first so that `V` is always complete;
/// nalgebra's thin SVD otherwise drops the nullspace directions of wide matrices.
pub fn full_svd<T: Scalar>(a: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let (m, n) = a.shape();
    let size = m.max(n);
    let mut padded = DMatrix::<T>::zeros(size, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("svd was asked for V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::<T>::zeros(n, order.len());
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &v_t.row(i).transpose());
    }
    (values, v)
}

/// Result of [`nullspace`].
#[derive(Debug, Clone)]
pub struct Nullspace<T: Scalar> {
    pub rank: usize,
    pub singular_values: Vec<T>,
    /// Orthonormal columns spanning the kernel.
    pub basis: DMatrix<T>,
}

/// Kernel of `a`, with rank decided by `σ > σ_max · rel_tol`.
pub fn nullspace<T: Scalar>(a: &DMatrix<T>, rel_tol: T) -> Nullspace<T> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return Nullspace {
            rank: 0,
            singular_values: Vec::new(),
            basis: DMatrix::identity(n, n),
        };
    }
    let (values, v) = full_svd(a);
    let sigma_max = values.first().copied().unwrap_or_else(T::zero);
    let threshold = sigma_max * rel_tol;
    let rank = if sigma_max == T::zero() {
        0
    } else {
        values.iter().take(a.nrows().min(n)).filter(|&&s| s > threshold).count()
    };
    let basis = v.columns(rank, n - rank).into_owned();
    Nullspace {
        rank,
        singular_values: values.into_iter().take(a.nrows().min(n)).collect(),
        basis,
    }
}

/// Orthonormal basis (as columns) of the row space of `a`.
pub fn row_space_basis<T: Scalar>(a: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    let ns = nullspace(a, rel_tol);
    let (_, v) = full_svd(a);
    v.columns(0, ns.rank).into_owned()
}

/// Largest principal angle (radians) between the row spaces of `a` and `b`.
///
/// Computed from the sine side, `‖(I − P_a) Q_b‖₂`, which stays accurate for
/// tiny angles where `acos` of the cosines would not. Subspaces of different
/// dimension are π/2 apart by convention.
pub fn max_principal_angle<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, rel_tol: T) -> T {
    let qa = row_space_basis(a, rel_tol);
    let qb = row_space_basis(b, rel_tol);
    if qa.ncols() != qb.ncols() {
        return T::frac_pi_2();
    }
    if qa.ncols() == 0 {
        return T::zero();
    }
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let (values, _) = full_svd(&residual);
    let s = values.first().copied().unwrap_or_else(T::zero);
    s.min(T::one()).asin()
}

/// Nearest rotation (in Frobenius norm) to a square matrix: `U·diag(1,…,det)·Vᵀ`.
pub fn nearest_rotation<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd was asked for U");
    let v_t = svd.v_t.expect("svd was asked for V");
    let mut r = &u * &v_t;
    if r.determinant() < T::zero() {
        // flip the direction of the smallest singular value
        let mut idx = 0;
        for i in 1..n {
            if svd.singular_values[i] < svd.singular_values[idx] {
                idx = i;
            }
        }
        let mut d = DMatrix::<T>::identity(n, n);
        d[(idx, idx)] = -T::one();
        r = &u * d * &v_t;
    }
    r
}

/// `σ_max / σ_min` of a square matrix; infinite when singular.
pub fn condition_number<T: Scalar>(m: &DMatrix<T>) -> T {
    let values = m.clone().singular_values();
    let mut max = T::zero();
    let mut min = T::max_value().unwrap_or_else(T::one);
    for &s in values.iter() {
        max = max.max(s);
        min = min.min(s);
    }
    if min == T::zero() {
        return T::max_value().unwrap_or_else(T::one);
    }
    max / min
}

/// Solves a symmetric positive definite system, falling back to LU when Cholesky fails.
pub fn solve_symmetric<T: Scalar>(a: &DMatrix<T>, b: &DVector<T>) -> Result<DVector<T>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| GeoError::Numeric("linear system is singular".into()))
}

/// Symmetric-part check used for metrics and Gram matrices.
pub fn max_asymmetry<T: Scalar>(a: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Canonical orthonormal basis of the column span of `q` (orthonormal columns).
///
/// Reduced row echelon form of `qᵀ` with pivots taken in `column_order` is unique
/// for the subspace; Gram-Schmidt over its rows then yields a deterministic
/// orthonormal basis independent of how `q` was produced.
pub fn canonical_basis<T: Scalar>(q: &DMatrix<T>, column_order: &[usize]) -> DMatrix<T> {
    let (n, s) = q.shape();
    if s == 0 {
        return DMatrix::zeros(n, 0);
    }
    let mut rows = q.transpose();
    let pivot_tol = T::lit(1e-6);
    let mut pivot_row = 0;
    for &col in column_order {
        if pivot_row == s {
            break;
        }
        let mut best = pivot_row;
        for r in pivot_row + 1..s {
            if rows[(r, col)].abs() > rows[(best, col)].abs() {
                best = r;
            }
        }
        if rows[(best, col)].abs() <= pivot_tol {
            continue;
        }
        rows.swap_rows(best, pivot_row);
        let p = rows[(pivot_row, col)];
        let scaled = rows.row(pivot_row) / p;
        rows.set_row(pivot_row, &scaled);
        for r in 0..s {
            if r != pivot_row {
                let f = rows[(r, col)];
                if f != T::zero() {
                    let update = rows.row(r) - rows.row(pivot_row) * f;
                    rows.set_row(r, &update);
                }
            }
        }
        pivot_row += 1;
    }
    let mut basis = DMatrix::<T>::zeros(n, s);
    for k in 0..s {
        let mut v: DVector<T> = rows.row(k).transpose();
        for prev in 0..k {
            let b = basis.column(prev);
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        basis.set_column(k, &(v / norm));
    }
    basis
}

/// Orthogonal polar factor `U Vᵀ` of a square matrix.
pub fn polar_factor<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let svd = m.clone().svd(true, true);
    svd.u.expect("svd was asked for U") * svd.v_t.expect("svd was asked for V")
}
