use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real scalar the numerics are generic over: `f32` or `f64`.
///
/// Besides the field operations, each scalar carries the handful of tolerances
/// the library uses to validate inputs. They are pinned for `f64`; the `f32`
/// values are scaled to what single precision can actually hold.
pub trait Scalar: RealField + Copy + ToPrimitive {
    /// Max `‖RᵀR − I‖_F` (and `|det R − 1|`) accepted as-is.
    fn orthogonality_tol() -> Self;
    /// Max orthogonality error that is silently re-projected; beyond it input is rejected.
    fn reprojection_tol() -> Self;
    /// Below this norm the exponential switches to its Taylor series.
    fn series_threshold() -> Self;
    /// Max `|φ|` for a configuration to count as lying on the constraint set.
    fn feasibility_tol() -> Self;

    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn orthogonality_tol() -> Self {
        1e-10
    }
    fn reprojection_tol() -> Self {
        1e-6
    }
    fn series_threshold() -> Self {
        1e-8
    }
    fn feasibility_tol() -> Self {
        1e-6
    }
    fn lit(x: f64) -> Self {
        x
    }
}

impl Scalar for f32 {
    fn orthogonality_tol() -> Self {
        1e-5
    }
    fn reprojection_tol() -> Self {
        1e-3
    }
    fn series_threshold() -> Self {
        1e-4
    }
    fn feasibility_tol() -> Self {
        1e-3
    }
    fn lit(x: f64) -> Self {
        x as f32
    }
}
