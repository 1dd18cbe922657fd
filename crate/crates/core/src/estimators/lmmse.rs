//! Recursive LMMSE refinement of `z = [f_CFO, v]` over successive measurement
//! blocks `p[m] = A z + w[m]`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LmmseState {
    pub z_hat: Vector2<f64>,
    pub c_m: Matrix2<f64>,
    pub m: usize,
}

impl LmmseState {
    pub fn trace(&self) -> f64 {
        self.c_m.trace()
    }
}

fn is_symmetric(c: &Matrix2<f64>) -> bool {
    let scale = c[(0, 0)].abs().max(c[(1, 1)].abs()).max(f64::MIN_POSITIVE);
    (c[(0, 1)] - c[(1, 0)]).abs() <= 1e-12 * scale
}

pub fn lmmse_init(prior_z: Vector2<f64>, prior_cov: Matrix2<f64>) -> Result<LmmseState> {
    if prior_z.iter().chain(prior_cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Validation("prior must be finite".into()));
    }
    if !is_symmetric(&prior_cov) {
        return Err(Error::Validation("prior covariance is not symmetric".into()));
    }
    if prior_cov.cholesky().is_none() {
        return Err(Error::Validation("prior covariance is not positive definite".into()));
    }
    Ok(LmmseState { z_hat: prior_z, c_m: prior_cov, m: 0 })
}

/// One step of
///
/// ```text
/// K_m  = C_{m-1} Aᵀ (A C_{m-1} Aᵀ + C_w)⁻¹
/// ẑ[m] = ẑ[m-1] + K_m (p[m] - A ẑ[m-1])
/// C_m  = (I - K_m A) C_{m-1}
/// ```
///
/// The gain is evaluated as `(C_{m-1}⁻¹ + Aᵀ C_w⁻¹ A)⁻¹ Aᵀ C_w⁻¹`, the same
/// matrix by the inversion lemma, which stays well conditioned when a diffuse
/// prior meets precise measurements.
pub fn lmmse_update(state: &LmmseState, p_m: &DVector<f64>, a: &DMatrix<f64>, c_w: &DMatrix<f64>) -> Result<LmmseState> {
    let n = p_m.len();
    if a.nrows() != n || a.ncols() != 2 || c_w.nrows() != n || c_w.ncols() != n {
        return Err(Error::Size(format!(
            "measurement of {n}, design {}x{}, noise covariance {}x{}",
            a.nrows(),
            a.ncols(),
            c_w.nrows(),
            c_w.ncols()
        )));
    }
    let cw_chol = c_w
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Validation("noise covariance is not positive definite".into()))?;
    let prior_info = state
        .c_m
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("state covariance is singular: {:?}", state.c_m.as_slice())))?;
    // Aᵀ C_w⁻¹ as a 2×n matrix
    let at_rinv = cw_chol.solve(a).transpose();
    let data_info = &at_rinv * a;
    let info = prior_info + Matrix2::new(data_info[(0, 0)], data_info[(0, 1)], data_info[(1, 0)], data_info[(1, 1)]);
    let info = Matrix2::new(info[(0, 0)], 0.5 * (info[(0, 1)] + info[(1, 0)]), 0.5 * (info[(0, 1)] + info[(1, 0)]), info[(1, 1)]);
    let chol = info.cholesky().ok_or_else(|| {
        let eig = info.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        Error::Numerical(format!(
            "innovation covariance is singular (information eigenvalues in [{lo:e}, {hi:e}], condition {:e})",
            hi.abs() / lo.abs().max(f64::MIN_POSITIVE)
        ))
    })?;
    let c_m = chol.inverse();
    let c_dyn = DMatrix::from_column_slice(2, 2, c_m.as_slice());
    let gain = c_dyn * at_rinv;
    let z_prev = DVector::from_column_slice(state.z_hat.as_slice());
    let innovation = p_m - a * &z_prev;
    let z = z_prev + &gain * innovation;
    let off = 0.5 * (c_m[(0, 1)] + c_m[(1, 0)]);
    let c_m = Matrix2::new(c_m[(0, 0)], off, off, c_m[(1, 1)]);
    if z.iter().chain(c_m.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("LMMSE update produced non-finite values".into()));
    }
    Ok(LmmseState { z_hat: Vector2::new(z[0], z[1]), c_m, m: state.m + 1 })
}
