//! Joint CFO / speed least squares over the pilot statistics.
//!
//! Every pilot obeys `U_k = f_CFO + (f_c + f_k) v / c`. The two columns of
//! that system are nearly parallel (`f_k ≪ f_c`), so the solve works with the
//! speed column scaled by `c / f_c` and centred, which is the closed form of
//! the 2×2 normal equations.

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::ofdm::{OfdmConfig, SPEED_OF_LIGHT};

use super::statistic::SubcarrierStatistics;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub f_cfo_hat: f64,
    /// m/s
    pub v_hat: f64,
    /// Norm of the measurement residual, Hz.
    pub residual_norm: f64,
    /// Error covariance of `(f_CFO, v)` in Hz², Hz·m/s and (m/s)².
    pub covariance: Matrix2<f64>,
}

impl EstimateResult {
    /// Carrier Doppler `f_c v̂ / c` implied by the speed estimate.
    pub fn doppler_hz(&self, cfg: &OfdmConfig) -> f64 {
        cfg.f_c * self.v_hat / SPEED_OF_LIGHT
    }

    /// Total offset seen at the carrier, `f̂_CFO + f_c v̂ / c`.
    pub fn aggregate_hz(&self, cfg: &OfdmConfig) -> f64 {
        self.f_cfo_hat + self.doppler_hz(cfg)
    }
}

/// Rows `[1, (f_c + f_k)/c]` in pilot order.
pub fn design_matrix(bins: &[i32], cfg: &OfdmConfig) -> DMatrix<f64> {
    DMatrix::from_fn(bins.len(), 2, |r, c| {
        if c == 0 {
            1.0
        } else {
            (cfg.f_c + cfg.subcarrier_freq(bins[r])) / SPEED_OF_LIGHT
        }
    })
}

/// Rows `[1, 1 + f_k/f_c]`: the design matrix with the speed column
/// expressed as carrier Doppler in Hz.
pub(crate) fn scaled_design_matrix(bins: &[i32], cfg: &OfdmConfig) -> DMatrix<f64> {
    DMatrix::from_fn(bins.len(), 2, |r, c| if c == 0 { 1.0 } else { 1.0 + cfg.subcarrier_freq(bins[r]) / cfg.f_c })
}

/// Maps a covariance over `(f_CFO, f_c v/c)` to one over `(f_CFO, v)`.
pub(crate) fn unscale_covariance(c: &Matrix2<f64>, cfg: &OfdmConfig) -> Matrix2<f64> {
    let j = Matrix2::new(1.0, 0.0, 0.0, SPEED_OF_LIGHT / cfg.f_c);
    j * c * j.transpose()
}

/// Solution in scaled coordinates `(f_CFO, f_c v/c)` plus residual sum of
/// squares and the unit-variance covariance `(AᵀA)⁻¹`.
pub(crate) fn solve_scaled(bins: &[i32], u: &[f64], cfg: &OfdmConfig) -> Result<(Vector2<f64>, f64, Matrix2<f64>)> {
    let n = bins.len();
    if n < 2 || n != u.len() {
        return Err(Error::DegenerateGeometry(format!("{n} pilot bins cannot determine two unknowns")));
    }
    let eps: Vec<f64> = bins.iter().map(|&k| cfg.subcarrier_freq(k) / cfg.f_c).collect();
    let nf = n as f64;
    let e_mean = eps.iter().sum::<f64>() / nf;
    let u_mean = u.iter().sum::<f64>() / nf;
    let see: f64 = eps.iter().map(|e| (e - e_mean).powi(2)).sum();
    let spread_hz = (see / nf).sqrt() * cfg.f_c;
    if spread_hz < 1e-9 * cfg.f_s {
        return Err(Error::DegenerateGeometry("all pilot frequencies coincide".into()));
    }
    let seu: f64 = eps.iter().zip(u).map(|(e, v)| (e - e_mean) * (v - u_mean)).sum();
    let b = seu / see;
    let a = u_mean - b * (1.0 + e_mean);
    let rss: f64 = eps.iter().zip(u).map(|(e, v)| (v - a - b * (1.0 + e)).powi(2)).sum();
    let g = 1.0 + e_mean;
    let unit = Matrix2::new(1.0 / nf + g * g / see, -g / see, -g / see, 1.0 / see);
    Ok((Vector2::new(a, b), rss, unit))
}

/// Least-squares `(f_CFO, v)` from one set of pilot statistics.
pub fn solve_joint_ls(stats: &SubcarrierStatistics, cfg: &OfdmConfig) -> Result<EstimateResult> {
    let (z, rss, unit) = solve_scaled(stats.bins(), stats.u_hz(), cfg)?;
    let dof = stats.len().saturating_sub(2);
    let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    Ok(EstimateResult {
        f_cfo_hat: z[0],
        v_hat: z[1] * SPEED_OF_LIGHT / cfg.f_c,
        residual_norm: rss.sqrt(),
        covariance: unscale_covariance(&(unit * sigma2), cfg),
    })
}
