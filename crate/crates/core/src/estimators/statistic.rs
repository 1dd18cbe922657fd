//! Per-subcarrier offset statistic: isolate a pilot bin, strip the known
//! pilot with a matched filter, and read the phase advance over a delay of
//! `D` samples.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::ofdm::OfdmConfig;
use crate::signal::BasebandSignal;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Correlation delay `D` in samples, `0 < D < n_fft`.
    pub delay_d: usize,
    pub pilot_bins: Vec<i32>,
    /// Per-element variance of the measurement noise covariance in Hz².
    /// `None` estimates it from the least-squares residuals of the first block.
    pub noise_cov_scale: Option<f64>,
}

impl EstimatorConfig {
    /// Delay of one short training symbol over every pilot bin of `cfg`.
    pub fn for_ofdm(cfg: &OfdmConfig) -> Self {
        Self { delay_d: cfg.sts_symbol_len, pilot_bins: cfg.pilot_subcarriers.clone(), noise_cov_scale: None }
    }

    pub fn validate(&self, cfg: &OfdmConfig) -> Result<()> {
        if self.delay_d == 0 || self.delay_d >= cfg.n_fft {
            return Err(Error::Config(format!("delay {} must lie in (0, {})", self.delay_d, cfg.n_fft)));
        }
        if self.pilot_bins.len() < 2 {
            return Err(Error::Config("at least two pilot bins are needed".into()));
        }
        if let Some(k) = self.pilot_bins.iter().find(|k| !cfg.pilot_subcarriers.contains(k)) {
            return Err(Error::Config(format!("bin {k} is not a pilot subcarrier")));
        }
        if let Some(s) = self.noise_cov_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("noise covariance scale {s} must be positive")));
            }
        }
        Ok(())
    }

    /// Offsets at or beyond this magnitude alias: `1 / (2 D T_s)`.
    pub fn alias_bound_hz(&self, cfg: &OfdmConfig) -> f64 {
        cfg.f_s / (2.0 * self.delay_d as f64)
    }
}

/// One aggregate-offset reading per pilot bin, in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierStatistics {
    bins: Vec<i32>,
    u_hz: Vec<f64>,
}

impl SubcarrierStatistics {
    pub fn new(bins: Vec<i32>, u_hz: Vec<f64>) -> Result<Self> {
        if bins.len() != u_hz.len() {
            return Err(Error::Size(format!("{} bins but {} statistics", bins.len(), u_hz.len())));
        }
        if u_hz.iter().any(|u| !u.is_finite()) {
            return Err(Error::Validation("subcarrier statistic is not finite".into()));
        }
        Ok(Self { bins, u_hz })
    }

    pub fn bins(&self) -> &[i32] {
        &self.bins
    }

    pub fn u_hz(&self) -> &[f64] {
        &self.u_hz
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

/// Result of [`compute_statistic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statistic {
    pub hz: f64,
    /// The unambiguous one-sample phase rate disagrees with the delayed
    /// correlation by more than half its alias period.
    pub aliased: bool,
}

fn wrap_hz(f: f64, f_s: f64) -> f64 {
    (f + f_s / 2.0).rem_euclid(f_s) - f_s / 2.0
}

/// Keeps the part of `sig` that lies within half a pilot spacing of bin `k`
/// by masking its DFT over the whole span. Mask edges that fall exactly on a
/// DFT bin get half weight so that neighbouring masks tile the band.
pub fn isolate_subcarrier(sig: &BasebandSignal, k: i32, cfg: &OfdmConfig) -> Result<BasebandSignal> {
    if !cfg.pilot_subcarriers.contains(&k) {
        return Err(Error::Config(format!("bin {k} is not a pilot subcarrier")));
    }
    let spacing = cfg
        .pilot_subcarriers
        .iter()
        .filter(|&&j| j != k)
        .map(|&j| (j - k).unsigned_abs())
        .min()
        .unwrap_or(cfg.n_fft as u32 / 2);
    let half_width = spacing as f64 * cfg.f_s / cfg.n_fft as f64 / 2.0;
    let center = cfg.subcarrier_freq(k);

    let len = sig.len();
    let df = sig.f_s() / len as f64;
    let mut buf = sig.samples().to_vec();
    fft::forward(&mut buf);
    for (j, v) in buf.iter_mut().enumerate() {
        let d = wrap_hz(j as f64 * df - center, sig.f_s()).abs();
        let edge = 1e-9 * df;
        let w = if d < half_width - edge {
            1.0
        } else if d <= half_width + edge {
            0.5
        } else {
            0.0
        };
        *v *= w / len as f64;
    }
    fft::inverse(&mut buf);
    BasebandSignal::new(buf, sig.f_s())
}

/// `z[n] = x*[n] y[n] / |x[n]|²`.
pub fn matched_filter(y_k: &[Complex64], x_k: &[Complex64]) -> Result<Vec<Complex64>> {
    if y_k.len() != x_k.len() {
        return Err(Error::Size(format!("{} received vs {} reference samples", y_k.len(), x_k.len())));
    }
    y_k.iter()
        .zip(x_k)
        .enumerate()
        .map(|(i, (y, x))| {
            let p = x.norm_sqr();
            if p == 0.0 || !p.is_finite() {
                Err(Error::DivisionGuard { index: i })
            } else {
                Ok(x.conj() * y / p)
            }
        })
        .collect()
}

/// `U = Phase(Σ z*[n-D] z[n]) / (2π D T_s)` in Hz.
pub fn compute_statistic(z: &[Complex64], delay_d: usize, t_s: f64) -> Result<Statistic> {
    if delay_d == 0 || z.len() <= delay_d {
        return Err(Error::Size(format!("{} samples cannot support delay {delay_d}", z.len())));
    }
    let corr: Complex64 = z.iter().zip(&z[delay_d..]).map(|(a, b)| a.conj() * b).sum();
    if corr.norm() == 0.0 {
        return Err(Error::UndefinedPhase);
    }
    let hz = corr.arg() / (2.0 * PI * delay_d as f64 * t_s);
    let aliased = if delay_d > 1 {
        let one: Complex64 = z.iter().zip(&z[1..]).map(|(a, b)| a.conj() * b).sum();
        let rate = one.arg() / (2.0 * PI * t_s);
        (rate - hz).abs() > 1.0 / (2.0 * delay_d as f64 * t_s)
    } else {
        false
    };
    Ok(Statistic { hz, aliased })
}
