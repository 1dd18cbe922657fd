//! Welch power spectral density and the frequency displacement between two spectra.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::BasebandSignal;

/// 19.53 kHz bins at 20 MHz.
pub const WELCH_SEGMENT: usize = 1024;

/// Two-sided density in power per Hz, frequencies ascending from `-f_s/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs_hz: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution_hz(&self) -> f64 {
        self.freqs_hz[1] - self.freqs_hz[0]
    }

    pub fn density_db(&self) -> Vec<f64> {
        self.density.iter().map(|p| 10.0 * p.max(f64::MIN_POSITIVE).log10()).collect()
    }

    /// Total power, the integral of the density.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.resolution_hz()
    }

    /// Outermost frequencies where the density stays within `drop_db` of the
    /// median of the occupied band, with linear interpolation between bins.
    pub fn band_edges(&self, drop_db: f64) -> Result<(f64, f64)> {
        let db = self.density_db();
        let peak = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut occupied: Vec<f64> = db.iter().cloned().filter(|v| *v > peak - 20.0).collect();
        occupied.sort_by(|a, b| a.total_cmp(b));
        let level = occupied[occupied.len() / 2] - drop_db;
        let first = db.iter().position(|v| *v >= level).ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
        let last = db.iter().rposition(|v| *v >= level).ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
        let cross = |i: usize, j: usize| {
            let (a, b) = (db[i], db[j]);
            let t = if a == b { 0.0 } else { (level - a) / (b - a) };
            self.freqs_hz[i] + t * (self.freqs_hz[j] - self.freqs_hz[i])
        };
        let lo = if first == 0 { self.freqs_hz[0] } else { cross(first - 1, first) };
        let hi = if last + 1 == db.len() { self.freqs_hz[last] } else { cross(last, last + 1) };
        Ok((lo, hi))
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Welch estimate with a periodic Hann window and 50 % overlap.
pub fn welch_psd(sig: &BasebandSignal, nperseg: usize) -> Result<Psd> {
    if nperseg < 2 || sig.len() < nperseg {
        return Err(Error::Size(format!("{} samples cannot fill a {nperseg}-sample segment", sig.len())));
    }
    let w = hann(nperseg);
    let norm = sig.f_s() * w.iter().map(|v| v * v).sum::<f64>();
    let step = nperseg / 2;
    let x = sig.samples();
    let mut acc = vec![0.0; nperseg];
    let mut count = 0usize;
    let mut start = 0;
    while start + nperseg <= x.len() {
        let mut buf: Vec<Complex64> = x[start..start + nperseg].iter().zip(&w).map(|(s, wi)| s * wi).collect();
        fft::forward(&mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let df = sig.f_s() / nperseg as f64;
    let half = nperseg / 2;
    let (freqs_hz, density) = (0..nperseg)
        .map(|j| {
            // ascending order: indices half.., then 0..half
            let i = (j + half) % nperseg;
            let f = if i >= half { i as f64 - nperseg as f64 } else { i as f64 } * df;
            (f, acc[i] / (norm * count as f64))
        })
        .unzip();
    Ok(Psd { freqs_hz, density })
}

/// Shift that best aligns `b` onto `a` (positive when `b` lies higher),
/// from the peak of the cross-correlation of the two densities refined by a
/// parabola through its three highest lags.
pub fn band_displacement(a: &Psd, b: &Psd, max_shift_hz: f64) -> Result<f64> {
    if a.freqs_hz != b.freqs_hz {
        return Err(Error::Size("spectra use different frequency grids".into()));
    }
    let df = a.resolution_hz();
    let n = a.density.len() as i64;
    let max_lag = ((max_shift_hz / df).ceil() as i64).min(n - 1);
    let corr = |lag: i64| -> f64 {
        (0..n)
            .filter_map(|i| {
                let j = i + lag;
                (0..n).contains(&j).then(|| a.density[i as usize] * b.density[j as usize])
            })
            .sum()
    };
    let values: Vec<(i64, f64)> = (-max_lag..=max_lag).map(|l| (l, corr(l))).collect();
    let (best, _) = values
        .iter()
        .cloned()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| Error::Numerical("no lags to search".into()))?;
    let at = |l: i64| values.iter().find(|v| v.0 == l).map(|v| v.1);
    let frac = match (at(best - 1), at(best), at(best + 1)) {
        (Some(ym), Some(y0), Some(yp)) => {
            let den = ym - 2.0 * y0 + yp;
            if den < 0.0 { 0.5 * (ym - yp) / den } else { 0.0 }
        }
        _ => 0.0,
    };
    Ok((best as f64 + frac) * df)
}
