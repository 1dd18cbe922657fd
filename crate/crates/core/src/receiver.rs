//! Legitimate receiver: removes the aggregate offset with Moose, tracks what
//! is left on the pilots and hard-decides the data bins.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::estimators::moose_correct;
use crate::fft;
use crate::ofdm::{demap_qam, pilot_symbols, OfdmConfig};
use crate::signal::BasebandSignal;

#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub bits: Vec<u8>,
    /// Offset removed by the Moose stage, Hz.
    pub moose_offset_hz: f64,
    /// Residual offset removed from the pilots afterwards, Hz.
    pub residual_offset_hz: f64,
}

/// Samples by which each DFT window starts inside the cyclic prefix.
fn window_advance(cfg: &OfdmConfig) -> usize {
    cfg.cp_len / 2
}

fn symbol_bins(sig: &BasebandSignal, m: usize, cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    let adv = window_advance(cfg);
    let start = cfg.payload_symbol_start(m) + cfg.cp_len - adv;
    let mut buf = sig
        .slice(start, cfg.n_fft)
        .ok_or_else(|| Error::Size(format!("payload symbol {m} out of range")))?
        .into_samples();
    fft::forward_unitary(&mut buf);
    // undo the early window start: a cyclic shift by `adv`
    let n = cfg.n_fft as f64;
    for (i, v) in buf.iter_mut().enumerate() {
        let k = if i < cfg.n_fft / 2 { i as f64 } else { i as f64 - n };
        *v *= Complex64::from_polar(1.0, 2.0 * PI * k * adv as f64 / n);
    }
    Ok(buf)
}

/// `c[m][i] = Y_m(k_i) / P_m(k_i)` over the pilot bins.
fn pilot_ratios(bins: &[Vec<Complex64>], cfg: &OfdmConfig) -> Vec<Vec<Complex64>> {
    bins.iter()
        .enumerate()
        .map(|(m, y)| {
            pilot_symbols(cfg, m)
                .iter()
                .map(|&(k, p)| y[fft::bin_index(k, cfg.n_fft)] / p)
                .collect()
        })
        .collect()
}

/// Least-squares line through `(m, y[m])`, returned as `(intercept, slope)`.
fn fit_line(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    if y.len() < 2 {
        return (y.first().copied().unwrap_or(0.0), 0.0);
    }
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = (0..y.len()).map(|i| (i as f64 - xm).powi(2)).sum();
    let sxy: f64 = y.iter().enumerate().map(|(i, v)| (i as f64 - xm) * (v - ym)).sum();
    let slope = sxy / sxx;
    (ym - slope * xm, slope)
}

fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(phases.len());
    let mut offset = 0.0f64;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let d = p + offset - out[i - 1];
            offset -= 2.0 * PI * (d / (2.0 * PI)).round();
        }
        out.push(p + offset);
    }
    out
}

/// Recovers the payload bits of an aligned frame holding `n_symbols` data symbols.
pub fn demodulate_frame(sig: &BasebandSignal, cfg: &OfdmConfig, n_symbols: usize) -> Result<Demodulated> {
    cfg.validate()?;
    if n_symbols == 0 {
        return Err(Error::Validation("a frame needs at least one payload symbol".into()));
    }
    let needed = cfg.payload_symbol_start(n_symbols);
    if sig.len() < needed {
        return Err(Error::Size(format!("{} samples, frame needs {needed}", sig.len())));
    }
    let (corrected, moose_offset_hz) = moose_correct(sig, cfg)?;
    let t_sym = cfg.symbol_len() as f64 * cfg.sample_period();

    // residual common offset from the pilot phasors of consecutive symbols
    let first: Vec<Vec<Complex64>> = (0..n_symbols).map(|m| symbol_bins(&corrected, m, cfg)).collect::<Result<_>>()?;
    let common: Vec<Complex64> = pilot_ratios(&first, cfg).iter().map(|c| c.iter().sum()).collect();
    let lag: Complex64 = common.windows(2).map(|w| w[0].conj() * w[1]).sum();
    let residual_offset_hz = if lag.norm() > 0.0 { lag.arg() / (2.0 * PI * t_sym) } else { 0.0 };
    let bins = if residual_offset_hz != 0.0 {
        let tracked = dsp::mix(&corrected, -residual_offset_hz);
        (0..n_symbols).map(|m| symbol_bins(&tracked, m, cfg)).collect::<Result<Vec<_>>>()?
    } else {
        first
    };
    let ratios = pilot_ratios(&bins, cfg);

    // phase slope across bins, per symbol, from neighbouring pilot pairs
    let pilots = &cfg.pilot_subcarriers;
    let stride = pilots.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(1);
    let slopes: Vec<f64> = ratios
        .iter()
        .map(|c| {
            let acc: Complex64 = (1..pilots.len())
                .filter(|&i| pilots[i] - pilots[i - 1] == stride)
                .map(|i| c[i - 1].conj() * c[i])
                .sum();
            acc.arg() / stride as f64
        })
        .collect();
    let (s0, s1) = fit_line(&slopes);
    let slope_at = |m: usize| s0 + s1 * m as f64;

    let phases: Vec<f64> = ratios
        .iter()
        .enumerate()
        .map(|(m, c)| {
            pilots
                .iter()
                .zip(c)
                .map(|(&k, v)| v * Complex64::from_polar(1.0, -slope_at(m) * k as f64))
                .sum::<Complex64>()
                .arg()
        })
        .collect();
    let (p0, p1) = fit_line(&unwrap(&phases));
    let gain = ratios
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let rot = Complex64::from_polar(1.0, -(p0 + p1 * m as f64));
            pilots
                .iter()
                .zip(c)
                .map(|(&k, v)| (v * rot * Complex64::from_polar(1.0, -slope_at(m) * k as f64)).re)
                .sum::<f64>()
                / pilots.len() as f64
        })
        .sum::<f64>()
        / n_symbols as f64;
    if gain.is_nan() || gain <= 0.0 {
        return Err(Error::Numerical(format!("pilot gain estimate {gain} is not positive")));
    }

    let data = cfg.data_subcarriers();
    let mut bits = Vec::with_capacity(n_symbols * cfg.bits_per_ofdm_symbol());
    for (m, y) in bins.iter().enumerate() {
        let eq: Vec<Complex64> = data
            .iter()
            .map(|&k| {
                let h = Complex64::from_polar(gain, p0 + p1 * m as f64 + slope_at(m) * k as f64);
                y[fft::bin_index(k, cfg.n_fft)] / h
            })
            .collect();
        bits.extend(demap_qam(&eq, cfg.qam_order)?);
    }
    Ok(Demodulated { bits, moose_offset_hz, residual_offset_hz })
}
