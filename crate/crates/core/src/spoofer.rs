//! Transmitter-side Doppler spoofing.
//!
//! The artificial Doppler for a speed difference `Δv` must move subcarrier
//! `k` by `(f_c + f_k) Δv / c`. A fixed filter cannot do that, so the shift
//! itself comes from a fractional resampler (`1 + Δv/c`) followed by a
//! carrier mixer (`f_c Δv / c`). The Doppler spoofing filter (DSF) is the
//! linear-phase Kaiser FIR in front of them: unity gain over the used band
//! plus the largest allowed shift, and a constant group delay that the
//! receiving side can undo by an integer advance.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::ofdm::{OfdmConfig, SPEED_OF_LIGHT};
use crate::signal::BasebandSignal;

pub const DEFAULT_DSF_ORDER: usize = 64;
pub const DEFAULT_KAISER_BETA: f64 = 5.0;
/// Largest allowed passband deviation from 0 dB.
pub const PASSBAND_RIPPLE_DB: f64 = 0.1;

/// Largest aggregate offset the legitimate receiver can correct: the alias
/// bound of a correlation over one short training symbol, `f_s / (2 L_sts)`.
pub fn lrx_tolerance_hz(cfg: &OfdmConfig) -> f64 {
    cfg.f_s / (2.0 * cfg.sts_symbol_len as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpoofParams {
    /// Speed the eavesdropper should infer, m/s.
    pub v_sp: f64,
    /// Real speed when the transmitter knows it; `None` selects the simple scheme.
    pub v_re_known: Option<f64>,
}

impl SpoofParams {
    /// Speed difference that the transmitter has to synthesise.
    pub fn artificial_speed(&self) -> f64 {
        self.v_sp - self.v_re_known.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsfDesign {
    pub order: usize,
    pub kaiser_beta: f64,
    /// Passband edge as a fraction of `f_s`.
    pub passband_edge: f64,
    /// Cutoff of the underlying ideal lowpass as a fraction of `f_s`.
    pub cutoff: f64,
    /// Worst passband deviation from 0 dB.
    pub ripple_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsfFilter {
    taps: Vec<f64>,
    group_delay: usize,
    design: DsfDesign,
}

impl DsfFilter {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Delay in samples introduced by the filter.
    pub fn group_delay(&self) -> usize {
        self.group_delay
    }

    pub fn design(&self) -> &DsfDesign {
        &self.design
    }

    /// `H(f)` at a normalised frequency `f/f_s`.
    pub fn response(&self, f_norm: f64) -> Complex64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(n, &h)| Complex64::from_polar(h, -2.0 * PI * f_norm * n as f64))
            .sum()
    }

    pub fn magnitude_db(&self, f_norm: f64) -> f64 {
        20.0 * self.response(f_norm).norm().log10()
    }

    /// Frequency response on `points` equally spaced frequencies in
    /// `[0, 0.5)`: `(f/f_s, |H| in dB, unwrapped phase in rad)`.
    pub fn response_table(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = Vec::with_capacity(points);
        let mut prev_raw = 0.0;
        let mut offset = 0.0;
        for i in 0..points {
            let f = 0.5 * i as f64 / points as f64;
            let h = self.response(f);
            let raw = h.arg();
            if i > 0 {
                let d = raw - prev_raw;
                if d > PI {
                    offset -= 2.0 * PI;
                } else if d < -PI {
                    offset += 2.0 * PI;
                }
            }
            prev_raw = raw;
            out.push((f, 20.0 * h.norm().log10(), raw + offset));
        }
        out
    }

    /// Largest deviation of the passband phase from its least-squares line, in rad.
    pub fn passband_phase_residual(&self, points: usize) -> f64 {
        let rows: Vec<(f64, f64)> = self
            .response_table(points)
            .into_iter()
            .filter(|r| r.0 <= self.design.passband_edge)
            .map(|r| (r.0, r.2))
            .collect();
        let n = rows.len() as f64;
        let mx = rows.iter().map(|r| r.0).sum::<f64>() / n;
        let my = rows.iter().map(|r| r.1).sum::<f64>() / n;
        let sxy: f64 = rows.iter().map(|r| (r.0 - mx) * (r.1 - my)).sum();
        let sxx: f64 = rows.iter().map(|r| (r.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        rows.iter()
            .map(|r| (r.1 - (my + slope * (r.0 - mx))).abs())
            .fold(0.0, f64::max)
    }

    /// One tap per line, full precision.
    pub fn taps_text(&self) -> String {
        self.taps.iter().map(|t| format!("{t:e}\n")).collect()
    }

    /// Undo the filter delay on a stream that was padded with at least
    /// `group_delay` trailing samples before filtering.
    pub fn align(&self, sig: &BasebandSignal) -> BasebandSignal {
        sig.advanced(self.group_delay)
    }
}

/// Passband edge needed by `cfg`: the outermost used subcarrier's bin edge
/// shifted by the largest correctable offset.
fn required_passband(cfg: &OfdmConfig) -> f64 {
    let outer = cfg.used_subcarriers.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0) as f64;
    (outer * cfg.f_s / cfg.n_fft as f64 + lrx_tolerance_hz(cfg)) / cfg.f_s
}

/// Kaiser-windowed sinc lowpass of `order + 1` symmetric taps.
pub fn design_dsf(cfg: &OfdmConfig, order: usize, kaiser_beta: f64) -> Result<DsfFilter> {
    cfg.validate()?;
    if order < 8 {
        return Err(Error::Validation(format!("DSF order {order} is below the minimum of 8")));
    }
    if !(kaiser_beta >= 0.0 && kaiser_beta.is_finite()) {
        return Err(Error::Validation(format!("Kaiser beta {kaiser_beta} must be non-negative")));
    }
    let passband_edge = required_passband(cfg);
    if passband_edge >= 0.5 {
        return Err(Error::Design { ripple_db: f64::INFINITY, limit_db: PASSBAND_RIPPLE_DB });
    }
    // Kaiser's design relations: attenuation implied by beta, then transition width.
    let atten_db = if kaiser_beta > 4.5513 {
        kaiser_beta / 0.1102 + 8.7
    } else {
        21.0 + 15.0 * kaiser_beta.max(0.0).sqrt()
    };
    let transition = (atten_db - 7.95) / (14.36 * order as f64);
    let cutoff = (passband_edge + transition / 2.0).min(0.5 - 1e-6);

    let window = dsp::kaiser_window(order + 1, kaiser_beta);
    let center = order as f64 / 2.0;
    let mut taps: Vec<f64> = window
        .iter()
        .enumerate()
        .map(|(n, w)| {
            let x = n as f64 - center;
            let ideal = if x == 0.0 { 2.0 * cutoff } else { (2.0 * PI * cutoff * x).sin() / (PI * x) };
            w * ideal
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    // enforce exact symmetry after the floating point normalisation
    for i in 0..taps.len() / 2 {
        let j = taps.len() - 1 - i;
        let m = 0.5 * (taps[i] + taps[j]);
        taps[i] = m;
        taps[j] = m;
    }

    let mut filter = DsfFilter {
        taps,
        group_delay: order / 2,
        design: DsfDesign { order, kaiser_beta, passband_edge, cutoff, ripple_db: 0.0 },
    };
    let grid = 2048;
    let ripple_db = (0..=grid)
        .map(|i| passband_edge * i as f64 / grid as f64)
        .chain(cfg.used_subcarriers.iter().map(|&k| (k as f64 / cfg.n_fft as f64).abs()))
        .map(|f| filter.magnitude_db(f).abs())
        .fold(0.0, f64::max);
    if ripple_db > PASSBAND_RIPPLE_DB || !ripple_db.is_finite() {
        return Err(Error::Design { ripple_db, limit_db: PASSBAND_RIPPLE_DB });
    }
    filter.design.ripple_db = ripple_db;
    Ok(filter)
}

fn check_tolerance(v_total: f64, cfg: &OfdmConfig) -> Result<()> {
    let bound = lrx_tolerance_hz(cfg);
    let worst = cfg
        .used_subcarriers
        .iter()
        .map(|&k| ((cfg.f_c + cfg.subcarrier_freq(k)) * v_total / SPEED_OF_LIGHT).abs())
        .fold(0.0, f64::max);
    if worst > bound {
        return Err(Error::Tolerance { offset_hz: worst, bound_hz: bound });
    }
    Ok(())
}

/// Embeds artificial Doppler so that an estimator reads `v_sp`.
///
/// The output is delayed by the filter's group delay; see [`DsfFilter::align`].
pub fn apply_spoof(
    sig: &BasebandSignal,
    sp: &SpoofParams,
    cfg: &OfdmConfig,
    filter: &DsfFilter,
) -> Result<BasebandSignal> {
    if sig.f_s() != cfg.f_s {
        return Err(Error::Config(format!("signal at {} Hz, config at {} Hz", sig.f_s(), cfg.f_s)));
    }
    if !sp.v_sp.is_finite() || sp.v_re_known.is_some_and(|v| !v.is_finite()) {
        return Err(Error::Validation("spoofing speeds must be finite".into()));
    }
    check_tolerance(sp.v_sp, cfg)?;
    let beta = sp.artificial_speed() / SPEED_OF_LIGHT;
    let filtered = dsp::fir_filter(sig, &filter.taps);
    let stretched = dsp::resample(&filtered, 1.0 + beta);
    Ok(dsp::mix(&stretched, cfg.f_c * beta))
}

/// Spoofing without knowledge of the real speed: the eavesdropper then sees `v_sp + v_re`.
pub fn simple_spoof(sig: &BasebandSignal, v_sp: f64, cfg: &OfdmConfig, filter: &DsfFilter) -> Result<BasebandSignal> {
    apply_spoof(sig, &SpoofParams { v_sp, v_re_known: None }, cfg, filter)
}
