//! OFDM waveform construction and demodulation.
//!
//! Frames are an STS preamble followed by CP-prefixed payload symbols whose
//! pilot bins carry fixed-seed pseudo-random QPSK known to every receiver.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::BasebandSignal;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Seed of the pilot sequence shared by transmitter and receivers.
pub const PILOT_SEED: u64 = 0x5EED_0FD0_971E;

/// 802.11 short-training values (before the √(13/6) scale) on bins
/// -24, -20, ..., -4, 4, ..., 24.
const STS_PATTERN: [(f64, f64); 12] = [
    (1.0, 1.0),
    (-1.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (-1.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (-1.0, -1.0),
    (1.0, 1.0),
    (1.0, 1.0),
    (1.0, 1.0),
    (1.0, 1.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub n_fft: usize,
    /// Signed bin indices, ascending.
    pub used_subcarriers: Vec<i32>,
    /// Signed bin indices, ascending, subset of `used_subcarriers`.
    pub pilot_subcarriers: Vec<i32>,
    pub f_c: f64,
    pub f_s: f64,
    pub cp_len: usize,
    pub qam_order: usize,
    pub sts_repeats: usize,
    pub sts_symbol_len: usize,
}

impl Default for OfdmConfig {
    /// 20 MHz 802.11a/ac-style channel at 5.2 GHz: 52 used bins, 12 pilots at the STS bins.
    fn default() -> Self {
        let used = (-26..=26).filter(|&k| k != 0).collect();
        let pilots = (-24..=24).step_by(4).filter(|&k| k != 0).collect();
        Self {
            n_fft: 64,
            used_subcarriers: used,
            pilot_subcarriers: pilots,
            f_c: 5.2e9,
            f_s: 20e6,
            cp_len: 16,
            qam_order: 4,
            sts_repeats: 10,
            sts_symbol_len: 16,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 {
            return Err(Error::Config(format!("n_fft {} is too small", self.n_fft)));
        }
        if !(self.f_s > 0.0 && self.f_s.is_finite() && self.f_c > 0.0 && self.f_c.is_finite()) {
            return Err(Error::Config("f_s and f_c must be positive".into()));
        }
        let half = (self.n_fft / 2) as i32;
        for w in self.used_subcarriers.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Config("used subcarriers must be strictly ascending".into()));
            }
        }
        if let Some(k) = self.used_subcarriers.iter().find(|&&k| k < -half || k >= half) {
            return Err(Error::Config(format!("subcarrier {k} outside [-{half}, {half})")));
        }
        if let Some(k) = self.pilot_subcarriers.iter().find(|k| !self.used_subcarriers.contains(k)) {
            return Err(Error::Config(format!("pilot {k} is not a used subcarrier")));
        }
        if self.pilot_subcarriers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("pilot subcarriers must be strictly ascending".into()));
        }
        if self.cp_len >= self.n_fft {
            return Err(Error::Config("cyclic prefix must be shorter than the symbol".into()));
        }
        if !matches!(self.qam_order, 2 | 4 | 16 | 64) {
            return Err(Error::Config(format!("unsupported QAM order {}", self.qam_order)));
        }
        if self.sts_repeats < 2 {
            return Err(Error::Config("STS needs at least two repeats".into()));
        }
        if self.sts_symbol_len == 0 || !self.n_fft.is_multiple_of(self.sts_symbol_len) {
            return Err(Error::Config("sts_symbol_len must divide n_fft".into()));
        }
        let stride = (self.n_fft / self.sts_symbol_len) as i32;
        if let Some(k) = self.pilot_subcarriers.iter().find(|&&k| k % stride != 0) {
            return Err(Error::Config(format!(
                "pilot {k} is not periodic over {} samples",
                self.sts_symbol_len
            )));
        }
        Ok(())
    }

    /// Baseband frequency of signed bin `k` in Hz.
    pub fn subcarrier_freq(&self, k: i32) -> f64 {
        self.f_s * k as f64 / self.n_fft as f64
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.f_s
    }

    /// Useful-symbol duration `n_fft / f_s`.
    pub fn symbol_duration(&self) -> f64 {
        self.n_fft as f64 / self.f_s
    }

    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.cp_len
    }

    pub fn sts_len(&self) -> usize {
        self.sts_repeats * self.sts_symbol_len
    }

    pub fn data_subcarriers(&self) -> Vec<i32> {
        self.used_subcarriers
            .iter()
            .copied()
            .filter(|k| !self.pilot_subcarriers.contains(k))
            .collect()
    }

    pub fn bits_per_qam_symbol(&self) -> usize {
        self.qam_order.trailing_zeros() as usize
    }

    pub fn bits_per_ofdm_symbol(&self) -> usize {
        self.data_subcarriers().len() * self.bits_per_qam_symbol()
    }

    /// Offset of payload symbol `m` (start of its cyclic prefix) within a frame.
    pub fn payload_symbol_start(&self, m: usize) -> usize {
        self.sts_len() + m * self.symbol_len()
    }
}

/// Frequency-domain content of one OFDM symbol in natural DFT order.
///
/// Symbols built for transmission via [`FrequencyDomainSymbol::from_bins`] have
/// every unused bin exactly zero; demodulated symbols carry whatever the
/// received signal put there.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDomainSymbol {
    bins: Vec<Complex64>,
}

impl FrequencyDomainSymbol {
    pub fn new(bins: Vec<Complex64>) -> Self {
        Self { bins }
    }

    /// Places `values` on the given signed bins of an otherwise empty symbol.
    pub fn from_bins(n_fft: usize, values: impl IntoIterator<Item = (i32, Complex64)>) -> Self {
        let mut bins = vec![Complex64::new(0.0, 0.0); n_fft];
        for (k, v) in values {
            bins[fft::bin_index(k, n_fft)] = v;
        }
        Self { bins }
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn get(&self, k: i32) -> Complex64 {
        self.bins[fft::bin_index(k, self.bins.len())]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub sts: BasebandSignal,
    pub payload_symbols: Vec<BasebandSignal>,
    /// Known pilot value per (payload symbol index, pilot bin).
    pub pilot_reference: BTreeMap<(usize, i32), Complex64>,
    pub payload_bits: Vec<u8>,
}

impl Frame {
    /// STS followed by every payload symbol as one contiguous stream.
    pub fn to_signal(&self) -> BasebandSignal {
        BasebandSignal::concat(std::iter::once(&self.sts).chain(&self.payload_symbols))
            .expect("frame parts share one sample rate")
    }
}

fn qam_axis_bits(qam_order: usize) -> Result<(usize, usize)> {
    match qam_order {
        2 => Ok((1, 0)),
        4 => Ok((1, 1)),
        16 => Ok((2, 2)),
        64 => Ok((3, 3)),
        _ => Err(Error::Config(format!("unsupported QAM order {qam_order}"))),
    }
}

fn qam_scale(qam_order: usize) -> f64 {
    if qam_order == 2 {
        1.0
    } else {
        (2.0 * (qam_order as f64 - 1.0) / 3.0).sqrt()
    }
}

/// Gray-coded PAM level for `bits` (MSB first): the all-zero word maps to the
/// largest positive level, and neighbouring levels differ in one bit.
fn pam_level(bits: &[u8]) -> f64 {
    let levels = 1usize << bits.len();
    let mut gray = 0usize;
    for &b in bits {
        gray = (gray << 1) | (b & 1) as usize;
    }
    let mut index = 0usize;
    let mut g = gray;
    while g != 0 {
        index ^= g;
        g >>= 1;
    }
    (levels as f64 - 1.0) - 2.0 * index as f64
}

fn pam_decide(value: f64, nbits: usize, out: &mut Vec<u8>) {
    let levels = 1usize << nbits;
    let top = levels as f64 - 1.0;
    let index = (((top - value) / 2.0).round()).clamp(0.0, top) as usize;
    let gray = index ^ (index >> 1);
    for i in (0..nbits).rev() {
        out.push(((gray >> i) & 1) as u8);
    }
}

/// Maps bits onto a unit-average-power Gray constellation.
pub fn map_bits_to_qam(bits: &[u8], qam_order: usize) -> Result<Vec<Complex64>> {
    let (bi, bq) = qam_axis_bits(qam_order)?;
    let per = bi + bq;
    if !bits.len().is_multiple_of(per) {
        return Err(Error::Size(format!(
            "{} bits is not a multiple of {per} bits per {qam_order}-QAM symbol",
            bits.len()
        )));
    }
    let scale = qam_scale(qam_order);
    Ok(bits
        .chunks_exact(per)
        .map(|c| {
            let re = pam_level(&c[..bi]);
            let im = if bq > 0 { pam_level(&c[bi..]) } else { 0.0 };
            Complex64::new(re, im) / scale
        })
        .collect())
}

/// Hard-decision inverse of [`map_bits_to_qam`].
pub fn demap_qam(symbols: &[Complex64], qam_order: usize) -> Result<Vec<u8>> {
    let (bi, bq) = qam_axis_bits(qam_order)?;
    let scale = qam_scale(qam_order);
    let mut out = Vec::with_capacity(symbols.len() * (bi + bq));
    for s in symbols {
        let s = s * scale;
        pam_decide(s.re, bi, &mut out);
        if bq > 0 {
            pam_decide(s.im, bq, &mut out);
        }
    }
    Ok(out)
}

/// Unitary IDFT of one symbol: `x[n] = (1/√N) Σ X[k] e^{j2πnk/N}`.
pub fn ofdm_modulate(sym: &FrequencyDomainSymbol, cfg: &OfdmConfig) -> Result<BasebandSignal> {
    if sym.bins.len() != cfg.n_fft {
        return Err(Error::Size(format!("symbol has {} bins, expected {}", sym.bins.len(), cfg.n_fft)));
    }
    let mut buf = sym.bins.clone();
    fft::inverse_unitary(&mut buf);
    Ok(BasebandSignal::from_parts_unchecked(buf, cfg.f_s))
}

/// Unitary DFT of a CP-stripped symbol.
pub fn ofdm_demodulate(sig: &BasebandSignal, cfg: &OfdmConfig) -> Result<FrequencyDomainSymbol> {
    if sig.len() != cfg.n_fft {
        return Err(Error::Size(format!("signal has {} samples, expected {}", sig.len(), cfg.n_fft)));
    }
    let mut buf = sig.samples().to_vec();
    fft::forward_unitary(&mut buf);
    Ok(FrequencyDomainSymbol { bins: buf })
}

pub fn add_cyclic_prefix(sig: &BasebandSignal, cp_len: usize) -> Result<BasebandSignal> {
    let s = sig.samples();
    if cp_len >= s.len() {
        return Err(Error::Size(format!("cyclic prefix {cp_len} is not shorter than {} samples", s.len())));
    }
    let mut out = Vec::with_capacity(s.len() + cp_len);
    out.extend_from_slice(&s[s.len() - cp_len..]);
    out.extend_from_slice(s);
    Ok(BasebandSignal::from_parts_unchecked(out, sig.f_s()))
}

/// Frequency-domain STS values on the pilot bins, scaled so the preamble
/// carries the same power as a fully loaded data symbol.
pub fn sts_spectrum(cfg: &OfdmConfig) -> Vec<(i32, Complex64)> {
    let n_active = cfg.pilot_subcarriers.len() as f64;
    let scale = (cfg.used_subcarriers.len() as f64 / (2.0 * n_active)).sqrt();
    cfg.pilot_subcarriers
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (re, im) = STS_PATTERN[i % STS_PATTERN.len()];
            (k, Complex64::new(re, im) * scale)
        })
        .collect()
}

/// One short training symbol, periodic with `sts_symbol_len` samples.
pub fn short_symbol(cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let sym = FrequencyDomainSymbol::from_bins(cfg.n_fft, sts_spectrum(cfg));
    let full = ofdm_modulate(&sym, cfg)?;
    Ok(full.samples()[..cfg.sts_symbol_len].to_vec())
}

/// `sts_repeats` back-to-back copies of the short training symbol.
pub fn build_sts(cfg: &OfdmConfig) -> Result<BasebandSignal> {
    let short = short_symbol(cfg)?;
    let samples: Vec<Complex64> = short.iter().copied().cycle().take(cfg.sts_len()).collect();
    BasebandSignal::new(samples, cfg.f_s)
}

/// Known QPSK pilots of payload symbol `m`, one per pilot bin in ascending order.
pub fn pilot_symbols(cfg: &OfdmConfig, m: usize) -> Vec<(i32, Complex64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(PILOT_SEED);
    rng.set_stream(m as u64);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    cfg.pilot_subcarriers
        .iter()
        .map(|&k| {
            let re = if rng.random::<bool>() { -r } else { r };
            let im = if rng.random::<bool>() { -r } else { r };
            (k, Complex64::new(re, im))
        })
        .collect()
}

pub fn build_frame(cfg: &OfdmConfig, payload_bits: &[u8], n_symbols: usize) -> Result<Frame> {
    cfg.validate()?;
    let per_symbol = cfg.bits_per_ofdm_symbol();
    if payload_bits.len() != per_symbol * n_symbols {
        return Err(Error::Size(format!(
            "{} payload bits supplied, {n_symbols} symbols need {}",
            payload_bits.len(),
            per_symbol * n_symbols
        )));
    }
    let data_bins = cfg.data_subcarriers();
    let sts = build_sts(cfg)?;
    let mut pilot_reference = BTreeMap::new();
    let mut payload_symbols = Vec::with_capacity(n_symbols);
    for m in 0..n_symbols {
        let bits = &payload_bits[m * per_symbol..(m + 1) * per_symbol];
        let data = map_bits_to_qam(bits, cfg.qam_order)?;
        let pilots = pilot_symbols(cfg, m);
        for &(k, p) in &pilots {
            pilot_reference.insert((m, k), p);
        }
        let sym = FrequencyDomainSymbol::from_bins(
            cfg.n_fft,
            data_bins.iter().copied().zip(data).chain(pilots),
        );
        let time = ofdm_modulate(&sym, cfg)?;
        payload_symbols.push(add_cyclic_prefix(&time, cfg.cp_len)?);
    }
    Ok(Frame { sts, payload_symbols, pilot_reference, payload_bits: payload_bits.to_vec() })
}
