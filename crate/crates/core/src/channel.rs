//! Flat Rician channel with motion-induced wideband Doppler, carrier
//! frequency offset and AWGN.
//!
//! Doppler is applied to the waveform itself: the received stream is the
//! transmitted one read at `t · (1 + v/c)` and mixed up by `f_c · v/c`, so a
//! subcarrier at `f_k` lands at `f_k + (f_c + f_k) · v/c`. Positive speed
//! means the transmitter is approaching.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dsp;
use crate::error::{Error, Result};
use crate::ofdm::{OfdmConfig, SPEED_OF_LIGHT};
use crate::signal::BasebandSignal;

const STREAM_PHASE: u64 = 0;
const STREAM_SCATTER: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// Radial speed that produces a carrier Doppler of `doppler_hz`.
pub fn speed_for_doppler(doppler_hz: f64, f_c: f64) -> f64 {
    doppler_hz * SPEED_OF_LIGHT / f_c
}

/// Carrier Doppler in Hz produced by radial speed `v`.
pub fn doppler_for_speed(v: f64, f_c: f64) -> f64 {
    f_c * v / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Rician K (linear). `f64::INFINITY` removes the scattered component.
    pub k_factor: f64,
    /// Total received power (linear).
    pub p_r: f64,
    /// Radial speed in m/s, positive when approaching.
    pub v_re: f64,
    pub f_cfo: f64,
    /// Initial path length in metres.
    pub r_0: f64,
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { k_factor: 1e6, p_r: 1.0, v_re: 0.0, f_cfo: 0.0, r_0: 0.0, snr_db: f64::INFINITY, seed: 0 }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_factor.is_nan() || self.k_factor < 0.0 {
            return Err(Error::Validation(format!("Rician K {} must be >= 0", self.k_factor)));
        }
        if !(self.p_r > 0.0 && self.p_r.is_finite()) {
            return Err(Error::Validation(format!("received power {} must be positive", self.p_r)));
        }
        if !self.v_re.is_finite() || !self.f_cfo.is_finite() || !self.r_0.is_finite() {
            return Err(Error::Validation("speed, CFO and path length must be finite".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Validation("SNR is NaN".into()));
        }
        Ok(())
    }

    /// (LOS power, scattered power); they sum to `p_r`.
    pub fn power_split(&self) -> (f64, f64) {
        if self.k_factor.is_infinite() {
            (self.p_r, 0.0)
        } else {
            let los = self.k_factor * self.p_r / (self.k_factor + 1.0);
            (los, self.p_r - los)
        }
    }
}

/// Static part of one channel draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    /// LOS coefficient including `√(K P_r/(K+1))`, `e^{jφ}` and the `e^{-j2π f_c R_0/c}` path term.
    pub h: Complex64,
    pub phi: f64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn draw_realization(params: &ChannelParams, cfg: &OfdmConfig) -> Result<ChannelRealization> {
    params.validate()?;
    let phi = rng_for(params.seed, STREAM_PHASE).random_range(0.0..2.0 * PI);
    let (los, _) = params.power_split();
    let path = -2.0 * PI * (cfg.f_c * params.r_0 / SPEED_OF_LIGHT).fract();
    Ok(ChannelRealization { h: Complex64::from_polar(los.sqrt(), phi + path), phi })
}

fn gains(params: &ChannelParams, n: usize, cfg: &OfdmConfig, doppler_hz: f64) -> Result<Vec<Complex64>> {
    let real = draw_realization(params, cfg)?;
    let (_, scatter) = params.power_split();
    let path = Complex64::from_polar(1.0, -2.0 * PI * (cfg.f_c * params.r_0 / SPEED_OF_LIGHT).fract());
    let mut rng = rng_for(params.seed, STREAM_SCATTER);
    let step = doppler_hz / cfg.f_s;
    Ok((0..n)
        .map(|i| {
            let los = real.h * Complex64::from_polar(1.0, 2.0 * PI * (step * i as f64).fract());
            if scatter > 0.0 {
                los + path * complex_gaussian(&mut rng) * scatter.sqrt()
            } else {
                los
            }
        })
        .collect())
}

/// Per-sample complex gain: a LOS phasor rotating at `f_c v/c` plus an
/// independent complex Gaussian scatter term per sample.
pub fn draw_rician_gain(params: &ChannelParams, n: usize, cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::Size("gain sequence length must be at least 1".into()));
    }
    gains(params, n, cfg, doppler_for_speed(params.v_re, cfg.f_c))
}

fn awgn_with(sig: &BasebandSignal, snr_db: f64, signal_power: f64, rng: &mut ChaCha8Rng) -> Result<BasebandSignal> {
    if signal_power.is_nan() || signal_power <= 0.0 {
        return Err(Error::Validation(format!("signal power {signal_power} must be positive")));
    }
    if snr_db == f64::INFINITY {
        return Ok(sig.clone());
    }
    let sigma = (signal_power / 10f64.powf(snr_db / 10.0)).sqrt();
    let out = sig.samples().iter().map(|s| s + complex_gaussian(rng) * sigma).collect();
    BasebandSignal::new(out, sig.f_s())
}

/// Adds circular complex Gaussian noise of variance `signal_power / 10^(snr_db/10)`.
pub fn add_awgn(sig: &BasebandSignal, snr_db: f64, signal_power: f64, seed: u64) -> Result<BasebandSignal> {
    awgn_with(sig, snr_db, signal_power, &mut rng_for(seed, STREAM_NOISE))
}

/// Applies gain, wideband Doppler, CFO and noise. Noise is scaled against
/// `p_r` times the mean input power.
pub fn apply_channel(sig: &BasebandSignal, params: &ChannelParams, cfg: &OfdmConfig) -> Result<BasebandSignal> {
    params.validate()?;
    if sig.f_s() != cfg.f_s {
        return Err(Error::Config(format!("signal at {} Hz, config at {} Hz", sig.f_s(), cfg.f_s)));
    }
    let beta = params.v_re / SPEED_OF_LIGHT;
    let stretched = dsp::resample(sig, 1.0 + beta);
    let g = gains(params, sig.len(), cfg, 0.0)?;
    let faded: Vec<Complex64> = stretched.samples().iter().zip(&g).map(|(x, h)| x * h).collect();
    let faded = BasebandSignal::new(faded, sig.f_s())?;
    let shifted = dsp::mix(&faded, params.f_cfo + cfg.f_c * beta);
    let power = params.p_r * sig.mean_power();
    if power == 0.0 {
        return Ok(shifted);
    }
    awgn_with(&shifted, params.snr_db, power, &mut rng_for(params.seed, STREAM_NOISE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{build_frame, FrequencyDomainSymbol, ofdm_modulate};
    use rand::Rng;

    fn cfg() -> OfdmConfig {
        OfdmConfig::default()
    }

    fn bin_tone(k: i32, n: usize) -> BasebandSignal {
        BasebandSignal::new(
            (0..n).map(|i| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * i as f64 / 64.0)).collect(),
            20e6,
        )
        .unwrap()
    }

    /// Frequency of the strongest DTFT component, refined by golden-section search.
    fn peak_freq(x: &[Complex64], fs: f64, lo: f64, hi: f64) -> f64 {
        let mag = |f: f64| {
            x.iter()
                .enumerate()
                .map(|(n, v)| v * Complex64::from_polar(1.0, -2.0 * PI * f * n as f64 / fs))
                .sum::<Complex64>()
                .norm()
        };
        // grid scan first so the bracket holds the main lobe only
        let steps = 200;
        let df = (hi - lo) / steps as f64;
        let best = (0..=steps)
            .map(|i| lo + i as f64 * df)
            .max_by(|a, b| mag(*a).partial_cmp(&mag(*b)).unwrap())
            .unwrap();
        let (mut a, mut b) = (best - df, best + df);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if mag(c) > mag(d) {
                b = d;
            } else {
                a = c;
            }
        }
        (a + b) / 2.0
    }

    #[test]
    fn power_split_sums_to_total() {
        for k in [0.0, 0.5, 10.0, 1e12, f64::INFINITY] {
            let p = ChannelParams { k_factor: k, p_r: 2.5, ..Default::default() };
            let (a, b) = p.power_split();
            assert_eq!(a + b, 2.5);
        }
    }

    #[test]
    fn validation() {
        assert!(ChannelParams { k_factor: -1.0, ..Default::default() }.validate().is_err());
        assert!(ChannelParams { p_r: 0.0, ..Default::default() }.validate().is_err());
        assert!(draw_rician_gain(&ChannelParams::default(), 0, &cfg()).is_err());
    }

    #[test]
    fn los_only_static_gain_is_constant() {
        let p = ChannelParams { k_factor: 1e12, p_r: 4.0, seed: 7, ..Default::default() };
        let g = draw_rician_gain(&p, 1000, &cfg()).unwrap();
        for v in &g {
            assert!((v.norm() - 2.0).abs() < 1e-5);
            assert!((v - g[0]).norm() < 1e-5);
        }
    }

    #[test]
    fn rayleigh_variance() {
        let p = ChannelParams { k_factor: 0.0, p_r: 3.0, seed: 1, ..Default::default() };
        let g = draw_rician_gain(&p, 100_000, &cfg()).unwrap();
        let mean: Complex64 = g.iter().sum::<Complex64>() / g.len() as f64;
        let var = g.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / g.len() as f64;
        assert!((var - 3.0).abs() < 0.05 * 3.0, "var={var}");
    }

    #[test]
    fn rician_power_and_split() {
        let p = ChannelParams { k_factor: 10.0, p_r: 1.0, seed: 2, ..Default::default() };
        let g = draw_rician_gain(&p, 100_000, &cfg()).unwrap();
        let power = g.iter().map(|v| v.norm_sqr()).sum::<f64>() / g.len() as f64;
        assert!((power - 1.0).abs() < 0.02);
        // LOS is the sample mean (no Doppler here), scatter is what is left
        let los: Complex64 = g.iter().sum::<Complex64>() / g.len() as f64;
        let scatter = g.iter().map(|v| (v - los).norm_sqr()).sum::<f64>() / g.len() as f64;
        let ratio = los.norm_sqr() / scatter;
        assert!((ratio - 10.0).abs() < 0.3, "ratio={ratio}");
    }

    #[test]
    fn gain_rotates_at_doppler() {
        let c = cfg();
        let v = speed_for_doppler(1e5, c.f_c);
        let p = ChannelParams { k_factor: f64::INFINITY, v_re: v, seed: 3, ..Default::default() };
        let g = draw_rician_gain(&p, 200, &c).unwrap();
        for w in g.windows(2) {
            let dphi = (w[1] * w[0].conj()).arg();
            assert!((dphi - 2.0 * PI * 1e5 / 20e6).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_gain_power_over_realizations() {
        let c = cfg();
        let n = 20_000;
        let mean = (0..n)
            .map(|s| {
                let p = ChannelParams { k_factor: 3.0, p_r: 2.0, seed: s, ..Default::default() };
                draw_rician_gain(&p, 1, &c).unwrap()[0].norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() < 0.04, "mean={mean}");
    }

    #[test]
    fn phase_draw_is_uniform() {
        // one-sample Kolmogorov-Smirnov against U(0, 2π)
        let c = cfg();
        let n = 10_000;
        let mut phis: Vec<f64> = (0..n)
            .map(|s| draw_realization(&ChannelParams { seed: s, ..Default::default() }, &c).unwrap().phi)
            .collect();
        phis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = phis
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let f = p / (2.0 * PI);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // critical value at the 1% level
        let crit = 1.628 / (n as f64).sqrt();
        assert!(d < crit, "D={d} crit={crit}");
    }

    #[test]
    fn all_impairments_off_is_phase_only() {
        let c = cfg();
        let x = bin_tone(5, 500);
        let p = ChannelParams { k_factor: 1e12, seed: 4, ..Default::default() };
        let y = apply_channel(&x, &p, &c).unwrap();
        let real = draw_realization(&p, &c).unwrap();
        for (a, b) in y.samples().iter().zip(x.samples()) {
            assert!((a - b * Complex64::from_polar(1.0, real.phi)).norm() < 1e-5);
        }
    }

    #[test]
    fn mismatched_rate_is_config_error() {
        let x = BasebandSignal::new(vec![Complex64::new(1.0, 0.0); 10], 10e6).unwrap();
        assert!(matches!(apply_channel(&x, &ChannelParams::default(), &cfg()), Err(Error::Config(_))));
    }

    #[test]
    fn cfo_phase_slope() {
        let c = cfg();
        let x = bin_tone(3, 400);
        let p = ChannelParams { k_factor: f64::INFINITY, f_cfo: 1e5, ..Default::default() };
        let y = apply_channel(&x, &p, &c).unwrap();
        let z: Vec<Complex64> = y.samples().iter().zip(x.samples()).map(|(a, b)| a * b.conj()).collect();
        for w in z.windows(2) {
            assert!(((w[1] * w[0].conj()).arg() - 2.0 * PI * 1e5 / 20e6).abs() < 1e-9);
        }
    }

    #[test]
    fn wideband_doppler_moves_tone_peak() {
        let c = cfg();
        let v = speed_for_doppler(250e3, c.f_c);
        let n = 1 << 14;
        for k in [0, 10, -24] {
            let x = bin_tone(k, n);
            let p = ChannelParams { k_factor: f64::INFINITY, v_re: v, ..Default::default() };
            let y = apply_channel(&x, &p, &c).unwrap();
            let fk = c.subcarrier_freq(k);
            let expected = fk + 250e3 + fk * v / SPEED_OF_LIGHT;
            let got = peak_freq(&y.samples()[..n - 64], 20e6, expected - 5e3, expected + 5e3);
            assert!((got - expected).abs() < 20.0, "k={k} got={got} expected={expected}");
        }
    }

    #[test]
    fn doppler_is_energy_preserving_before_noise() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bits: Vec<u8> = (0..80 * 40).map(|_| rng.random_range(0..2)).collect();
        let x = build_frame(&c, &bits, 40).unwrap().to_signal().padded(64);
        let p = ChannelParams {
            k_factor: f64::INFINITY,
            p_r: 1.0,
            v_re: speed_for_doppler(300e3, c.f_c),
            f_cfo: 20e3,
            ..Default::default()
        };
        let y = apply_channel(&x, &p, &c).unwrap();
        let rel = (y.energy() - x.energy()).abs() / x.energy();
        assert!(rel < 1e-3, "rel={rel}");
    }

    #[test]
    fn aggregate_offset_on_pilot_tone() {
        let c = cfg();
        let v = speed_for_doppler(150e3, c.f_c);
        let f_cfo = 40e3;
        let k = 24;
        let n = 1 << 14;
        let sym = FrequencyDomainSymbol::from_bins(64, [(k, Complex64::new(8.0, 0.0))]);
        let one = ofdm_modulate(&sym, &c).unwrap();
        let x = BasebandSignal::new(one.samples().iter().copied().cycle().take(n).collect(), 20e6).unwrap();
        let p = ChannelParams { k_factor: 1e6, v_re: v, f_cfo, snr_db: 30.0, seed: 5, ..Default::default() };
        let y = apply_channel(&x, &p, &c).unwrap();
        let fk = c.subcarrier_freq(k);
        let expected = fk + f_cfo + (c.f_c + fk) * v / SPEED_OF_LIGHT;
        let got = peak_freq(&y.samples()[..n - 64], 20e6, fk, fk + 400e3);
        // within one FFT bin of the observation
        assert!((got - expected).abs() < 20e6 / n as f64, "got={got} expected={expected}");
    }

    #[test]
    fn awgn_identity_and_power() {
        let x = BasebandSignal::new(vec![Complex64::new(0.0, 0.0); 100_000], 20e6).unwrap();
        assert_eq!(add_awgn(&x, f64::INFINITY, 1.0, 0).unwrap(), x);
        let y = add_awgn(&x, 0.0, 1.0, 1).unwrap();
        assert!((y.mean_power() - 1.0).abs() < 0.02);
        let i_pow = y.samples().iter().map(|v| v.re * v.re).sum::<f64>() / 1e5;
        assert!((i_pow - 0.5).abs() < 0.02);
        assert!(add_awgn(&x, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn awgn_measured_snr() {
        let x = BasebandSignal::new(vec![Complex64::new(1.0, 0.0); 100_000], 20e6).unwrap();
        let y = add_awgn(&x, 10.0, 1.0, 2).unwrap();
        let noise = y.samples().iter().map(|v| (v - Complex64::new(1.0, 0.0)).norm_sqr()).sum::<f64>() / 1e5;
        let snr = 10.0 * (1.0 / noise).log10();
        assert!((snr - 10.0).abs() < 0.2, "snr={snr}");
    }
}
