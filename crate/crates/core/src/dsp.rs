//! Small DSP building blocks shared by the channel and the spoofer:
//! Kaiser windows, a windowed-sinc fractional resampler and a complex mixer.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::signal::BasebandSignal;

/// Taps of the fractional resampler kernel.
pub const RESAMPLER_TAPS: usize = 32;
const RESAMPLER_BETA: f64 = 6.0;

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window of `len` points with shape parameter `beta`.
pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    let m = (len - 1) as f64;
    (0..len)
        .map(|n| {
            let r = 2.0 * n as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn interp_kernel(u: f64, norm: f64) -> f64 {
    let half = (RESAMPLER_TAPS / 2) as f64;
    let r = u / half;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    sinc(u) * bessel_i0(RESAMPLER_BETA * (1.0 - r * r).sqrt()) / norm
}

/// Evaluates `out[n] = x(n · factor)` by windowed-sinc interpolation, keeping
/// the input length. Samples outside the input are treated as zero.
///
/// A factor of `1 + v/c` turns every tone at `f` into `f · (1 + v/c)`.
pub fn resample(sig: &BasebandSignal, factor: f64) -> BasebandSignal {
    let x = sig.samples();
    if factor == 1.0 {
        return sig.clone();
    }
    let norm = bessel_i0(RESAMPLER_BETA);
    let half = (RESAMPLER_TAPS / 2) as i64;
    let len = x.len() as i64;
    let out: Vec<Complex64> = (0..x.len())
        .map(|n| {
            let t = n as f64 * factor;
            let base = t.floor();
            let mu = t - base;
            let base = base as i64;
            if mu == 0.0 {
                return if (0..len).contains(&base) { x[base as usize] } else { Complex64::new(0.0, 0.0) };
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (1 - half)..=half {
                let idx = base + j;
                if idx < 0 || idx >= len {
                    continue;
                }
                acc += x[idx as usize] * interp_kernel(j as f64 - mu, norm);
            }
            acc
        })
        .collect();
    BasebandSignal::from_parts_unchecked(out, sig.f_s())
}

/// Multiplies by `e^{j2π f n / f_s}`.
pub fn mix(sig: &BasebandSignal, freq_hz: f64) -> BasebandSignal {
    if freq_hz == 0.0 {
        return sig.clone();
    }
    let step = freq_hz / sig.f_s();
    let out = sig
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| s * Complex64::from_polar(1.0, 2.0 * PI * (step * n as f64).fract()))
        .collect();
    BasebandSignal::from_parts_unchecked(out, sig.f_s())
}

/// Causal FIR filtering, output truncated to the input length.
pub fn fir_filter(sig: &BasebandSignal, taps: &[f64]) -> BasebandSignal {
    let x = sig.samples();
    let out = (0..x.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .take(n + 1)
                .map(|(i, &h)| x[n - i] * h)
                .sum()
        })
        .collect();
    BasebandSignal::from_parts_unchecked(out, sig.f_s())
}
