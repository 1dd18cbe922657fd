//! Aggregate frequency offset from the repeated short training symbols.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::ofdm::OfdmConfig;
use crate::signal::BasebandSignal;

/// Smallest `|Σ s*[n] s[n+L]| / Σ |s[n+L]|²` accepted as a training sequence.
pub const MOOSE_DETECTION_RATIO: f64 = 0.25;

/// Offset estimate and detection ratio over the STS span.
pub(crate) fn sts_offset(sig: &BasebandSignal, cfg: &OfdmConfig) -> Result<(f64, f64)> {
    let l = cfg.sts_symbol_len;
    let span = cfg.sts_len();
    if sig.len() < span {
        return Err(Error::Size(format!("{} samples do not cover a {span}-sample STS", sig.len())));
    }
    let s = &sig.samples()[..span];
    let corr: Complex64 = s.iter().zip(&s[l..]).map(|(a, b)| a.conj() * b).sum();
    let energy: f64 = s[l..].iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 || corr.norm() == 0.0 {
        return Err(Error::NoFrame { ratio: 0.0 });
    }
    let offset = corr.arg() / (2.0 * PI * l as f64 * cfg.sample_period());
    Ok((offset, corr.norm() / energy))
}

/// Estimates the single offset that the legitimate receiver removes and
/// de-rotates the whole frame by it.
pub fn moose_correct(frame_sig: &BasebandSignal, cfg: &OfdmConfig) -> Result<(BasebandSignal, f64)> {
    let (offset, ratio) = sts_offset(frame_sig, cfg)?;
    if ratio < MOOSE_DETECTION_RATIO {
        return Err(Error::NoFrame { ratio });
    }
    Ok((dsp::mix(frame_sig, -offset), offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, ChannelParams};
    use crate::ofdm::{build_sts, SPEED_OF_LIGHT};
    use crate::spoofer::{design_dsf, simple_spoof, DEFAULT_DSF_ORDER, DEFAULT_KAISER_BETA};

    fn cfg() -> OfdmConfig {
        OfdmConfig::default()
    }

    fn rotate(sig: &BasebandSignal, f: f64) -> BasebandSignal {
        let v = sig
            .samples()
            .iter()
            .enumerate()
            .map(|(n, x)| x * Complex64::from_polar(1.0, 2.0 * PI * f * n as f64 / sig.f_s()))
            .collect();
        BasebandSignal::new(v, sig.f_s()).unwrap()
    }

    #[test]
    fn pure_cfo_is_recovered_and_removed() {
        let c = cfg();
        let sts = build_sts(&c).unwrap();
        let (out, f) = moose_correct(&rotate(&sts, 1e5), &c).unwrap();
        assert!((f - 1e5).abs() < 1e-6 * 1e5, "{f}");
        let worst = out
            .samples()
            .iter()
            .zip(sts.samples())
            .map(|(a, b)| (a * b.conj()).arg())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn zero_offset() {
        let c = cfg();
        let (_, f) = moose_correct(&build_sts(&c).unwrap(), &c).unwrap();
        assert!(f.abs() < 1e-6);
    }

    #[test]
    fn real_plus_spoofed_reads_the_aggregate() {
        let c = cfg();
        let sts = build_sts(&c).unwrap();
        let dsf = design_dsf(&c, DEFAULT_DSF_ORDER, DEFAULT_KAISER_BETA).unwrap();
        let v = 250e3 * SPEED_OF_LIGHT / c.f_c;
        let spoofed = dsf.align(&simple_spoof(&sts.padded(dsf.group_delay()), v, &c, &dsf).unwrap());
        let rx = apply_channel(&spoofed, &ChannelParams { v_re: v, ..Default::default() }, &c).unwrap();
        let (_, f) = moose_correct(&rx, &c).unwrap();
        assert!((f - 500e3).abs() < 2e3, "{f}");
    }

    #[test]
    fn noise_only_is_not_a_frame() {
        let c = cfg();
        let noise: Vec<Complex64> = (0..c.sts_len())
            .map(|n| Complex64::from_polar(1.0, (n as f64 * 2.399).sin() * 40.0))
            .collect();
        let sig = BasebandSignal::new(noise, c.f_s).unwrap();
        assert!(matches!(moose_correct(&sig, &c), Err(Error::NoFrame { .. })));
        let short = BasebandSignal::new(vec![Complex64::new(1.0, 0.0); 10], c.f_s).unwrap();
        assert!(matches!(moose_correct(&short, &c), Err(Error::Size(_))));
    }
}
