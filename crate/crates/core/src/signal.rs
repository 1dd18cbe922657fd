//! Complex baseband sample streams and their on-disk `.iq` form.
//!
//! The file format is headerless little-endian interleaved `f64` I/Q pairs.
//! A sidecar text file next to it (same stem, `.meta` extension) holds
//! `f_s` and `f_c` as `key = value` lines.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    samples: Vec<Complex64>,
    f_s: f64,
}

impl BasebandSignal {
    pub fn new(samples: Vec<Complex64>, f_s: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("baseband signal must be non-empty".into()));
        }
        if !(f_s.is_finite() && f_s > 0.0) {
            return Err(Error::Validation(format!("sample rate {f_s} must be positive")));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Validation(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, f_s })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn f_s(&self) -> f64 {
        self.f_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |x[n]|² over the whole stream.
    pub fn mean_power(&self) -> f64 {
        self.energy() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Sub-range copy; `None` when the range is empty or out of bounds.
    pub fn slice(&self, start: usize, len: usize) -> Option<BasebandSignal> {
        if len == 0 || start + len > self.samples.len() {
            return None;
        }
        Some(Self { samples: self.samples[start..start + len].to_vec(), f_s: self.f_s })
    }

    /// Appends `n` zero samples.
    pub fn padded(&self, n: usize) -> BasebandSignal {
        let mut samples = self.samples.clone();
        samples.resize(samples.len() + n, Complex64::new(0.0, 0.0));
        Self { samples, f_s: self.f_s }
    }

    /// Drops the first `n` samples and zero-fills the tail so the length is unchanged.
    pub fn advanced(&self, n: usize) -> BasebandSignal {
        let len = self.samples.len();
        let mut samples: Vec<Complex64> = self.samples.iter().skip(n).copied().collect();
        samples.resize(len, Complex64::new(0.0, 0.0));
        Self { samples, f_s: self.f_s }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BasebandSignal>) -> Result<BasebandSignal> {
        let mut f_s = None;
        let mut samples = Vec::new();
        for p in parts {
            match f_s {
                None => f_s = Some(p.f_s),
                Some(r) if r != p.f_s => {
                    return Err(Error::Config(format!("cannot concatenate {r} Hz and {} Hz streams", p.f_s)))
                }
                _ => {}
            }
            samples.extend_from_slice(&p.samples);
        }
        let f_s = f_s.ok_or_else(|| Error::Validation("nothing to concatenate".into()))?;
        BasebandSignal::new(samples, f_s)
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<Complex64>, f_s: f64) -> Self {
        debug_assert!(!samples.is_empty());
        Self { samples, f_s }
    }
}

/// Path of the key-value sidecar written next to an `.iq` file.
pub fn sidecar_path(iq_path: &Path) -> PathBuf {
    iq_path.with_extension("meta")
}

pub fn write_iq(path: &Path, sig: &BasebandSignal, f_c: f64) -> Result<()> {
    let mut bytes = Vec::with_capacity(sig.len() * 16);
    for s in sig.samples() {
        bytes.extend_from_slice(&s.re.to_le_bytes());
        bytes.extend_from_slice(&s.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), format!("f_s = {}\nf_c = {}\n", sig.f_s(), f_c))?;
    Ok(())
}

/// Reads an `.iq` file and its sidecar, returning the signal and the carrier frequency.
pub fn read_iq(path: &Path) -> Result<(BasebandSignal, f64)> {
    let bytes = fs::read(path)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::Size(format!("{} bytes is not a whole number of I/Q pairs", bytes.len())));
    }
    let samples = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();

    let meta = fs::read_to_string(sidecar_path(path))?;
    let mut f_s = None;
    let mut f_c = None;
    for line in meta.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("malformed sidecar line `{line}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("non-numeric sidecar value in `{line}`")))?;
        match k.trim() {
            "f_s" => f_s = Some(v),
            "f_c" => f_c = Some(v),
            _ => {}
        }
    }
    let f_s = f_s.ok_or_else(|| Error::Validation("sidecar is missing f_s".into()))?;
    let f_c = f_c.ok_or_else(|| Error::Validation("sidecar is missing f_c".into()))?;
    Ok((BasebandSignal::new(samples, f_s)?, f_c))
}
