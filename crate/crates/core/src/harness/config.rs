//! `key = value` text form of an [`ExperimentSpec`].
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated;
//! Doppler pairs are written `real:artificial`. Speeds can be given in m/s
//! or as carrier Doppler in Hz; the canonical form written back uses m/s so
//! that parsing it reproduces the spec exactly.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::channel::speed_for_doppler;
use crate::error::{Error, Result};
use crate::spoofer::SpoofParams;

use super::{ExperimentKind, ExperimentSpec};

fn bad(key: &str, value: &str) -> Error {
    Error::Validation(format!("cannot parse `{key} = {value}`"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v)).collect()
}

fn pairs(key: &str, value: &str) -> Result<Vec<(f64, f64)>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| bad(key, value))?;
            Ok((num(key, a)?, num(key, b)?))
        })
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ber" => Ok(Self::Ber),
            "periodogram" => Ok(Self::Periodogram),
            "estimate" => Ok(Self::Estimate),
            "filter-report" => Ok(Self::FilterReport),
            other => Err(Error::Validation(format!("unknown experiment kind `{other}`"))),
        }
    }
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ber => "ber",
            Self::Periodogram => "periodogram",
            Self::Estimate => "estimate",
            Self::FilterReport => "filter-report",
        }
    }
}

/// Parses config text on top of the defaults for `kind`. A `kind` key in the
/// text, when present, must agree with `kind`.
pub fn parse_config(text: &str, kind: ExperimentKind) -> Result<ExperimentSpec> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("line {}: expected `key = value`", lineno + 1)))?;
        let k = k.trim().to_string();
        if entries.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Validation(format!("line {}: duplicate key `{k}`", lineno + 1)));
        }
    }

    let mut spec = ExperimentSpec::new(kind);
    let take = |e: &mut BTreeMap<String, String>, k: &str| e.remove(k);

    if let Some(v) = take(&mut entries, "kind") {
        let k: ExperimentKind = v.parse()?;
        if k != kind {
            return Err(Error::Validation(format!("config is for `{}`, not `{}`", k.as_str(), kind.as_str())));
        }
    }

    // waveform first: speed conversions below need f_c
    let cfg = &mut spec.cfg;
    if let Some(v) = take(&mut entries, "n_fft") {
        cfg.n_fft = num("n_fft", &v)?;
    }
    if let Some(v) = take(&mut entries, "used_subcarriers") {
        cfg.used_subcarriers = list("used_subcarriers", &v)?;
    }
    if let Some(v) = take(&mut entries, "pilot_subcarriers") {
        cfg.pilot_subcarriers = list("pilot_subcarriers", &v)?;
        spec.est.pilot_bins = cfg.pilot_subcarriers.clone();
    }
    if let Some(v) = take(&mut entries, "f_c") {
        cfg.f_c = num("f_c", &v)?;
    }
    if let Some(v) = take(&mut entries, "f_s") {
        cfg.f_s = num("f_s", &v)?;
    }
    if let Some(v) = take(&mut entries, "cp_len") {
        cfg.cp_len = num("cp_len", &v)?;
    }
    if let Some(v) = take(&mut entries, "qam_order") {
        cfg.qam_order = num("qam_order", &v)?;
    }
    if let Some(v) = take(&mut entries, "sts_repeats") {
        cfg.sts_repeats = num("sts_repeats", &v)?;
    }
    if let Some(v) = take(&mut entries, "sts_symbol_len") {
        cfg.sts_symbol_len = num("sts_symbol_len", &v)?;
        spec.est.delay_d = cfg.sts_symbol_len;
    }
    let f_c = spec.cfg.f_c;

    if let Some(v) = take(&mut entries, "delay_d") {
        spec.est.delay_d = num("delay_d", &v)?;
    }
    if let Some(v) = take(&mut entries, "est_pilot_bins") {
        spec.est.pilot_bins = list("est_pilot_bins", &v)?;
    }
    if let Some(v) = take(&mut entries, "noise_cov_scale") {
        spec.est.noise_cov_scale = if v == "auto" { None } else { Some(num("noise_cov_scale", &v)?) };
    }

    if let Some(v) = take(&mut entries, "seed") {
        spec.seed = num("seed", &v)?;
    }
    if let Some(v) = take(&mut entries, "out_path") {
        spec.out_path = PathBuf::from(v);
    }
    if let Some(v) = take(&mut entries, "n_trials") {
        spec.n_trials = num("n_trials", &v)?;
    }
    if let Some(v) = take(&mut entries, "snr_grid_db") {
        spec.snr_grid_db = list("snr_grid_db", &v)?;
    }
    if let Some(v) = take(&mut entries, "n_symbols") {
        spec.n_symbols = num("n_symbols", &v)?;
    }
    if let Some(v) = take(&mut entries, "bits_per_cell") {
        spec.bits_per_cell = num("bits_per_cell", &v)?;
    }
    if let Some(v) = take(&mut entries, "dsf_order") {
        spec.dsf_order = num("dsf_order", &v)?;
    }
    if let Some(v) = take(&mut entries, "kaiser_beta") {
        spec.kaiser_beta = num("kaiser_beta", &v)?;
    }
    if let Some(v) = take(&mut entries, "doppler_pairs_hz") {
        spec.doppler_pairs_hz = pairs("doppler_pairs_hz", &v)?;
    }

    let ch = &mut spec.channel;
    if let Some(v) = take(&mut entries, "k_factor") {
        ch.k_factor = num("k_factor", &v)?;
    }
    if let Some(v) = take(&mut entries, "p_r") {
        ch.p_r = num("p_r", &v)?;
    }
    if let Some(v) = take(&mut entries, "cfo_hz") {
        ch.f_cfo = num("cfo_hz", &v)?;
    }
    if let Some(v) = take(&mut entries, "r_0") {
        ch.r_0 = num("r_0", &v)?;
    }
    if let Some(v) = take(&mut entries, "channel_snr_db") {
        ch.snr_db = num("channel_snr_db", &v)?;
    }
    match (take(&mut entries, "v_re_mps"), take(&mut entries, "doppler_real_hz")) {
        (Some(_), Some(_)) => return Err(Error::Validation("give v_re_mps or doppler_real_hz, not both".into())),
        (Some(v), None) => ch.v_re = num("v_re_mps", &v)?,
        (None, Some(v)) => ch.v_re = speed_for_doppler(num("doppler_real_hz", &v)?, f_c),
        (None, None) => {}
    }

    let speed = |key: &str, e: &mut BTreeMap<String, String>, hz_key: &str| -> Result<Option<f64>> {
        match (e.remove(key), e.remove(hz_key)) {
            (Some(_), Some(_)) => Err(Error::Validation(format!("give {key} or {hz_key}, not both"))),
            (Some(v), None) => Ok(Some(num(key, &v)?)),
            (None, Some(v)) => Ok(Some(speed_for_doppler(num(hz_key, &v)?, f_c))),
            (None, None) => Ok(None),
        }
    };
    let v_sp = speed("spoof_v_sp_mps", &mut entries, "spoof_target_hz")?;
    let v_known = speed("spoof_v_re_known_mps", &mut entries, "spoof_known_real_hz")?;
    let simple = speed("spoof_artificial_mps", &mut entries, "spoof_doppler_hz")?;
    spec.spoof = match (v_sp, v_known, simple) {
        (None, None, None) => None,
        (Some(v_sp), v_re_known, None) => Some(SpoofParams { v_sp, v_re_known }),
        (None, None, Some(v_sp)) => Some(SpoofParams { v_sp, v_re_known: None }),
        (None, Some(_), _) => return Err(Error::Validation("a known real speed needs a spoof target".into())),
        (Some(_), _, Some(_)) => {
            return Err(Error::Validation("give a spoof target or a simple artificial Doppler, not both".into()))
        }
    };

    if let Some(k) = entries.keys().next() {
        return Err(Error::Validation(format!("unknown config key `{k}`")));
    }
    Ok(spec)
}

/// Canonical text form; `parse_config` of it gives back `spec`.
/// `out_path` is written last so callers can drop it when hashing.
pub fn to_config_text(spec: &ExperimentSpec) -> String {
    let c = &spec.cfg;
    let ch = &spec.channel;
    let mut lines = vec![
        format!("kind = {}", spec.kind.as_str()),
        format!("seed = {}", spec.seed),
        format!("n_trials = {}", spec.n_trials),
        format!("snr_grid_db = {}", join(&spec.snr_grid_db)),
        format!("n_symbols = {}", spec.n_symbols),
        format!("bits_per_cell = {}", spec.bits_per_cell),
        format!("dsf_order = {}", spec.dsf_order),
        format!("kaiser_beta = {}", spec.kaiser_beta),
        format!(
            "doppler_pairs_hz = {}",
            spec.doppler_pairs_hz.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(",")
        ),
        format!("n_fft = {}", c.n_fft),
        format!("used_subcarriers = {}", join(&c.used_subcarriers)),
        format!("pilot_subcarriers = {}", join(&c.pilot_subcarriers)),
        format!("f_c = {}", c.f_c),
        format!("f_s = {}", c.f_s),
        format!("cp_len = {}", c.cp_len),
        format!("qam_order = {}", c.qam_order),
        format!("sts_repeats = {}", c.sts_repeats),
        format!("sts_symbol_len = {}", c.sts_symbol_len),
        format!("delay_d = {}", spec.est.delay_d),
        format!("est_pilot_bins = {}", join(&spec.est.pilot_bins)),
        format!("noise_cov_scale = {}", spec.est.noise_cov_scale.map_or("auto".to_string(), |v| v.to_string())),
        format!("k_factor = {}", ch.k_factor),
        format!("p_r = {}", ch.p_r),
        format!("v_re_mps = {}", ch.v_re),
        format!("cfo_hz = {}", ch.f_cfo),
        format!("r_0 = {}", ch.r_0),
        format!("channel_snr_db = {}", ch.snr_db),
    ];
    if let Some(sp) = &spec.spoof {
        lines.push(format!("spoof_v_sp_mps = {}", sp.v_sp));
        if let Some(v) = sp.v_re_known {
            lines.push(format!("spoof_v_re_known_mps = {v}"));
        }
    }
    lines.push(format!("out_path = {}", spec.out_path.display()));
    lines.join("\n") + "\n"
}
