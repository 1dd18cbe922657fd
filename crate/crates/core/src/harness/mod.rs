//! Seeded Monte Carlo experiments and their CSV output.
//!
//! Every trial derives its own seed from the master seed with
//! [`trial_seed`], trials run on the rayon pool, and results are reduced in
//! trial order, so output does not depend on the number of workers.

mod config;
mod stats;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::channel::{apply_channel, doppler_for_speed, speed_for_doppler, ChannelParams};
use crate::error::{Error, Result};
use crate::estimators::{estimate_speed_pipeline, sts_lmmse_trace, EstimatorConfig, TraceRow};
use crate::ofdm::{build_frame, Frame, OfdmConfig};
use crate::receiver::demodulate_frame;
use crate::signal::BasebandSignal;
use crate::spectrum::{welch_psd, Psd, WELCH_SEGMENT};
use crate::spoofer::{apply_spoof, design_dsf, DsfFilter, SpoofParams, DEFAULT_DSF_ORDER, DEFAULT_KAISER_BETA};

pub use config::{parse_config, to_config_text};
pub use stats::{median, spearman, trial_seed, wilson_interval, Z_95};

/// Frequency points in the filter report.
pub const FILTER_REPORT_POINTS: usize = 1024;

/// Stream of a trial seed that draws payload bits; the channel uses 0..=2.
const STREAM_BITS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Ber,
    Periodogram,
    Estimate,
    FilterReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub snr_grid_db: Vec<f64>,
    pub n_trials: usize,
    /// `seed` is ignored; each trial gets its own.
    pub channel: ChannelParams,
    pub spoof: Option<SpoofParams>,
    pub cfg: OfdmConfig,
    pub est: EstimatorConfig,
    pub seed: u64,
    pub out_path: PathBuf,
    /// Payload symbols per frame.
    pub n_symbols: usize,
    /// Minimum bits per BER cell.
    pub bits_per_cell: usize,
    /// BER cells as `(real, artificial)` Doppler in Hz. Empty derives
    /// `(0, 0)` plus the pair implied by `channel` and `spoof`.
    pub doppler_pairs_hz: Vec<(f64, f64)>,
    pub dsf_order: usize,
    pub kaiser_beta: f64,
}

impl ExperimentSpec {
    /// Defaults: 250 kHz real Doppler plus a simple 250 kHz spoof, QPSK,
    /// SNR 0 to 30 dB in 5 dB steps, 100 trials.
    pub fn new(kind: ExperimentKind) -> Self {
        let cfg = OfdmConfig::default();
        let v = speed_for_doppler(250e3, cfg.f_c);
        Self {
            kind,
            snr_grid_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            n_trials: 100,
            channel: ChannelParams { v_re: v, ..Default::default() },
            spoof: Some(SpoofParams { v_sp: v, v_re_known: None }),
            est: EstimatorConfig::for_ofdm(&cfg),
            cfg,
            seed: 0,
            out_path: PathBuf::from(format!("{}.csv", kind.as_str())),
            n_symbols: 64,
            bits_per_cell: 100_000,
            doppler_pairs_hz: Vec::new(),
            dsf_order: DEFAULT_DSF_ORDER,
            kaiser_beta: DEFAULT_KAISER_BETA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.est.validate(&self.cfg)?;
        self.channel.validate()?;
        if self.n_trials == 0 {
            return Err(Error::Validation("n_trials must be at least 1".into()));
        }
        if matches!(self.kind, ExperimentKind::Ber | ExperimentKind::Estimate) && self.snr_grid_db.is_empty() {
            return Err(Error::Validation("snr_grid_db must not be empty".into()));
        }
        if self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return Err(Error::Validation("SNR grid contains NaN".into()));
        }
        if self.n_symbols == 0 {
            return Err(Error::Validation("n_symbols must be at least 1".into()));
        }
        if self.doppler_pairs_hz.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::Validation("Doppler pairs must be finite".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical config text, `out_path` excluded.
    pub fn hash_hex(&self) -> String {
        let text = to_config_text(self);
        let canonical: String = text.lines().filter(|l| !l.starts_with("out_path")).map(|l| format!("{l}\n")).collect();
        Sha256::digest(canonical.as_bytes()).iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn metadata_line(&self) -> String {
        format!(
            "# spec_sha256={} seed={} kind={} qam_order={}\n",
            self.hash_hex(),
            self.seed,
            self.kind.as_str(),
            self.cfg.qam_order
        )
    }

    fn dsf(&self) -> Result<DsfFilter> {
        design_dsf(&self.cfg, self.dsf_order, self.kaiser_beta)
    }

    fn ber_pairs(&self) -> Vec<(f64, f64)> {
        if !self.doppler_pairs_hz.is_empty() {
            return self.doppler_pairs_hz.clone();
        }
        let f_c = self.cfg.f_c;
        let pair = (
            doppler_for_speed(self.channel.v_re, f_c),
            self.spoof.map_or(0.0, |s| doppler_for_speed(s.artificial_speed(), f_c)),
        );
        if pair == (0.0, 0.0) { vec![pair] } else { vec![(0.0, 0.0), pair] }
    }
}

/// Random payload for one trial.
pub fn random_frame(cfg: &OfdmConfig, n_symbols: usize, seed: u64) -> Result<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_BITS);
    let bits: Vec<u8> = (0..cfg.bits_per_ofdm_symbol() * n_symbols).map(|_| rng.random_range(0..2)).collect();
    build_frame(cfg, &bits, n_symbols)
}

/// Passes `tx` through the spoofer and removes the filter delay.
pub fn spoof_aligned(tx: &BasebandSignal, sp: &SpoofParams, cfg: &OfdmConfig, dsf: &DsfFilter) -> Result<BasebandSignal> {
    Ok(dsf.align(&apply_spoof(&tx.padded(dsf.group_delay()), sp, cfg, dsf)?))
}

/// Transmit, spoof if configured and cross the channel for one trial.
fn received(spec: &ExperimentSpec, frame: &Frame, dsf: &DsfFilter, snr_db: f64, seed: u64) -> Result<BasebandSignal> {
    let tx = frame.to_signal();
    let tx = match &spec.spoof {
        Some(sp) => spoof_aligned(&tx, sp, &spec.cfg, dsf)?,
        None => tx,
    };
    let ch = ChannelParams { snr_db, seed, ..spec.channel.clone() };
    apply_channel(&tx, &ch, &spec.cfg)
}

fn require_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::Validation(format!("spec is for `{}`, not `{}`", spec.kind.as_str(), kind.as_str())));
    }
    Ok(())
}

fn cell_index(i: usize) -> u32 {
    u32::try_from(i).expect("grid larger than u32")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub doppler_hz_real: f64,
    pub doppler_hz_artificial: f64,
    pub bits_tested: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

/// A BER cell the spoofer refused to produce.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedCell {
    pub snr_db: f64,
    pub doppler_hz_real: f64,
    pub doppler_hz_artificial: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BerReport {
    pub records: Vec<BerRecord>,
    pub rejected: Vec<RejectedCell>,
}

/// Uncoded BER per `(SNR, f_D, f_A)` cell. All Doppler pairs at one SNR see
/// the same payloads and noise draws, so their difference is a paired
/// comparison. Every arm passes through the spoofing filter, the clean arm
/// with zero artificial Doppler. A frame the receiver fails to detect
/// counts all its bits as errors.
pub fn run_ber(spec: &ExperimentSpec) -> Result<BerReport> {
    require_kind(spec, ExperimentKind::Ber)?;
    let cfg = &spec.cfg;
    let dsf = spec.dsf()?;
    let bits_per_frame = cfg.bits_per_ofdm_symbol() * spec.n_symbols;
    let n_frames = spec.n_trials.max(spec.bits_per_cell.div_ceil(bits_per_frame));
    let mut report = BerReport::default();
    for (si, &snr_db) in spec.snr_grid_db.iter().enumerate() {
        for &(f_d, f_a) in &spec.ber_pairs() {
            let sp = SpoofParams { v_sp: speed_for_doppler(f_a, cfg.f_c), v_re_known: None };
            let ch = ChannelParams { v_re: speed_for_doppler(f_d, cfg.f_c), snr_db, ..spec.channel.clone() };
            let errors: Result<Vec<u64>> = (0..n_frames)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(spec.seed, cell_index(si), cell_index(t));
                    let frame = random_frame(cfg, spec.n_symbols, seed)?;
                    let tx = spoof_aligned(&frame.to_signal(), &sp, cfg, &dsf)?;
                    let rx = apply_channel(&tx, &ChannelParams { seed, ..ch.clone() }, cfg)?;
                    match demodulate_frame(&rx, cfg, spec.n_symbols) {
                        Ok(d) => Ok(d.bits.iter().zip(&frame.payload_bits).filter(|(a, b)| a != b).count() as u64),
                        Err(Error::NoFrame { .. }) => Ok(bits_per_frame as u64),
                        Err(e) => Err(e),
                    }
                })
                .collect();
            match errors {
                Ok(errors) => {
                    let bits_tested = (n_frames * bits_per_frame) as u64;
                    let bit_errors: u64 = errors.iter().sum();
                    report.records.push(BerRecord {
                        snr_db,
                        doppler_hz_real: f_d,
                        doppler_hz_artificial: f_a,
                        bits_tested,
                        bit_errors,
                        ber: bit_errors as f64 / bits_tested as f64,
                    });
                }
                Err(e @ Error::Tolerance { .. }) => report.rejected.push(RejectedCell {
                    snr_db,
                    doppler_hz_real: f_d,
                    doppler_hz_artificial: f_a,
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

/// Welch periodogram of the received signal averaged over `n_trials`
/// frames, at the channel's own SNR.
pub fn run_periodogram(spec: &ExperimentSpec) -> Result<Psd> {
    require_kind(spec, ExperimentKind::Periodogram)?;
    let dsf = spec.dsf()?;
    let psds: Vec<Psd> = (0..spec.n_trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(spec.seed, 0, cell_index(t));
            let frame = random_frame(&spec.cfg, spec.n_symbols, seed)?;
            welch_psd(&received(spec, &frame, &dsf, spec.channel.snr_db, seed)?, WELCH_SEGMENT)
        })
        .collect::<Result<_>>()?;
    let mut density = vec![0.0; psds[0].density.len()];
    for p in &psds {
        for (d, v) in density.iter_mut().zip(&p.density) {
            *d += v;
        }
    }
    let n = psds.len() as f64;
    Ok(Psd { freqs_hz: psds[0].freqs_hz.clone(), density: density.into_iter().map(|d| d / n).collect() })
}

/// One row of the per-trial STS trace, with phases accumulated up to `time_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub snr_db: f64,
    pub trial: usize,
    pub row: TraceRow,
    /// End of the block that produced `row`, from the start of the frame.
    pub time_s: f64,
    /// `2π (f_cfo_hat + f_c v_hat / c) t`.
    pub phase_hat_rad: f64,
    /// Phase of the real Doppler alone.
    pub phase_re_rad: f64,
    /// True aggregate phase: CFO, real and artificial Doppler.
    pub phase_total_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSummary {
    pub snr_db: f64,
    pub n_trials: usize,
    /// Speed the eavesdropper should read: real plus artificial.
    pub v_expected_mps: f64,
    pub v_re_mps: f64,
    pub median_v_hat_mps: f64,
    pub median_rel_error: f64,
    /// Mean over trials and trace rows of `|phase_hat - phase_total|`.
    pub mean_phase_error_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimationReport {
    pub summary: Vec<EstimationSummary>,
    pub traces: Vec<TracePoint>,
}

/// Full-frame speed estimates and STS phase traces per SNR.
pub fn run_estimation(spec: &ExperimentSpec) -> Result<EstimationReport> {
    require_kind(spec, ExperimentKind::Estimate)?;
    let cfg = &spec.cfg;
    let dsf = spec.dsf()?;
    let v_re = spec.channel.v_re;
    let v_expected = v_re + spec.spoof.map_or(0.0, |s| s.artificial_speed());
    let f_total = spec.channel.f_cfo + doppler_for_speed(v_expected, cfg.f_c);
    let f_re = doppler_for_speed(v_re, cfg.f_c);
    let block = cfg.sts_symbol_len as f64 * cfg.sample_period();

    let mut report = EstimationReport::default();
    for (si, &snr_db) in spec.snr_grid_db.iter().enumerate() {
        let trials: Vec<(f64, Vec<TracePoint>)> = (0..spec.n_trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(spec.seed, cell_index(si), cell_index(t));
                let frame = random_frame(cfg, spec.n_symbols, seed)?;
                let rx = received(spec, &frame, &dsf, snr_db, seed)?;
                let est = estimate_speed_pipeline(&rx, cfg, &spec.est)?;
                let rows = sts_lmmse_trace(&rx, cfg, &spec.est)?;
                let points = rows
                    .into_iter()
                    .map(|row| {
                        let time_s = (row.symbol_index + 1) as f64 * block;
                        let f_hat = row.f_cfo_hat_hz + doppler_for_speed(row.v_hat_mps, cfg.f_c);
                        TracePoint {
                            snr_db,
                            trial: t,
                            row,
                            time_s,
                            phase_hat_rad: 2.0 * PI * f_hat * time_s,
                            phase_re_rad: 2.0 * PI * f_re * time_s,
                            phase_total_rad: 2.0 * PI * f_total * time_s,
                        }
                    })
                    .collect();
                Ok((est.v_hat, points))
            })
            .collect::<Result<_>>()?;

        let v_hats: Vec<f64> = trials.iter().map(|t| t.0).collect();
        let errs: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.1.iter().map(|p| (p.phase_hat_rad - p.phase_total_rad).abs()))
            .collect();
        let median_v_hat = median(&v_hats).unwrap_or(f64::NAN);
        report.summary.push(EstimationSummary {
            snr_db,
            n_trials: spec.n_trials,
            v_expected_mps: v_expected,
            v_re_mps: v_re,
            median_v_hat_mps: median_v_hat,
            median_rel_error: median(&v_hats.iter().map(|v| ((v - v_expected) / v_expected).abs()).collect::<Vec<_>>())
                .unwrap_or(f64::NAN),
            mean_phase_error_rad: errs.iter().sum::<f64>() / errs.len().max(1) as f64,
        });
        report.traces.extend(trials.into_iter().flat_map(|t| t.1));
    }
    Ok(report)
}

/// `(f / f_s, magnitude dB, phase rad)` of the designed spoofing filter.
pub fn run_filter_report(spec: &ExperimentSpec) -> Result<Vec<(f64, f64, f64)>> {
    require_kind(spec, ExperimentKind::FilterReport)?;
    Ok(spec.dsf()?.response_table(FILTER_REPORT_POINTS))
}

fn csv(spec: &ExperimentSpec, header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = spec.metadata_line();
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

/// Path of the per-trial trace that accompanies an estimation summary.
pub fn trace_path(out_path: &Path) -> PathBuf {
    out_path.with_extension("trace.csv")
}

/// Runs `spec` and returns each output file with its CSV text, without
/// touching the filesystem.
pub fn render_experiment(spec: &ExperimentSpec) -> Result<Vec<(PathBuf, String)>> {
    let out = spec.out_path.clone();
    Ok(match spec.kind {
        ExperimentKind::Ber => {
            let r = run_ber(spec)?;
            let ok = r.records.iter().map(|b| {
                format!(
                    "{},{},{},{},{},{},ok",
                    b.snr_db, b.doppler_hz_real, b.doppler_hz_artificial, b.bits_tested, b.bit_errors, b.ber
                )
            });
            let rejected = r
                .rejected
                .iter()
                .map(|c| format!("{},{},{},0,0,,rejected_tolerance", c.snr_db, c.doppler_hz_real, c.doppler_hz_artificial));
            let header = "snr_db,doppler_hz_real,doppler_hz_artificial,bits_tested,bit_errors,ber,status";
            vec![(out, csv(spec, header, ok.chain(rejected)))]
        }
        ExperimentKind::Periodogram => {
            let p = run_periodogram(spec)?;
            let rows = p.freqs_hz.iter().zip(p.density_db()).map(|(f, d)| format!("{f},{d}"));
            vec![(out, csv(spec, "freq_hz,psd_db", rows))]
        }
        ExperimentKind::Estimate => {
            let r = run_estimation(spec)?;
            let summary = r.summary.iter().map(|s| {
                format!(
                    "{},{},{},{},{},{},{}",
                    s.snr_db,
                    s.n_trials,
                    s.v_expected_mps,
                    s.v_re_mps,
                    s.median_v_hat_mps,
                    s.median_rel_error,
                    s.mean_phase_error_rad
                )
            });
            let traces = r.traces.iter().map(|p| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    p.snr_db,
                    p.trial,
                    p.row.symbol_index,
                    p.time_s,
                    p.row.f_cfo_hat_hz,
                    p.row.v_hat_mps,
                    p.row.trace_c_m,
                    p.phase_hat_rad,
                    p.phase_re_rad,
                    p.phase_total_rad
                )
            });
            vec![
                (
                    out.clone(),
                    csv(
                        spec,
                        "snr_db,n_trials,v_expected_mps,v_re_mps,median_v_hat_mps,median_rel_error,mean_phase_error_rad",
                        summary,
                    ),
                ),
                (
                    trace_path(&out),
                    csv(
                        spec,
                        "snr_db,trial,symbol_index,time_s,f_cfo_hat_hz,v_hat_mps,trace_c_m,phase_hat_rad,phase_re_rad,phase_total_rad",
                        traces,
                    ),
                ),
            ]
        }
        ExperimentKind::FilterReport => {
            let rows = run_filter_report(spec)?.into_iter().map(|(f, m, p)| format!("{f},{m},{p}"));
            vec![(out, csv(spec, "f_norm,mag_db,phase_rad", rows))]
        }
    })
}

/// Runs `spec` and writes its CSV files, returning their paths.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let files = render_experiment(spec)?;
    for (path, text) in &files {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, text)?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}
