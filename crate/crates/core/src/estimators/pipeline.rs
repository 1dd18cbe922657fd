//! End-to-end speed estimation at the eavesdropper.
//!
//! The STS gives one block of pilot statistics: each pilot bin is isolated,
//! matched against the known training sequence, and its phase advance over
//! `D` samples read out. Its least-squares solution seeds the recursive
//! LMMSE. Every later payload symbol adds one more block, taken from the
//! phase advance of each pilot between consecutive symbols. All statistics
//! are measured after removing a coarse aggregate offset, so they stay far
//! from their alias bounds, and the coarse value is added back before
//! solving.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::fft;
use crate::ofdm::{build_sts, pilot_symbols, OfdmConfig, SPEED_OF_LIGHT};
use crate::signal::BasebandSignal;

use super::lmmse::{lmmse_init, lmmse_update, LmmseState};
use super::ls::{scaled_design_matrix, solve_scaled, unscale_covariance, EstimateResult};
use super::moose::sts_offset;
use super::statistic::{compute_statistic, isolate_subcarrier, matched_filter, EstimatorConfig, SubcarrierStatistics};

/// Lower bound on any per-block noise variance, Hz².
const MIN_BLOCK_VARIANCE: f64 = 1e-6;

/// One row of an estimation trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub symbol_index: usize,
    pub f_cfo_hat_hz: f64,
    pub v_hat_mps: f64,
    pub trace_c_m: f64,
}

fn check_inputs(sig: &BasebandSignal, cfg: &OfdmConfig, est: &EstimatorConfig) -> Result<()> {
    cfg.validate()?;
    est.validate(cfg)?;
    if sig.f_s() != cfg.f_s {
        return Err(Error::Config(format!("signal at {} Hz, config at {} Hz", sig.f_s(), cfg.f_s)));
    }
    if sig.len() < cfg.sts_len() {
        return Err(Error::Size(format!("{} samples do not cover a {}-sample STS", sig.len(), cfg.sts_len())));
    }
    Ok(())
}

/// Pilot statistics over `sts[start..start+len]`, with lag `delay_d`.
/// `coarse_hz` has already been removed from `rx` and is added back.
fn sts_statistics(
    rx: &BasebandSignal,
    reference: &BasebandSignal,
    start: usize,
    len: usize,
    cfg: &OfdmConfig,
    est: &EstimatorConfig,
    coarse_hz: f64,
) -> Result<SubcarrierStatistics> {
    let y = rx.slice(start, len).ok_or_else(|| Error::Size("STS span out of range".into()))?;
    let x = reference.slice(start, len).ok_or_else(|| Error::Size("STS span out of range".into()))?;
    let u = est
        .pilot_bins
        .iter()
        .map(|&k| {
            let y_k = isolate_subcarrier(&y, k, cfg)?;
            let x_k = isolate_subcarrier(&x, k, cfg)?;
            let z = matched_filter(y_k.samples(), x_k.samples())?;
            Ok(compute_statistic(&z, est.delay_d, cfg.sample_period())?.hz + coarse_hz)
        })
        .collect::<Result<Vec<f64>>>()?;
    SubcarrierStatistics::new(est.pilot_bins.clone(), u)
}

/// Matched pilot values of payload symbol `m`, one per estimator pilot bin.
///
/// The DFT window starts half a cyclic prefix early so that small timing
/// errors stay inside the prefix. The resulting per-bin phase is the same
/// for every symbol and cancels in the symbol-to-symbol statistic.
fn payload_pilots(rx: &BasebandSignal, m: usize, cfg: &OfdmConfig, est: &EstimatorConfig) -> Result<Vec<Complex64>> {
    let start = cfg.payload_symbol_start(m) + cfg.cp_len - cfg.cp_len / 2;
    let mut buf = rx
        .slice(start, cfg.n_fft)
        .ok_or_else(|| Error::Size(format!("payload symbol {m} out of range")))?
        .into_samples();
    fft::forward_unitary(&mut buf);
    let reference = pilot_symbols(cfg, m);
    let (y, x): (Vec<Complex64>, Vec<Complex64>) = est
        .pilot_bins
        .iter()
        .map(|&k| {
            let x = reference.iter().find(|(j, _)| *j == k).map(|(_, v)| *v).unwrap_or_default();
            (buf[fft::bin_index(k, cfg.n_fft)], x)
        })
        .unzip();
    matched_filter(&y, &x)
}

fn payload_symbol_count(sig: &BasebandSignal, cfg: &OfdmConfig) -> usize {
    sig.len().saturating_sub(cfg.sts_len()) / cfg.symbol_len()
}

fn block_variance(rss: f64, n: usize, est: &EstimatorConfig) -> f64 {
    match est.noise_cov_scale {
        Some(s) => s,
        None if n > 2 => (rss / (n - 2) as f64).max(MIN_BLOCK_VARIANCE),
        None => MIN_BLOCK_VARIANCE,
    }
}

fn seed_state(stats: &SubcarrierStatistics, cfg: &OfdmConfig, est: &EstimatorConfig) -> Result<(LmmseState, f64)> {
    let (z, rss, unit) = solve_scaled(stats.bins(), stats.u_hz(), cfg)?;
    let sigma2 = block_variance(rss, stats.len(), est);
    Ok((lmmse_init(z, unit * sigma2)?, rss))
}

fn result_from_state(state: &LmmseState, rss: f64, cfg: &OfdmConfig) -> EstimateResult {
    EstimateResult {
        f_cfo_hat: state.z_hat[0],
        v_hat: state.z_hat[1] * SPEED_OF_LIGHT / cfg.f_c,
        residual_norm: rss.max(0.0).sqrt(),
        covariance: unscale_covariance(&state.c_m, cfg),
    }
}

fn residual_ss(a: &DMatrix<f64>, p: &DVector<f64>, state: &LmmseState) -> f64 {
    let z = DVector::from_column_slice(state.z_hat.as_slice());
    (p - a * z).norm_squared()
}

/// Joint `(f_CFO, v)` estimate from a frame that starts with the STS.
///
/// Uses the STS alone when the signal carries no complete payload symbol.
/// `residual_norm` is that of the final block against the final estimate.
pub fn estimate_speed_pipeline(sig: &BasebandSignal, cfg: &OfdmConfig, est: &EstimatorConfig) -> Result<EstimateResult> {
    check_inputs(sig, cfg, est)?;
    let (coarse, _) = sts_offset(sig, cfg)?;
    let rx = dsp::mix(sig, -coarse);
    let reference = build_sts(cfg)?;

    let sts = sts_statistics(&rx, &reference, 0, cfg.sts_len(), cfg, est, coarse)?;
    let (seed, mut rss) = seed_state(&sts, cfg, est)?;

    let n_sym = payload_symbol_count(sig, cfg);
    if n_sym < 2 {
        return Ok(result_from_state(&seed, rss, cfg));
    }
    // Over the short STS span the statistics carry a leakage bias that their
    // residuals do not reveal, so the STS solution only centres a diffuse prior.
    let mut state = lmmse_init(seed.z_hat, diffuse_prior(cfg))?;
    let a = scaled_design_matrix(&est.pilot_bins, cfg);
    let t_sym = cfg.symbol_len() as f64 * cfg.sample_period();
    let n_pairs = n_sym - 1;
    let mut c_w: Option<DMatrix<f64>> = None;
    let mut prev = payload_pilots(&rx, 0, cfg, est)?;
    for m in 1..n_sym {
        // Weighting pair m by m(M+1-m) turns the recursion into the
        // least-squares phase-slope fit over all symbols of the frame.
        let weight = (m * (n_pairs + 1 - m)) as f64;
        let cur = payload_pilots(&rx, m, cfg, est)?;
        let u = prev
            .iter()
            .zip(&cur)
            .map(|(&a0, &a1)| Ok(compute_statistic(&[a0, a1], 1, t_sym)?.hz + coarse))
            .collect::<Result<Vec<f64>>>()?;
        let p = DVector::from_vec(u);
        let cov = match &c_w {
            Some(c) => c.clone(),
            None => {
                let (_, first_rss, _) = solve_scaled(&est.pilot_bins, p.as_slice(), cfg)?;
                let sigma2 = block_variance(first_rss, p.len(), est);
                let c = DMatrix::identity(p.len(), p.len()) * sigma2;
                c_w = Some(c.clone());
                c
            }
        };
        state = lmmse_update(&state, &p, &a, &(cov / weight))?;
        rss = residual_ss(&a, &p, &state);
        prev = cur;
    }
    Ok(result_from_state(&state, rss, cfg))
}

/// Recursive LMMSE over the STS alone, one block per short symbol.
///
/// Block `s` holds the pilot statistics of short symbols `s-1` and `s`
/// (lag `D`); the first block's least-squares solution seeds the recursion.
/// Returns one row per short symbol from index 1 on, with the carrier-level
/// aggregate offset of each row available as
/// `f_cfo_hat_hz + f_c v_hat_mps / c`.
pub fn sts_lmmse_trace(sig: &BasebandSignal, cfg: &OfdmConfig, est: &EstimatorConfig) -> Result<Vec<TraceRow>> {
    check_inputs(sig, cfg, est)?;
    let l = cfg.sts_symbol_len;
    if est.delay_d > l {
        return Err(Error::Config(format!("delay {} exceeds one short symbol of {l}", est.delay_d)));
    }
    let (coarse, _) = sts_offset(sig, cfg)?;
    let rx = dsp::mix(sig, -coarse);
    let reference = build_sts(cfg)?;
    let a = scaled_design_matrix(&est.pilot_bins, cfg);

    let mut rows = Vec::with_capacity(cfg.sts_repeats - 1);
    let mut state: Option<LmmseState> = None;
    let mut c_w: Option<DMatrix<f64>> = None;
    for s in 1..cfg.sts_repeats {
        let stats = sts_statistics(&rx, &reference, (s - 1) * l, 2 * l, cfg, est, coarse)?;
        let next = match state {
            None => {
                let (st, rss) = seed_state(&stats, cfg, est)?;
                let sigma2 = block_variance(rss, stats.len(), est);
                c_w = Some(DMatrix::identity(stats.len(), stats.len()) * sigma2);
                st
            }
            Some(ref st) => {
                let p = DVector::from_column_slice(stats.u_hz());
                lmmse_update(st, &p, &a, c_w.as_ref().expect("seeded with the first block"))?
            }
        };
        let cov = unscale_covariance(&next.c_m, cfg);
        rows.push(TraceRow {
            symbol_index: s,
            f_cfo_hat_hz: next.z_hat[0],
            v_hat_mps: next.z_hat[1] * SPEED_OF_LIGHT / cfg.f_c,
            trace_c_m: cov.trace(),
        });
        state = Some(next);
    }
    Ok(rows)
}

/// Prior covariance wide enough to leave any realistic estimate unconstrained.
pub fn diffuse_prior(cfg: &OfdmConfig) -> Matrix2<f64> {
    let f = cfg.f_s * cfg.f_s;
    Matrix2::new(f, 0.0, 0.0, f)
}
