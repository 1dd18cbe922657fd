//! Shared fixtures for the criterion benches.

use dopspoof_core::channel::{speed_for_doppler, ChannelParams};
use dopspoof_core::harness::{random_frame, spoof_aligned};
use dopspoof_core::spoofer::{design_dsf, DEFAULT_DSF_ORDER, DEFAULT_KAISER_BETA};
use dopspoof_core::{apply_channel, BasebandSignal, DsfFilter, Frame, OfdmConfig, SpoofParams};

pub struct Fixture {
    pub cfg: OfdmConfig,
    pub frame: Frame,
    pub tx: BasebandSignal,
    pub dsf: DsfFilter,
    pub spoof: SpoofParams,
    pub channel: ChannelParams,
    /// `tx` spoofed and received at 30 dB.
    pub rx: BasebandSignal,
}

/// The 250 kHz real plus 250 kHz simple-spoof link with `n_symbols` QPSK symbols.
pub fn fixture(n_symbols: usize) -> Fixture {
    let cfg = OfdmConfig::default();
    let frame = random_frame(&cfg, n_symbols, 1).expect("frame");
    let tx = frame.to_signal();
    let dsf = design_dsf(&cfg, DEFAULT_DSF_ORDER, DEFAULT_KAISER_BETA).expect("filter");
    let v = speed_for_doppler(250e3, cfg.f_c);
    let spoof = SpoofParams { v_sp: v, v_re_known: None };
    let channel = ChannelParams { v_re: v, snr_db: 30.0, seed: 2, ..Default::default() };
    let rx = apply_channel(&spoof_aligned(&tx, &spoof, &cfg, &dsf).expect("spoof"), &channel, &cfg).expect("channel");
    Fixture { cfg, frame, tx, dsf, spoof, channel, rx }
}
