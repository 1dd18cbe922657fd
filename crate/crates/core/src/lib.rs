//! Baseband OFDM simulator for Doppler spoofing experiments.
//!
//! A transmitter builds 802.11-style frames ([`ofdm`]), optionally embeds
//! artificial Doppler ([`spoofer`]), the signal crosses a Rician channel with
//! wideband Doppler and CFO ([`channel`]), and two receivers look at it: an
//! eavesdropper that jointly estimates CFO and speed, and the legitimate
//! receiver that only removes the aggregate offset ([`estimators`],
//! [`receiver`]). [`harness`] runs the Monte Carlo experiments.

pub mod channel;
pub mod dsp;
pub mod error;
pub mod estimators;
mod fft;
pub mod harness;
pub mod ofdm;
pub mod receiver;
pub mod signal;
pub mod spectrum;
pub mod spoofer;

pub use channel::{apply_channel, ChannelParams, ChannelRealization};
pub use error::{Error, Result};
pub use estimators::{EstimateResult, EstimatorConfig, LmmseState, SubcarrierStatistics};
pub use ofdm::{Frame, FrequencyDomainSymbol, OfdmConfig, SPEED_OF_LIGHT};
pub use signal::BasebandSignal;
pub use spoofer::{DsfFilter, SpoofParams};
