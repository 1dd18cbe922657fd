//! Eavesdropper-side joint CFO/speed estimation and the legitimate receiver's
//! aggregate offset correction.

mod lmmse;
mod ls;
mod moose;
mod pipeline;
mod statistic;

pub use lmmse::{lmmse_init, lmmse_update, LmmseState};
pub use ls::{design_matrix, solve_joint_ls, EstimateResult};
pub use moose::{moose_correct, MOOSE_DETECTION_RATIO};
pub use pipeline::{diffuse_prior, estimate_speed_pipeline, sts_lmmse_trace, TraceRow};
pub use statistic::{compute_statistic, isolate_subcarrier, matched_filter, EstimatorConfig, Statistic, SubcarrierStatistics};
