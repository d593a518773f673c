//! Ergodic rates and coverage regions for a two-user STAR-RIS downlink
//! under NOMA and OMA with energy splitting.
//!
//! The analysis uses a Gamma model of the cascaded channel power; the
//! Monte-Carlo module samples both that model and the exact cascaded
//! Rayleigh channel to validate it.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod coverage;
pub mod error;
pub mod mc;
pub mod output;
pub mod quadrature;
pub mod rate;
pub mod special;

pub use channel::{
    effective_gain, gamma_params, transmit_snr, GainRole, GammaApprox, LinkGeometry, Protocol,
    Side, SystemParams,
};
pub use error::{Error, Result};
pub use quadrature::QuadratureSpec;
pub use rate::{
    ergodic_log_gamma, exp_integral_oracle, noma_rate_reflect, noma_rate_transmit, oma_rate,
    user_rate, RateMethod, RateResult,
};
pub use mc::{
    gamma_fit_report, mc_rate_noma_reflect, mc_rate_noma_transmit, mc_rate_oma,
    mc_sic_sinr_check, sample_cascade_amplitude, ChannelModel, GammaFitReport, McConfig,
    McEstimate,
};
pub use coverage::{
    coverage_rectangle, max_distance, max_distance_with, sweep, BetaCoupling, BracketStatus,
    CoverageQuery, CoverageRegion, CoverageResult, RateTargets, SolverBounds, SweepAxis, SweepRow,
};
