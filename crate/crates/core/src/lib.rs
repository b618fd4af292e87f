//! Secret key generation and one-time-pad data transmission over a link
//! assisted by a reflecting surface with randomly switched phases.
//!
//! The crate models the channels ([`propagation`]), the surface phases
//! ([`irs`]), key generation from reciprocal observations ([`keygen`]), the
//! split of each coherence interval between training and data
//! ([`allocation`]) and randomly placed eavesdroppers ([`stochgeo`]).
//! [`harness`] runs the Monte Carlo experiments on top.

// negated comparisons double as NaN rejection in parameter checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod error;
pub mod harness;
pub mod irs;
pub mod keygen;
pub mod propagation;
pub mod special;
pub mod stats;
pub mod stochgeo;

pub use num_complex::Complex64;

pub use allocation::{edt_rate, optimal_q_bisection, run_algorithm_1, AllocationParams, AllocationResult, RateMode};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, Scheme};
pub use irs::{combined_channel, mrt_phases, random_phase_config, PhaseConfig, PhaseResolution};
pub use keygen::{
    conditional_mutual_information, kgr_closed_form, kgr_sample_average, normalize, CorrelationEstimates,
    ObservationRecord, Observer,
};
pub use propagation::{sample_channel_set, ChannelSet, EveChannel, Geometry, PathLossModel, Point};
pub use stochgeo::{kgr_ppp, nearest_eve_pdf, PppConfig};
