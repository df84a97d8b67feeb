//! Security of the coherent one-way (COW) quantum key distribution protocol
//! against the standard beam-splitting attack and the active beam-splitting
//! attack, in which Eve measures a diverted share of each pulse at once and
//! uses the remaining line loss to block pulses she could not read.
//!
//! - [`primitives`]: attenuation, binary entropy, coherent-state overlaps and
//!   the Holevo quantity of two pure states.
//! - [`attacks`]: Eve's information and the critical QBER for both attacks,
//!   Eve's optimal withdrawal, and the source intensity that maximizes the
//!   legitimate users' key-rate margin.
//! - [`montecarlo`]: a pulse-level simulator with ideal threshold detectors
//!   used to cross-check the analytic probabilities.
//! - [`experiments`]: length sweeps, CSV/JSON output and the validation
//!   harness behind the `cow-qkd` command line tool.

pub mod attacks;
pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod optimize;
pub mod primitives;

pub use attacks::{
    active_attack, active_eve_info, active_plan, bs_attack, critical_length, fully_insecure_length,
    key_rate_margin, optimal_mu_e, optimal_source_intensity, ActiveAttackPlan, AttackKind,
    AttackReport, SourceOptimum,
};
pub use error::{Error, Result};
pub use primitives::{
    attenuate, binary_entropy, binary_entropy_inverse, coherent_pair_overlap, holevo_two_pure,
    max_withdrawable_intensity, ChannelPoint, ProtocolParams,
};
