//! Standard and active beam-splitting attacks on COW, their critical QBER,
//! and the legitimate users' choice of source intensity.
//!
//! In the standard attack Eve diverts all of the line loss, stores it, and
//! decodes collectively; her information is the Holevo quantity of the two
//! diverted information states. In the active attack she diverts a smaller
//! intensity, measures each time slot at once with a threshold detector,
//! and spends the remaining loss budget blocking pulses on which her
//! measurement was inconclusive. Either way, the critical QBER is the error
//! rate at which `1 − h2(QBER)` drops to Eve's information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize;
use crate::primitives::{
    binary_entropy_inverse, coherent_pair_overlap, holevo_two_pure, ChannelPoint, ProtocolParams,
};

/// Eve's information at or above this value counts as complete.
pub const FULL_INFORMATION_TOL: f64 = 1e-12;

/// Upper end of the source-intensity search.
pub const SOURCE_MU_MAX: f64 = 2.0;

/// Grid size for bracketing the source-intensity maximizer.
pub const SOURCE_GRID_POINTS: usize = 2000;

const SOURCE_XTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    BeamSplitting,
    ActiveBeamSplitting,
}

/// Eve's parameters for one active beam-splitting attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveAttackPlan {
    mu_e: f64,
    mu_b_prime: f64,
    block_fraction: f64,
    raw_block_fraction: f64,
    /// `1 − block_fraction`, kept separately so it does not lose digits
    /// when blocking is close to total.
    pass_fraction: f64,
    p_conc_inf: f64,
    p_conc_cont: f64,
    p_conc_total: f64,
}

impl ActiveAttackPlan {
    /// Intensity Eve diverts to her detectors.
    pub fn mu_e(&self) -> f64 {
        self.mu_e
    }

    /// Intensity forwarded to Bob over the lossless line.
    pub fn mu_b_prime(&self) -> f64 {
        self.mu_b_prime
    }

    /// Share of all pulses Eve suppresses, after capping.
    pub fn block_fraction(&self) -> f64 {
        self.block_fraction
    }

    /// Blocking budget as given by the loss balance before any capping.
    pub fn raw_block_fraction(&self) -> f64 {
        self.raw_block_fraction
    }

    pub fn pass_fraction(&self) -> f64 {
        self.pass_fraction
    }

    /// Probability that Eve's slot measurement clicks on an information pulse.
    pub fn p_conc_inf(&self) -> f64 {
        self.p_conc_inf
    }

    /// Probability that at least one slot clicks on a decoy pulse.
    pub fn p_conc_cont(&self) -> f64 {
        self.p_conc_cont
    }

    /// Conclusive probability averaged over information and decoy pulses.
    pub fn p_conc_total(&self) -> f64 {
        self.p_conc_total
    }

    /// Largest useful blocking fraction: every inconclusive information pulse.
    pub fn block_cap(&self) -> f64 {
        1.0 - self.p_conc_inf
    }

    /// True when Eve can block every pulse she failed to read.
    pub fn is_capped(&self) -> bool {
        self.block_fraction >= self.block_cap()
    }

    /// Copy of this plan with a different blocking fraction in `[0, cap]`.
    pub fn with_block_fraction(&self, block_fraction: f64) -> Result<Self> {
        if !(0.0..=self.block_cap()).contains(&block_fraction) {
            return Err(Error::domain(
                "block_fraction",
                block_fraction,
                "0 <= b <= 1 - p_conc_inf",
            ));
        }
        Ok(ActiveAttackPlan {
            block_fraction,
            pass_fraction: 1.0 - block_fraction,
            ..*self
        })
    }
}

/// Outcome of one attack analysis at one channel point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack_kind: AttackKind,
    pub channel: ChannelPoint,
    /// Eve's information per sifted bit.
    pub i_ae: f64,
    /// Error rate at which Bob's information falls to Eve's.
    pub qber_critical: f64,
    /// Eve learns everything without adding errors.
    pub fully_insecure: bool,
    pub plan: Option<ActiveAttackPlan>,
}

fn critical_qber(i_ae: f64) -> Result<f64> {
    binary_entropy_inverse((1.0 - i_ae).clamp(0.0, 1.0))
}

/// `1 − e^(−x)` without cancellation for small `x`.
fn click_probability(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Standard beam-splitting attack: Eve keeps the whole line loss and decodes
/// it collectively, reaching the Holevo quantity of her two states.
pub fn bs_attack(params: &ProtocolParams, length_km: f64) -> Result<AttackReport> {
    let channel = params.channel_point(length_km)?;
    let i_ae = holevo_two_pure(coherent_pair_overlap(channel.mu_e_max)?)?;
    Ok(AttackReport {
        attack_kind: AttackKind::BeamSplitting,
        channel,
        i_ae,
        qber_critical: critical_qber(i_ae)?,
        fully_insecure: false,
        plan: None,
    })
}

/// Builds the active-attack plan for a chosen withdrawn intensity `mu_e`.
pub fn active_plan(params: &ProtocolParams, length_km: f64, mu_e: f64) -> Result<ActiveAttackPlan> {
    let channel = params.channel_point(length_km)?;
    if mu_e.is_nan() || mu_e < 0.0 {
        return Err(Error::domain("mu_e", mu_e, "an intensity >= 0"));
    }
    // Tolerate rounding in callers that recompute the maximum themselves.
    if mu_e > channel.mu_e_max + 4.0 * f64::EPSILON * params.mu() {
        return Err(Error::WithdrawalExceedsLoss {
            mu_e,
            mu_e_max: channel.mu_e_max,
        });
    }
    let mu_e = mu_e.min(channel.mu_e_max);
    let mu_b_prime = params.mu() - mu_e;

    let p_conc_inf = click_probability(mu_e);
    let p_conc_cont = click_probability(2.0 * mu_e);
    let f = params.decoy_fraction();
    let p_conc_total = (1.0 - f) * p_conc_inf + f * p_conc_cont;

    // Bob must see the click rate of the lossy line:
    // (1 − b)(1 − e^(−μ'_B)) = 1 − e^(−μ_B).
    let raw_pass = click_probability(channel.mu_b) / click_probability(mu_b_prime);
    let raw_block_fraction = 1.0 - raw_pass;
    let cap = 1.0 - p_conc_inf;
    let (block_fraction, pass_fraction) = if raw_block_fraction >= cap {
        (cap, p_conc_inf)
    } else if raw_block_fraction <= 0.0 {
        (0.0, 1.0)
    } else {
        (raw_block_fraction, raw_pass)
    };

    Ok(ActiveAttackPlan {
        mu_e,
        mu_b_prime,
        block_fraction,
        raw_block_fraction,
        pass_fraction,
        p_conc_inf,
        p_conc_cont,
        p_conc_total,
    })
}

/// Eve's information per sifted bit: the share of Bob's detections that
/// come from pulses Eve read conclusively.
pub fn active_eve_info(plan: &ActiveAttackPlan) -> f64 {
    if plan.is_capped() {
        1.0
    } else {
        (plan.p_conc_inf / plan.pass_fraction).min(1.0)
    }
}

/// Eve's best withdrawn intensity: `min(μ_E^max, μ/2)`.
pub fn optimal_mu_e(params: &ProtocolParams, length_km: f64) -> Result<f64> {
    let channel = params.channel_point(length_km)?;
    Ok(channel.mu_e_max.min(0.5 * params.mu()))
}

/// Length beyond which half the source intensity is lost, so Eve's optimal
/// withdrawal saturates at `μ/2` and blocking starts to pay.
pub fn critical_length(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain("delta", delta, "a finite attenuation > 0 dB/km"));
    }
    Ok(10.0 * 2f64.log10() / delta)
}

/// Active beam-splitting attack at Eve's optimal withdrawn intensity.
pub fn active_attack(params: &ProtocolParams, length_km: f64) -> Result<AttackReport> {
    let channel = params.channel_point(length_km)?;
    let plan = active_plan(params, length_km, optimal_mu_e(params, length_km)?)?;
    let i_ae = active_eve_info(&plan);
    let fully_insecure = i_ae >= 1.0 - FULL_INFORMATION_TOL;
    let qber_critical = if fully_insecure {
        0.0
    } else {
        critical_qber(i_ae)?
    };
    Ok(AttackReport {
        attack_kind: AttackKind::ActiveBeamSplitting,
        channel,
        i_ae,
        qber_critical,
        fully_insecure,
        plan: Some(plan),
    })
}

/// Shortest channel on which the active attack needs no added errors.
///
/// With `μ_E = μ/2`, Eve can block all her inconclusive pulses once
/// `1 − e^(−μ_B) ≤ (1 − e^(−μ/2))²`; the equality is solved for `μ_B` and
/// inverted through the attenuation law.
pub fn fully_insecure_length(params: &ProtocolParams) -> Result<f64> {
    let half_click = click_probability(0.5 * params.mu());
    let mu_b = -(-half_click * half_click).ln_1p();
    let mut length = 10.0 / params.delta() * (params.mu() / mu_b).log10();
    // Rounding can leave the closed form a hair short of the flag flipping.
    let mut nudge = length.abs().max(1.0) * f64::EPSILON;
    while !active_attack(params, length)?.fully_insecure {
        length += nudge;
        nudge *= 2.0;
    }
    Ok(length)
}

/// Secret bits per sent pulse left to Alice and Bob when Eve runs the
/// optimal active attack and adds no errors: Bob's conclusive rate times
/// `1 − I_AE`.
pub fn key_rate_margin(params: &ProtocolParams, length_km: f64) -> Result<f64> {
    let report = active_attack(params, length_km)?;
    Ok(click_probability(report.channel.mu_b) * (1.0 - report.i_ae))
}

/// Result of maximizing the key-rate margin over the source intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SourceOptimum {
    Secure { mu: f64, margin: f64 },
    /// No intensity in the search range leaves a positive margin.
    NoSecureKey { best_mu: f64, best_margin: f64 },
}

impl SourceOptimum {
    pub fn mu(&self) -> f64 {
        match *self {
            SourceOptimum::Secure { mu, .. } => mu,
            SourceOptimum::NoSecureKey { best_mu, .. } => best_mu,
        }
    }

    pub fn margin(&self) -> f64 {
        match *self {
            SourceOptimum::Secure { margin, .. } => margin,
            SourceOptimum::NoSecureKey { best_margin, .. } => best_margin,
        }
    }
}

/// Source intensity in `(0, SOURCE_MU_MAX]` that maximizes `key_rate_margin`.
pub fn optimal_source_intensity(delta: f64, decoy_fraction: f64, length_km: f64) -> Result<SourceOptimum> {
    // Validate once up front so the objective below cannot fail.
    let base = ProtocolParams::new(SOURCE_MU_MAX, decoy_fraction, delta)?;
    base.channel_point(length_km)?;
    let margin = |mu: f64| {
        base.with_mu(mu)
            .and_then(|p| key_rate_margin(&p, length_km))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let lo = SOURCE_MU_MAX / SOURCE_GRID_POINTS as f64;
    let (mu, best) =
        optimize::maximize_bracketed(margin, lo, SOURCE_MU_MAX, SOURCE_GRID_POINTS, SOURCE_XTOL);
    Ok(if best > 0.0 {
        SourceOptimum::Secure { mu, margin: best }
    } else {
        SourceOptimum::NoSecureKey {
            best_mu: mu,
            best_margin: best,
        }
    })
}
