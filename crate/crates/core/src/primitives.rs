//! Intensities, channel attenuation and the information-theoretic quantities
//! used by both attack analyses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Legitimate-user configuration of a COW link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    mu: f64,
    decoy_fraction: f64,
    delta: f64,
}

impl ProtocolParams {
    /// `mu` is the source intensity (mean photon number per pulse),
    /// `decoy_fraction` the share of decoy pulses and `delta` the fiber
    /// attenuation in dB/km.
    pub fn new(mu: f64, decoy_fraction: f64, delta: f64) -> Result<Self> {
        check_intensity("mu", mu)?;
        if !(0.0..1.0).contains(&decoy_fraction) {
            return Err(Error::domain("decoy_fraction", decoy_fraction, "0 <= f < 1"));
        }
        check_delta(delta)?;
        Ok(ProtocolParams {
            mu,
            decoy_fraction,
            delta,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn decoy_fraction(&self) -> f64 {
        self.decoy_fraction
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Same link with a different source intensity.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        ProtocolParams::new(mu, self.decoy_fraction, self.delta)
    }

    pub fn channel_point(&self, length_km: f64) -> Result<ChannelPoint> {
        ChannelPoint::new(self, length_km)
    }
}

/// A channel length together with the intensities it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPoint {
    pub length_km: f64,
    /// Intensity Bob expects after fiber loss.
    pub mu_b: f64,
    /// Largest intensity Eve can divert without Bob seeing extra loss.
    pub mu_e_max: f64,
}

impl ChannelPoint {
    pub fn new(params: &ProtocolParams, length_km: f64) -> Result<Self> {
        let mu_b = attenuate(params.mu, params.delta, length_km)?;
        Ok(ChannelPoint {
            length_km,
            mu_b,
            mu_e_max: params.mu - mu_b,
        })
    }
}

fn check_intensity(name: &'static str, mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, mu, "a finite value > 0"))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("delta", delta, "a finite attenuation > 0 dB/km"))
    }
}

fn check_length(length_km: f64) -> Result<()> {
    // Infinite length is allowed: it is the asymptotic limit of the BS attack.
    if length_km >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain("length_km", length_km, "length >= 0 km"))
    }
}

/// Transmittance of `length_km` of fiber with loss `delta` dB/km.
pub(crate) fn transmittance(delta: f64, length_km: f64) -> f64 {
    10f64.powf(-delta * length_km / 10.0)
}

/// Intensity surviving `length_km` of fiber: `mu · 10^(−δl/10)`.
pub fn attenuate(mu: f64, delta: f64, length_km: f64) -> Result<f64> {
    check_intensity("mu", mu)?;
    check_delta(delta)?;
    check_length(length_km)?;
    Ok(mu * transmittance(delta, length_km))
}

/// The part of the source intensity lost in the fiber, which Eve may take
/// with a beam splitter and replace by a lossless line.
pub fn max_withdrawable_intensity(mu: f64, delta: f64, length_km: f64) -> Result<f64> {
    Ok(mu - attenuate(mu, delta, length_km)?)
}

/// Shannon entropy in bits of a two-outcome distribution `(a, b)`.
fn entropy2(a: f64, b: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(a) + term(b)
}

/// `h2(q) = −q·log2 q − (1−q)·log2(1−q)`, with `0·log 0 = 0`.
pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain("q", q, "a probability in [0, 1]"));
    }
    Ok(entropy2(q, 1.0 - q))
}

/// Inverse of `binary_entropy` on the branch `[0, 1/2]`, by bisection.
pub fn binary_entropy_inverse(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::domain("y", y, "an entropy in [0, 1] bits"));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    // 2^-50 of the initial width is well below the 1e-12 target.
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if entropy2(mid, 1.0 - mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Overlap `⟨ψ0|ψ1⟩` of `|√μ⟩⊗|0⟩` and `|0⟩⊗|√μ⟩`: two coherent/vacuum
/// overlaps of `e^(−μ/2)` each.
pub fn coherent_pair_overlap(mu_e: f64) -> Result<f64> {
    if mu_e.is_nan() || mu_e < 0.0 {
        return Err(Error::domain("mu_e", mu_e, "an intensity >= 0"));
    }
    Ok((-mu_e).exp())
}

/// Holevo quantity of two equiprobable pure states with overlap `s`.
///
/// The average state has eigenvalues `(1 ± s)/2`, so the result is
/// `h2((1 + s)/2)`. The small eigenvalue is formed directly to avoid
/// cancellation as `s → 1`.
pub fn holevo_two_pure(overlap: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::domain("overlap", overlap, "an overlap in [0, 1]"));
    }
    Ok(entropy2(0.5 * (1.0 + overlap), 0.5 * (1.0 - overlap)))
}
