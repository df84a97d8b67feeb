use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::OutputFormat;
use crate::attacks::{
    active_attack, bs_attack, key_rate_margin, optimal_source_intensity, SourceOptimum,
};
use crate::error::{Error, Result};
use crate::primitives::ProtocolParams;

/// Evenly spaced channel lengths, written `min:max:step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl LengthRange {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let r = LengthRange { min, max, step };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min >= 0.0 && self.min.is_finite()) {
            return Err(Error::InvalidSpec(format!("length minimum {} must be >= 0", self.min)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidSpec(format!("length step {} must be > 0", self.step)));
        }
        if !(self.max >= self.min && self.max.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "length maximum {} must be >= minimum {}",
                self.max, self.min
            )));
        }
        Ok(())
    }

    /// Grid points from `min` up to `max` inclusive. Each point is computed
    /// as `min + i·step` so errors do not accumulate along the range.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

impl FromStr for LengthRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let parse = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidSpec(format!("bad number {p:?} in length range {s:?}")))
        };
        match parts.as_slice() {
            [single] => {
                let v = parse(single)?;
                LengthRange::new(v, v, 1.0)
            }
            [min, max, step] => LengthRange::new(parse(min)?, parse(max)?, parse(step)?),
            _ => Err(Error::InvalidSpec(format!(
                "length range {s:?} must look like min:max:step"
            ))),
        }
    }
}

impl fmt::Display for LengthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.step)
    }
}

/// Which attacks a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSet {
    pub bs: bool,
    pub active: bool,
}

impl AttackSet {
    pub const BOTH: AttackSet = AttackSet { bs: true, active: true };
}

impl FromStr for AttackSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = AttackSet {
            bs: false,
            active: false,
        };
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match item {
                "bs" => set.bs = true,
                "active" => set.active = true,
                other => {
                    return Err(Error::InvalidSpec(format!(
                        "unknown attack {other:?}; expected bs or active"
                    )))
                }
            }
        }
        if !(set.bs || set.active) {
            return Err(Error::InvalidSpec("no attack selected".into()));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mu_list: Vec<f64>,
    pub delta: f64,
    pub decoy_fraction: f64,
    pub lengths: LengthRange,
    pub attacks: AttackSet,
    pub output_path: PathBuf,
    pub format: OutputFormat,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.lengths.validate()?;
        if self.mu_list.is_empty() {
            return Err(Error::InvalidSpec("intensity list is empty".into()));
        }
        for &mu in &self.mu_list {
            ProtocolParams::new(mu, self.decoy_fraction, self.delta)?;
        }
        Ok(())
    }
}

/// One `(μ, l)` point of a sweep. Columns for attacks that were not
/// evaluated are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub length_km: f64,
    pub qber_bs: Option<f64>,
    pub qber_active: Option<f64>,
    pub i_ae_active: Option<f64>,
    pub mu_e_opt: Option<f64>,
    pub block_fraction: Option<f64>,
    pub fully_insecure: Option<bool>,
    pub margin: Option<f64>,
    pub mu_opt: Option<f64>,
}

fn evaluate_point(params: &ProtocolParams, length_km: f64, attacks: AttackSet) -> Result<SweepRow> {
    let mut row = SweepRow {
        mu: params.mu(),
        length_km,
        qber_bs: None,
        qber_active: None,
        i_ae_active: None,
        mu_e_opt: None,
        block_fraction: None,
        fully_insecure: None,
        margin: None,
        mu_opt: None,
    };
    if attacks.bs {
        row.qber_bs = Some(bs_attack(params, length_km)?.qber_critical);
    }
    if attacks.active {
        let report = active_attack(params, length_km)?;
        let plan = report.plan.expect("active attack always carries a plan");
        row.qber_active = Some(report.qber_critical);
        row.i_ae_active = Some(report.i_ae);
        row.mu_e_opt = Some(plan.mu_e());
        row.block_fraction = Some(plan.block_fraction());
        row.fully_insecure = Some(report.fully_insecure);
        row.margin = Some(key_rate_margin(params, length_km)?);
    }
    Ok(row)
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.length_km.total_cmp(&b.length_km)));
}

/// Critical-QBER curves of both attacks for each source intensity over a
/// range of channel lengths.
pub fn sweep_qber_curves(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let lengths = spec.lengths.points();
    let points: Vec<(f64, f64)> = spec
        .mu_list
        .iter()
        .flat_map(|&mu| lengths.iter().map(move |&l| (mu, l)))
        .collect();
    let mut rows = points
        .par_iter()
        .map(|&(mu, l)| {
            let params = ProtocolParams::new(mu, spec.decoy_fraction, spec.delta)?;
            evaluate_point(&params, l, spec.attacks)
        })
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

/// For each length, the source intensity that maximizes the key-rate margin
/// under the active attack, with both critical QBERs evaluated there.
pub fn sweep_optimal_intensity(delta: f64, decoy_fraction: f64, lengths: &LengthRange) -> Result<Vec<SweepRow>> {
    lengths.validate()?;
    ProtocolParams::new(1.0, decoy_fraction, delta)?;
    let mut rows = lengths
        .points()
        .par_iter()
        .map(|&l| {
            let optimum = optimal_source_intensity(delta, decoy_fraction, l)?;
            let params = ProtocolParams::new(optimum.mu(), decoy_fraction, delta)?;
            let mut row = evaluate_point(&params, l, AttackSet::BOTH)?;
            row.mu_opt = match optimum {
                SourceOptimum::Secure { mu, .. } => Some(mu),
                SourceOptimum::NoSecureKey { .. } => None,
            };
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.length_km.total_cmp(&b.length_km));
    Ok(rows)
}
