use serde::{Deserialize, Serialize};

use crate::attacks::{active_attack, active_eve_info, ActiveAttackPlan};
use crate::error::Result;
use crate::montecarlo::{
    blocking_probability, decoy_distortion, null_z, simulate_active_attack, simulate_no_attack,
    ClickPattern, DistortionReport, Rate, RNG_ALGORITHM,
};
use crate::primitives::{ChannelPoint, ProtocolParams};

use super::{TOOL_NAME, TOOL_VERSION};

/// Two-sided z threshold for a check to pass.
pub const PASS_Z: f64 = 4.0;

/// Checks whose expected successes or failures fall below this count are
/// reported as low power instead of being judged.
pub const MIN_EXPECTED_COUNT: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub mu: f64,
    pub delta: f64,
    pub decoy_fraction: f64,
    pub length_km: f64,
    pub n_pulses: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    LowPower,
}

/// One empirical rate compared with its analytic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub description: String,
    pub observed: f64,
    pub expected: f64,
    pub trials: u64,
    pub z: f64,
    pub status: CheckStatus,
}

impl Check {
    fn new(name: &str, description: &str, rate: Rate, expected: f64) -> Check {
        let n = rate.trials as f64;
        let z = null_z(&rate, expected);
        let status = if n * expected < MIN_EXPECTED_COUNT || n * (1.0 - expected) < MIN_EXPECTED_COUNT {
            CheckStatus::LowPower
        } else if z.abs() < PASS_Z {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Check {
            name: name.to_string(),
            description: description.to_string(),
            observed: rate.value,
            expected,
            trials: rate.trials,
            z,
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub config: ValidationConfig,
    pub channel: ChannelPoint,
    pub plan: ActiveAttackPlan,
    pub blocking_probability: f64,
    pub checks: Vec<Check>,
    pub distortion: DistortionReport,
    pub passed: bool,
}

/// Simulates the honest link and Eve's optimal active attack at one point
/// and compares every simulated rate with its closed form.
pub fn run_montecarlo_validation(params: &ProtocolParams, length_km: f64, n_pulses: u64, seed: u64) -> Result<ValidationReport> {
    let report = active_attack(params, length_km)?;
    let channel = report.channel;
    let plan = report.plan.expect("active attack always carries a plan");
    let bob_click = -(-channel.mu_b).exp_m1();
    let with_decoys = params.decoy_fraction() > 0.0;

    let honest = simulate_no_attack(params, length_km, n_pulses, seed)?;
    let attacked = simulate_active_attack(params, length_km, &plan, n_pulses, seed)?;
    let distortion = decoy_distortion(params, length_km, &plan, n_pulses, seed)?;

    let mut checks = vec![Check::new(
        "honest_bob_information_click_rate",
        "Bob's click rate on information pulses without Eve, 1 - exp(-mu_B)",
        honest.information().bob_click_rate(),
        bob_click,
    )];
    if with_decoys {
        checks.push(Check::new(
            "honest_bob_decoy_double_click_rate",
            "Bob's double-click rate on decoys without Eve, (1 - exp(-mu_B))^2",
            honest.decoy.pattern_rate(ClickPattern::Double),
            bob_click * bob_click,
        ));
    }
    checks.push(Check::new(
        "attack_bob_information_click_rate",
        "Bob's click rate on information pulses under attack, held at 1 - exp(-mu_B) by the blocking budget",
        attacked.information().bob_click_rate(),
        bob_click,
    ));
    checks.push(Check::new(
        "eve_information_conclusive_rate",
        "Eve's conclusive rate on information pulses, 1 - exp(-mu_E)",
        attacked.information().eve_conclusive_rate(),
        plan.p_conc_inf(),
    ));
    if with_decoys {
        checks.push(Check::new(
            "eve_decoy_conclusive_rate",
            "Eve's conclusive rate on decoy pulses, 1 - exp(-2 mu_E)",
            attacked.decoy.eve_conclusive_rate(),
            plan.p_conc_cont(),
        ));
    }
    checks.push(Check::new(
        "blocked_fraction",
        "share of information pulses blocked by Eve, b",
        attacked.blocked_rate(),
        plan.block_fraction(),
    ));
    checks.push(Check::new(
        "eve_information_proxy",
        "share of Bob's sifted detections that Eve read, min(1, p_conc_inf / (1 - b))",
        attacked.eve_information_proxy(),
        active_eve_info(&plan),
    ));

    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    Ok(ValidationReport {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        rng: RNG_ALGORITHM.to_string(),
        config: ValidationConfig {
            mu: params.mu(),
            delta: params.delta(),
            decoy_fraction: params.decoy_fraction(),
            length_km,
            n_pulses,
            seed,
        },
        channel,
        blocking_probability: blocking_probability(&plan),
        plan,
        checks,
        distortion,
        passed,
    })
}
