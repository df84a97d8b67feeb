//! Pulse-by-pulse simulation of a COW link with ideal threshold detectors,
//! with and without the active beam-splitting attack.
//!
//! Randomness is counter based: pulse `i` of a run with seed `s` reads the
//! ChaCha8 keystream of `s` at words `[16 i, 16 i + 16)`, so a run can be cut
//! into chunks and evaluated on any number of threads with bit-identical
//! tallies. Each pulse consumes exactly eight `f64` draws:
//!
//! | draw | use |
//! |------|-----|
//! | 0 | pulse class |
//! | 1, 2 | Eve's detectors, slot 0 and slot 1 |
//! | 3 | blocking decision |
//! | 4, 5 | Bob's detectors, slot 0 and slot 1 |
//! | 6, 7 | unused |
//!
//! Bob's draws sit at the same positions with and without Eve, so runs with
//! the same seed share their randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::ActiveAttackPlan;
use crate::error::{Error, Result};
use crate::primitives::ProtocolParams;

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64, 16 keystream words per pulse";

const DRAWS_PER_PULSE: usize = 8;
const WORDS_PER_PULSE: u128 = 2 * DRAWS_PER_PULSE as u128;
const CHUNK_PULSES: u64 = 1 << 14;

/// z-score above which a Bob-side pattern counts as distorted.
pub const DISTORTION_Z: f64 = 5.0;

/// Margin, in standard errors, by which a blocking budget may exceed the
/// simulated inconclusive fraction before the plan is rejected.
const INFEASIBLE_Z: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseClass {
    Bit0,
    Bit1,
    Decoy,
}

impl PulseClass {
    pub const ALL: [PulseClass; 3] = [PulseClass::Bit0, PulseClass::Bit1, PulseClass::Decoy];

    /// Which of the two time slots carry light.
    pub fn occupied_slots(self) -> [bool; 2] {
        match self {
            PulseClass::Bit0 => [true, false],
            PulseClass::Bit1 => [false, true],
            PulseClass::Decoy => [true, true],
        }
    }

    pub fn is_information(self) -> bool {
        self != PulseClass::Decoy
    }

    /// Maps a uniform draw to a class with probabilities
    /// `((1−f)/2, (1−f)/2, f)`.
    pub fn from_uniform(u: f64, decoy_fraction: f64) -> PulseClass {
        if u < decoy_fraction {
            PulseClass::Decoy
        } else if u < decoy_fraction + 0.5 * (1.0 - decoy_fraction) {
            PulseClass::Bit0
        } else {
            PulseClass::Bit1
        }
    }
}

/// Empirical proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub count: u64,
    pub trials: u64,
    pub value: f64,
    pub std_err: f64,
}

impl Rate {
    pub fn new(count: u64, trials: u64) -> Rate {
        if trials == 0 {
            return Rate {
                count,
                trials,
                value: 0.0,
                std_err: 0.0,
            };
        }
        let n = trials as f64;
        let p = count as f64 / n;
        Rate {
            count,
            trials,
            value: p,
            std_err: (p * (1.0 - p) / n).sqrt(),
        }
    }
}

/// Counts for one pulse class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub sent: u64,
    pub eve_conclusive: u64,
    pub blocked: u64,
    pub bob_no_click: u64,
    pub bob_single_click: u64,
    pub bob_double_click: u64,
    /// Bob clicked and Eve had read the pulse.
    pub bob_click_eve_conclusive: u64,
}

impl ClassTally {
    fn merge(&mut self, other: &ClassTally) {
        self.sent += other.sent;
        self.eve_conclusive += other.eve_conclusive;
        self.blocked += other.blocked;
        self.bob_no_click += other.bob_no_click;
        self.bob_single_click += other.bob_single_click;
        self.bob_double_click += other.bob_double_click;
        self.bob_click_eve_conclusive += other.bob_click_eve_conclusive;
    }

    pub fn bob_clicks(&self) -> u64 {
        self.bob_single_click + self.bob_double_click
    }

    pub fn eve_conclusive_rate(&self) -> Rate {
        Rate::new(self.eve_conclusive, self.sent)
    }

    pub fn blocked_rate(&self) -> Rate {
        Rate::new(self.blocked, self.sent)
    }

    pub fn bob_click_rate(&self) -> Rate {
        Rate::new(self.bob_clicks(), self.sent)
    }

    pub fn pattern_rate(&self, pattern: ClickPattern) -> Rate {
        let count = match pattern {
            ClickPattern::NoClick => self.bob_no_click,
            ClickPattern::Single => self.bob_single_click,
            ClickPattern::Double => self.bob_double_click,
        };
        Rate::new(count, self.sent)
    }
}

/// Bob's detection outcome over the two time slots of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickPattern {
    NoClick,
    Single,
    Double,
}

impl ClickPattern {
    pub const ALL: [ClickPattern; 3] = [ClickPattern::NoClick, ClickPattern::Single, ClickPattern::Double];
}

/// Tallies of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub n_pulses: u64,
    pub seed: u64,
    pub rng: String,
    pub bit0: ClassTally,
    pub bit1: ClassTally,
    pub decoy: ClassTally,
}

impl TrialStats {
    pub fn class(&self, class: PulseClass) -> &ClassTally {
        match class {
            PulseClass::Bit0 => &self.bit0,
            PulseClass::Bit1 => &self.bit1,
            PulseClass::Decoy => &self.decoy,
        }
    }

    /// Both information classes pooled.
    pub fn information(&self) -> ClassTally {
        let mut t = self.bit0;
        t.merge(&self.bit1);
        t
    }

    pub fn total(&self) -> ClassTally {
        let mut t = self.information();
        t.merge(&self.decoy);
        t
    }

    /// Blocked share of information pulses, the quantity the blocking
    /// budget is defined on.
    pub fn blocked_rate(&self) -> Rate {
        self.information().blocked_rate()
    }

    /// Share of Bob's sifted (information-state) detections on which Eve's
    /// measurement was conclusive.
    pub fn eve_information_proxy(&self) -> Rate {
        let info = self.information();
        Rate::new(info.bob_click_eve_conclusive, info.bob_clicks())
    }
}

/// `1 − e^(−μ)`: probability that a coherent pulse of intensity `μ` is not vacuum.
fn click_probability(intensity: f64) -> f64 {
    -(-intensity).exp_m1()
}

fn click_from_uniform(intensity: f64, u: f64) -> bool {
    u < click_probability(intensity)
}

/// One ideal threshold detection of a coherent pulse.
pub fn detector_click<R: Rng + ?Sized>(intensity: f64, rng: &mut R) -> bool {
    click_from_uniform(intensity, rng.random())
}

#[derive(Debug, Clone, Copy)]
enum Link {
    Honest { mu_b: f64 },
    Active { mu_e: f64, mu_b_prime: f64, block_prob: f64 },
}

#[derive(Default, Clone, Copy)]
struct Tallies([ClassTally; 3]);

impl Tallies {
    fn merge(mut self, other: Tallies) -> Tallies {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            a.merge(b);
        }
        self
    }
}

fn class_index(class: PulseClass) -> usize {
    match class {
        PulseClass::Bit0 => 0,
        PulseClass::Bit1 => 1,
        PulseClass::Decoy => 2,
    }
}

fn run_chunk(seed: u64, start: u64, end: u64, decoy_fraction: f64, link: Link) -> Tallies {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(start as u128 * WORDS_PER_PULSE);
    let mut tallies = Tallies::default();
    for _ in start..end {
        let u: [f64; DRAWS_PER_PULSE] = std::array::from_fn(|_| rng.random());
        let class = PulseClass::from_uniform(u[0], decoy_fraction);
        let slots = class.occupied_slots();
        let t = &mut tallies.0[class_index(class)];
        t.sent += 1;

        let (bob_intensity, eve_conclusive, blocked) = match link {
            Link::Honest { mu_b } => (mu_b, false, false),
            Link::Active {
                mu_e,
                mu_b_prime,
                block_prob,
            } => {
                let conclusive = (slots[0] && click_from_uniform(mu_e, u[1]))
                    || (slots[1] && click_from_uniform(mu_e, u[2]));
                let blocked = !conclusive && u[3] < block_prob;
                (mu_b_prime, conclusive, blocked)
            }
        };
        t.eve_conclusive += eve_conclusive as u64;
        t.blocked += blocked as u64;

        let clicks = if blocked {
            0
        } else {
            (slots[0] && click_from_uniform(bob_intensity, u[4])) as u8
                + (slots[1] && click_from_uniform(bob_intensity, u[5])) as u8
        };
        match clicks {
            0 => t.bob_no_click += 1,
            1 => t.bob_single_click += 1,
            _ => t.bob_double_click += 1,
        }
        if clicks > 0 && eve_conclusive {
            t.bob_click_eve_conclusive += 1;
        }
    }
    tallies
}

fn simulate(params: &ProtocolParams, link: Link, n_pulses: u64, seed: u64) -> Result<TrialStats> {
    if n_pulses == 0 {
        return Err(Error::domain("n_pulses", 0.0, "at least one pulse"));
    }
    let f = params.decoy_fraction();
    let chunks = n_pulses.div_ceil(CHUNK_PULSES);
    let tallies = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_PULSES;
            let end = (start + CHUNK_PULSES).min(n_pulses);
            run_chunk(seed, start, end, f, link)
        })
        .reduce(Tallies::default, Tallies::merge);
    let [bit0, bit1, decoy] = tallies.0;
    Ok(TrialStats {
        n_pulses,
        seed,
        rng: RNG_ALGORITHM.to_string(),
        bit0,
        bit1,
        decoy,
    })
}

/// Honest link: every pulse attenuated to `μ_B` and detected by Bob.
pub fn simulate_no_attack(params: &ProtocolParams, length_km: f64, n_pulses: u64, seed: u64) -> Result<TrialStats> {
    let channel = params.channel_point(length_km)?;
    simulate(params, Link::Honest { mu_b: channel.mu_b }, n_pulses, seed)
}

/// Probability with which Eve blocks each inconclusive pulse.
///
/// Eve cannot tell an inconclusive decoy from an inconclusive information
/// pulse, so both are blocked alike. The probability is set so that the
/// blocked share of information pulses equals the plan's budget; at the
/// cap every inconclusive pulse is blocked.
pub fn blocking_probability(plan: &ActiveAttackPlan) -> f64 {
    if plan.block_fraction() == 0.0 {
        0.0
    } else {
        plan.block_fraction() / plan.block_cap()
    }
}

fn check_plan(params: &ProtocolParams, length_km: f64, plan: &ActiveAttackPlan) -> Result<()> {
    let channel = params.channel_point(length_km)?;
    let slack = 4.0 * f64::EPSILON * params.mu();
    if plan.mu_e() > channel.mu_e_max + slack {
        return Err(Error::WithdrawalExceedsLoss {
            mu_e: plan.mu_e(),
            mu_e_max: channel.mu_e_max,
        });
    }
    if (plan.mu_b_prime() - (params.mu() - plan.mu_e())).abs() > slack {
        return Err(Error::InvalidSpec(format!(
            "plan forwards {} but the source intensity {} minus withdrawal {} differs",
            plan.mu_b_prime(),
            params.mu(),
            plan.mu_e()
        )));
    }
    Ok(())
}

/// Active beam-splitting attack: Eve splits off `μ_E`, measures each slot,
/// blocks a share of her inconclusive pulses and forwards the rest to Bob
/// at `μ'_B` over a lossless line.
pub fn simulate_active_attack(
    params: &ProtocolParams,
    length_km: f64,
    plan: &ActiveAttackPlan,
    n_pulses: u64,
    seed: u64,
) -> Result<TrialStats> {
    check_plan(params, length_km, plan)?;
    let block_prob = blocking_probability(plan);
    let link = Link::Active {
        mu_e: plan.mu_e(),
        mu_b_prime: plan.mu_b_prime(),
        block_prob: block_prob.min(1.0),
    };
    let stats = simulate(params, link, n_pulses, seed)?;
    if block_prob > 1.0 {
        let info = stats.information();
        let inconclusive = Rate::new(info.sent - info.eve_conclusive, info.sent);
        if plan.block_fraction() > inconclusive.value + INFEASIBLE_Z * inconclusive.std_err {
            return Err(Error::InfeasibleBlocking {
                block_fraction: plan.block_fraction(),
                inconclusive: inconclusive.value,
            });
        }
    }
    Ok(stats)
}

/// Closed-form probability of a Bob-side click pattern for one pulse class.
///
/// `block` is the probability that the pulse is suppressed before Bob and
/// `bob_intensity` the per-slot intensity reaching him otherwise.
pub fn pattern_probability(class: PulseClass, pattern: ClickPattern, bob_intensity: f64, block: f64) -> f64 {
    let c = click_probability(bob_intensity);
    let pass = 1.0 - block;
    let (single, double) = if class.is_information() {
        (c, 0.0)
    } else {
        (2.0 * c * (1.0 - c), c * c)
    };
    match pattern {
        ClickPattern::NoClick => 1.0 - pass * (single + double),
        ClickPattern::Single => pass * single,
        ClickPattern::Double => pass * double,
    }
}

/// Per-class probability that Eve blocks a pulse under the i.i.d. policy.
pub fn class_block_probability(class: PulseClass, plan: &ActiveAttackPlan) -> f64 {
    let inconclusive = if class.is_information() {
        1.0 - plan.p_conc_inf()
    } else {
        1.0 - plan.p_conc_cont()
    };
    (blocking_probability(plan).min(1.0) * inconclusive).min(1.0)
}

/// One Bob-side pattern frequency under attack compared with the honest link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionRow {
    pub class: PulseClass,
    pub pattern: ClickPattern,
    pub attack: Rate,
    pub no_attack: Rate,
    /// Honest-link probability.
    pub no_attack_expected: f64,
    /// Probability under attack implied by the blocking policy.
    pub attack_expected: f64,
    /// Attack frequency against the honest-link probability, in null standard errors.
    pub z: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub mu_b: f64,
    pub mu_b_prime: f64,
    pub rows: Vec<DistortionRow>,
    pub any_flagged: bool,
}

impl DistortionReport {
    pub fn row(&self, class: PulseClass, pattern: ClickPattern) -> Option<&DistortionRow> {
        self.rows.iter().find(|r| r.class == class && r.pattern == pattern)
    }
}

/// Binomial z-score of an observed rate against a hypothesised probability.
pub fn null_z(observed: &Rate, expected: f64) -> f64 {
    let se = (expected * (1.0 - expected) / observed.trials as f64).sqrt();
    let diff = observed.value - expected;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Compares Bob's detection statistics under the attack with those of the
/// honest link, class by class. Decoy rows are omitted when no decoys are sent.
pub fn decoy_distortion(
    params: &ProtocolParams,
    length_km: f64,
    plan: &ActiveAttackPlan,
    n_pulses: u64,
    seed: u64,
) -> Result<DistortionReport> {
    let channel = params.channel_point(length_km)?;
    let attacked = simulate_active_attack(params, length_km, plan, n_pulses, seed)?;
    let honest = simulate_no_attack(params, length_km, n_pulses, seed)?;

    let classes: &[PulseClass] = if params.decoy_fraction() > 0.0 {
        &PulseClass::ALL
    } else {
        &PulseClass::ALL[..2]
    };
    let mut rows = Vec::with_capacity(classes.len() * 3);
    for &class in classes {
        let block = class_block_probability(class, plan);
        for pattern in ClickPattern::ALL {
            let attack = attacked.class(class).pattern_rate(pattern);
            let no_attack_expected = pattern_probability(class, pattern, channel.mu_b, 0.0);
            let z = null_z(&attack, no_attack_expected);
            rows.push(DistortionRow {
                class,
                pattern,
                attack,
                no_attack: honest.class(class).pattern_rate(pattern),
                no_attack_expected,
                attack_expected: pattern_probability(class, pattern, plan.mu_b_prime(), block),
                z,
                flagged: z.abs() > DISTORTION_Z,
            });
        }
    }
    Ok(DistortionReport {
        mu_b: channel.mu_b,
        mu_b_prime: plan.mu_b_prime(),
        any_flagged: rows.iter().any(|r| r.flagged),
        rows,
    })
}
