//! Power-waster attacker model.
//!
//! The RO grid is reduced to a per-bit flip probability. The attacker times
//! the grid from the configuration clock and the number of words ahead of
//! the select window; corruption only happens inside the glitch interval,
//! while the grid itself stays active for the whole exposure.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::reconfig::Injector;

pub const MAX_WASTERS: u32 = 16_000;
pub const BAND_LOW_HZ: f64 = 1e5;
pub const BAND_HIGH_HZ: f64 = 1e6;

pub type TrialRng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackerError {
    #[error("power-waster count {0} exceeds {MAX_WASTERS}")]
    TooManyWasters(u32),
    #[error("{name} = {value} is outside [0, 1]")]
    NotAFraction { name: &'static str, value: f64 },
    #[error("toggle frequency {0} Hz is not a finite non-negative number")]
    BadFrequency(f64),
    #[error("exposure {exposure_ns} ns is shorter than the {glitch_ns} ns glitch")]
    ExposureTooShort { exposure_ns: u64, glitch_ns: u64 },
    #[error("word period must be positive")]
    ZeroWordPeriod,
    #[error("unknown power-waster kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum WasterKind {
    #[default]
    CombinationalRo,
    SelfClockedRo,
}

impl WasterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WasterKind::CombinationalRo => "combinational_ro",
            WasterKind::SelfClockedRo => "self_clocked_ro",
        }
    }
}

impl fmt::Display for WasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WasterKind {
    type Err = AttackerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "combinational_ro" => Ok(WasterKind::CombinationalRo),
            "self_clocked_ro" => Ok(WasterKind::SelfClockedRo),
            _ => Err(AttackerError::UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerWasterConfig {
    pub kind: WasterKind,
    pub count: u32,
    pub toggle_freq_hz: f64,
    pub duty: f64,
    pub p_max: f64,
}

impl Default for PowerWasterConfig {
    fn default() -> Self {
        Self {
            kind: WasterKind::CombinationalRo,
            count: MAX_WASTERS,
            toggle_freq_hz: 5e5,
            duty: 0.5,
            p_max: 0.1,
        }
    }
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), AttackerError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AttackerError::NotAFraction { name, value })
    }
}

impl PowerWasterConfig {
    pub fn validate(&self) -> Result<(), AttackerError> {
        if self.count > MAX_WASTERS {
            return Err(AttackerError::TooManyWasters(self.count));
        }
        check_fraction("duty", self.duty)?;
        check_fraction("p_max", self.p_max)?;
        if !self.toggle_freq_hz.is_finite() || self.toggle_freq_hz < 0.0 {
            return Err(AttackerError::BadFrequency(self.toggle_freq_hz));
        }
        Ok(())
    }
}

/// Per-bit flip probability for words transferred inside the glitch.
///
/// Linear in the number of instances and in duty cycle, gated by the
/// 10^5..10^6 Hz toggling band. Both RO kinds map to the same value.
pub fn bit_flip_probability(cfg: &PowerWasterConfig) -> f64 {
    let band = if (BAND_LOW_HZ..=BAND_HIGH_HZ).contains(&cfg.toggle_freq_hz) {
        1.0
    } else {
        0.0
    };
    cfg.p_max * (f64::from(cfg.count) / f64::from(MAX_WASTERS)) * cfg.duty * band
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPlan {
    pub glitch_start_ns: u64,
    /// Exclusive.
    pub glitch_end_ns: u64,
    pub activation_start_ns: u64,
    pub exposure_ns: u64,
    pub target_word_span: RangeInclusive<usize>,
}

impl ActivationPlan {
    pub fn activation_end_ns(&self) -> u64 {
        self.activation_start_ns + self.exposure_ns
    }

    pub fn glitch_duration_ns(&self) -> u64 {
        self.glitch_end_ns - self.glitch_start_ns
    }

    pub fn in_glitch(&self, t_ns: u64) -> bool {
        (self.glitch_start_ns..self.glitch_end_ns).contains(&t_ns)
    }
}

/// Times the RO grid around the select window.
///
/// The glitch covers the transfer of `select_span` widened by `guard_words`
/// on each side; the grid is active for `exposure_ns`, centred on the glitch
/// and shifted right if it would start before t = 0.
pub fn plan_activation(
    select_span: RangeInclusive<usize>,
    word_period_ns: u64,
    guard_words: usize,
    exposure_ns: u64,
) -> Result<ActivationPlan, AttackerError> {
    if word_period_ns == 0 {
        return Err(AttackerError::ZeroWordPeriod);
    }
    let lo = select_span.start().saturating_sub(guard_words);
    let hi = select_span.end() + guard_words;
    let glitch_start_ns = lo as u64 * word_period_ns;
    let glitch_end_ns = (hi as u64 + 1) * word_period_ns;
    let glitch_ns = glitch_end_ns - glitch_start_ns;
    if exposure_ns < glitch_ns {
        return Err(AttackerError::ExposureTooShort {
            exposure_ns,
            glitch_ns,
        });
    }
    // max(0, t_mid - exposure/2) with t_mid the glitch midpoint
    let activation_start_ns = (glitch_start_ns + glitch_end_ns).saturating_sub(exposure_ns) / 2;
    Ok(ActivationPlan {
        glitch_start_ns,
        glitch_end_ns,
        activation_start_ns,
        exposure_ns,
        target_word_span: lo..=hi,
    })
}

/// Plan for a grid left on for the whole upload: every word is exposed.
pub fn plan_continuous(word_count: usize, word_period_ns: u64, upload_ns: u64) -> ActivationPlan {
    let glitch_end_ns = word_count as u64 * word_period_ns;
    ActivationPlan {
        glitch_start_ns: 0,
        glitch_end_ns,
        activation_start_ns: 0,
        exposure_ns: upload_ns.max(glitch_end_ns),
        target_word_span: 0..=word_count.saturating_sub(1),
    }
}

/// Corrupts one in-flight word. Bits are visited from 31 down to 0, one
/// uniform draw each.
pub fn inject<R: Rng + ?Sized>(
    word: u32,
    t_ns: u64,
    plan: &ActivationPlan,
    p_bit: f64,
    rng: &mut R,
) -> u32 {
    if !plan.in_glitch(t_ns) {
        return word;
    }
    let mut out = word;
    for bit in (0..32).rev() {
        if rng.gen::<f64>() < p_bit {
            out ^= 1 << bit;
        }
    }
    out
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index`; depends only on the pair, not on scheduling.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    let golden_gamma = 0x9E37_79B9_7F4A_7C15u64;
    splitmix64(master_seed.wrapping_add(splitmix64(
        trial_index.wrapping_add(1).wrapping_mul(golden_gamma),
    )))
}

pub fn trial_rng(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Storage-path injector driven by an activation plan.
#[derive(Debug)]
pub struct GlitchInjector<'a, R> {
    pub plan: &'a ActivationPlan,
    pub p_bit: f64,
    pub rng: R,
}

impl<R: Rng> Injector for GlitchInjector<'_, R> {
    fn inject(&mut self, _index: usize, t_ns: u64, word: u32) -> u32 {
        inject(word, t_ns, self.plan, self.p_bit, &mut self.rng)
    }
}

/// Deterministic rewrite of one word index; used to force a FAR value.
#[derive(Debug, Clone, Copy)]
pub struct ForceWord {
    pub index: usize,
    pub value: u32,
}

impl Injector for ForceWord {
    fn inject(&mut self, index: usize, _t_ns: u64, word: u32) -> u32 {
        if index == self.index {
            self.value
        } else {
            word
        }
    }
}
