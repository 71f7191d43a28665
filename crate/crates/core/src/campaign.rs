//! Seeded Monte Carlo attack campaigns.
//!
//! Every trial draws from its own RNG stream, seeded from
//! `(master_seed, trial_index)`, and (by default) starts from a golden
//! fabric. The record sequence is therefore the same for any worker count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::attacker::{trial_rng, trial_seed, ForceWord, GlitchInjector, WasterKind};
use crate::codec::{pack_far, FrameAddress};
use crate::fabric::Fabric;
use crate::reconfig::{BlockReason, ReconfigManager, RmError, RmOutcome, RmState};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeClass {
    SuccessIntended,
    Misroute,
    CrcBlock,
    FormatBlock,
    AddrOorBlock,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 5] = [
        OutcomeClass::SuccessIntended,
        OutcomeClass::Misroute,
        OutcomeClass::CrcBlock,
        OutcomeClass::FormatBlock,
        OutcomeClass::AddrOorBlock,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::SuccessIntended => "SUCCESS_INTENDED",
            OutcomeClass::Misroute => "MISROUTE",
            OutcomeClass::CrcBlock => "CRC_BLOCK",
            OutcomeClass::FormatBlock => "FORMAT_BLOCK",
            OutcomeClass::AddrOorBlock => "ADDR_OOR_BLOCK",
        }
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown outcome {s:?}"))
    }
}

pub fn classify_outcome(intended: FrameAddress, rm: &RmOutcome) -> OutcomeClass {
    match rm.final_state {
        RmState::Done => {
            let stored = rm.stored_image.as_ref().map(|img| img.far());
            if stored == Some(intended) {
                OutcomeClass::SuccessIntended
            } else {
                OutcomeClass::Misroute
            }
        }
        RmState::Blocked(BlockReason::CrcFail) => OutcomeClass::CrcBlock,
        RmState::Blocked(BlockReason::AddrOor) => OutcomeClass::AddrOorBlock,
        RmState::Blocked(BlockReason::BadFormat) => OutcomeClass::FormatBlock,
        s => unreachable!("reconfiguration finished in non-terminal state {s}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub seed: u64,
    pub bitstream: String,
    pub outcome: OutcomeClass,
    pub far_intended: u32,
    /// Word found at the FAR position of storage after injection.
    pub far_stored: u32,
    /// `(word_index, bit_index)` of every flipped bit.
    pub flips: Vec<(usize, u8)>,
    pub victims_hit: Vec<String>,
    pub flt_sig: u32,
    pub dos: bool,
    pub exposure_ns: u64,
    pub detected: Vec<(String, bool)>,
    pub waster_kind: WasterKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackMode {
    #[default]
    Stochastic,
    /// Replace the stored FAR word with this value; no random faults.
    ForceFar(u32),
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("trial count must be at least 1")]
    ZeroTrials,
    #[error(transparent)]
    Rm(#[from] RmError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Runs one trial on a fresh copy of the scenario's golden fabric.
pub fn run_trial(
    scenario: &Scenario,
    master_seed: u64,
    trial_index: u64,
) -> Result<TrialRecord, CampaignError> {
    run_trial_with(scenario, master_seed, trial_index, AttackMode::Stochastic)
}

pub fn run_trial_with(
    scenario: &Scenario,
    master_seed: u64,
    trial_index: u64,
    mode: AttackMode,
) -> Result<TrialRecord, CampaignError> {
    let mut fabric = scenario.fabric.clone();
    run_trial_on(scenario, &mut fabric, master_seed, trial_index, mode)
}

/// Runs one trial against `fabric`, resetting it first unless the scenario
/// keeps corruption across trials.
pub fn run_trial_on(
    scenario: &Scenario,
    fabric: &mut Fabric,
    master_seed: u64,
    trial_index: u64,
    mode: AttackMode,
) -> Result<TrialRecord, CampaignError> {
    if scenario.config.reset_between_trials {
        fabric.reset_to_golden();
    }
    let seed = trial_seed(master_seed, trial_index);
    let (name, image) =
        &scenario.bitstreams[(trial_index % scenario.bitstreams.len() as u64) as usize];
    let period = scenario.config.timing.word_period_ns;

    let rm = ReconfigManager::new();
    let outcome = match mode {
        AttackMode::Stochastic => {
            let mut injector = GlitchInjector {
                plan: &scenario.plan,
                p_bit: scenario.p_bit,
                rng: trial_rng(seed),
            };
            rm.run_reconfiguration(&image.words, &mut injector, period, fabric)?
        }
        AttackMode::ForceFar(value) => {
            let mut injector = ForceWord {
                index: image.far_index,
                value,
            };
            rm.run_reconfiguration(&image.words, &mut injector, period, fabric)?
        }
    };

    let flips = image
        .words
        .iter()
        .zip(&outcome.stored_words)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .flat_map(|(i, (a, b))| {
            let diff = a ^ b;
            (0..32u8)
                .rev()
                .filter(move |bit| diff >> bit & 1 == 1)
                .map(move |bit| (i, bit))
        })
        .collect();

    let intended = scenario.intended_far();
    let class = classify_outcome(intended, &outcome);
    let corrupted = fabric.diff_corrupted_units(&scenario.placements);
    let flt_sig = scenario.victim.flt_sig(&corrupted).0;
    let exposure_ns = scenario.exposure_ns();

    Ok(TrialRecord {
        trial_index,
        seed,
        bitstream: name.clone(),
        outcome: class,
        far_intended: pack_far(intended),
        far_stored: outcome.stored_words[image.far_index],
        flips,
        victims_hit: corrupted.into_iter().map(|(u, _)| u).collect(),
        flt_sig,
        dos: class != OutcomeClass::SuccessIntended,
        exposure_ns,
        detected: scenario
            .config
            .detectors
            .iter()
            .map(|(n, d)| (n.clone(), d.detects(exposure_ns)))
            .collect(),
        waster_kind: scenario.config.waster.kind,
    })
}

pub fn auto_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `trials` independent trials on `workers` threads. Records come back
/// in trial-index order.
pub fn run_campaign(
    scenario: &Scenario,
    master_seed: u64,
    trials: u64,
    workers: usize,
) -> Result<Vec<TrialRecord>, CampaignError> {
    run_campaign_with(
        scenario,
        master_seed,
        trials,
        workers,
        AttackMode::Stochastic,
    )
}

pub fn run_campaign_with(
    scenario: &Scenario,
    master_seed: u64,
    trials: u64,
    workers: usize,
    mode: AttackMode,
) -> Result<Vec<TrialRecord>, CampaignError> {
    if trials == 0 {
        return Err(CampaignError::ZeroTrials);
    }
    // Without resets each trial sees its predecessors' writes, so the
    // sequence has to run in order on one fabric.
    if !scenario.config.reset_between_trials || workers <= 1 {
        let mut fabric = scenario.fabric.clone();
        return (0..trials)
            .map(|i| run_trial_on(scenario, &mut fabric, master_seed, i, mode))
            .collect();
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?;
    pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map_init(
                || scenario.fabric.clone(),
                |fabric, i| run_trial_on(scenario, fabric, master_seed, i, mode),
            )
            .collect()
    })
}
