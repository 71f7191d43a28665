//! Software model of select-word fault injection on a multi-tenant FPGA's
//! partial-reconfiguration path.
//!
//! A tenant's partial bitstream is uploaded to a reconfiguration manager
//! while an attacker's power-wasters corrupt words in flight. Corrupting the
//! frame address redirects a CRC-valid bitstream into a co-tenant's region.
//! The crate models each piece of that path and runs seeded campaigns over it:
//!
//! - [`codec`]: bitstream wire format, CRC, frame-address packing
//! - [`fabric`]: PRR configuration memory with golden/live state
//! - [`reconfig`]: reconfiguration manager and its status register
//! - [`attacker`]: power-waster model, activation timing, bit-flip injection
//! - [`victims`]: adder-cluster and AES co-tenants, `flt_sig` encoding
//! - [`campaign`]: trial engine, outcome classes, parallel campaigns
//! - [`trial_log`], [`report`]: CSV trial log and summaries
//! - [`scenario`], [`cli`]: scenario files and the `flare` command

pub mod attacker;
pub mod campaign;
pub mod cli;
pub mod codec;
pub mod fabric;
pub mod reconfig;
pub mod report;
pub mod scenario;
pub mod trial_log;
pub mod victims;

pub use campaign::{
    classify_outcome, run_campaign, run_trial, AttackMode, OutcomeClass, TrialRecord,
};
pub use codec::{BitstreamImage, BuildSpec, FrameAddress};
pub use fabric::{Fabric, Geometry, Placement};
pub use scenario::{Scenario, ScenarioConfig};
