//! Scenario files.
//!
//! Scenarios are INI files with the sections `[fabric]`, `[victim]`,
//! `[power_waster]`, `[timing]`, `[bitstream]`, `[detectors]` and
//! `[campaign]`. Every key is optional and falls back to the value in
//! [`ScenarioConfig::default`]; unknown sections or keys are rejected.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::attacker::{
    bit_flip_probability, plan_activation, plan_continuous, splitmix64, ActivationPlan,
    PowerWasterConfig,
};
use crate::codec::{
    build_bitstream, pack_far, select_window, unpack_far, BitstreamImage, BuildSpec, FrameAddress,
};
use crate::fabric::{validate_placements, Fabric, Geometry, Placement};
use crate::victims::{
    AdderLayout, AdderScenario, AesScenario, VictimScenario, AES_DEFAULT_KEY, AES_DEFAULT_PLAINTEXT,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario file: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key {key:?} in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("[{section}] {key} = {value:?}: {reason}")]
    BadValue {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl ConfigError {
    fn invalid(e: impl std::fmt::Display) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActivationMode {
    /// Grid active around the select window only.
    #[default]
    Targeted,
    /// Grid active for the whole upload.
    Continuous,
}

impl ActivationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivationMode::Targeted => "targeted",
            ActivationMode::Continuous => "continuous",
        }
    }
}

impl FromStr for ActivationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "targeted" => Ok(ActivationMode::Targeted),
            "continuous" => Ok(ActivationMode::Continuous),
            _ => Err("expected targeted or continuous".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingConfig {
    pub word_period_ns: u64,
    pub exposure_ns: u64,
    pub guard_words: usize,
    pub activation: ActivationMode,
    /// Word count used for upload-duration arithmetic instead of the
    /// materialised bitstream length.
    pub total_word_count: Option<u64>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            word_period_ns: 10,
            exposure_ns: 200_000,
            guard_words: 0,
            activation: ActivationMode::Targeted,
            total_word_count: Some(4_000_000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitstreamConfig {
    pub far: FrameAddress,
    pub header_nops: usize,
    pub payload_frames: usize,
    pub names: Vec<String>,
}

impl Default for BitstreamConfig {
    fn default() -> Self {
        Self {
            far: FrameAddress::new(1, 0),
            header_nops: 2,
            payload_frames: 8,
            names: ["blinkall", "blinkcount", "blinkline"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorModel {
    /// Minimum continuous power-waster activation that trips the detector.
    pub threshold_ns: u64,
}

impl DetectorModel {
    pub fn detects(&self, exposure_ns: u64) -> bool {
        exposure_ns >= self.threshold_ns
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VictimConfig {
    Adders(AdderLayout),
    Aes {
        key: [u8; 16],
        plaintext: [u8; 16],
        aes1: Placement,
        aes2: Placement,
    },
}

impl VictimConfig {
    pub fn default_aes() -> Self {
        VictimConfig::Aes {
            key: AES_DEFAULT_KEY,
            plaintext: AES_DEFAULT_PLAINTEXT,
            aes1: Placement::new("aes1", 0, 0..=511),
            aes2: Placement::new("aes2", 3, 0..=511),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: Geometry,
    pub golden_seed: u64,
    pub victim: VictimConfig,
    pub waster: PowerWasterConfig,
    pub timing: TimingConfig,
    pub bitstream: BitstreamConfig,
    pub detectors: Vec<(String, DetectorModel)>,
    pub reset_between_trials: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            golden_seed: 0x5EED,
            victim: VictimConfig::Adders(AdderLayout::default()),
            waster: PowerWasterConfig::default(),
            timing: TimingConfig::default(),
            bitstream: BitstreamConfig::default(),
            detectors: vec![(
                "duration".into(),
                DetectorModel {
                    threshold_ns: 1_000_000,
                },
            )],
            reset_between_trials: true,
        }
    }
}

fn hex16(s: &str) -> Result<[u8; 16], String> {
    let s = s.trim_start_matches("0x");
    if s.len() != 32 {
        return Err("expected 32 hex digits".into());
    }
    let mut out = [0u8; 16];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|e| e.to_string())?;
    }
    Ok(out)
}

fn fmt_hex16(bytes: &[u8; 16]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let s = s.replace('_', "");
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).map_err(|e| e.to_string()),
        None => s
            .parse()
            .map_err(|e: std::num::ParseIntError| e.to_string()),
    }
}

fn parse_usize(s: &str) -> Result<usize, String> {
    parse_u64(s).and_then(|v| usize::try_from(v).map_err(|e| e.to_string()))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

/// `prr:lo-hi`, e.g. `0:0-511`.
fn parse_region(s: &str) -> Result<(usize, RangeInclusive<usize>), String> {
    let err = || "expected prr:lo-hi".to_string();
    let (prr, range) = s.split_once(':').ok_or_else(err)?;
    let (lo, hi) = range.split_once('-').ok_or_else(err)?;
    Ok((
        parse_usize(prr.trim())?,
        parse_usize(lo.trim())?..=parse_usize(hi.trim())?,
    ))
}

struct Section<'a> {
    name: &'a str,
    props: Option<&'a ini::Properties>,
}

impl Section<'_> {
    fn get<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        let Some(raw) = self.props.and_then(|p| p.get(key)) else {
            return Ok(None);
        };
        parse(raw.trim())
            .map(Some)
            .map_err(|reason| ConfigError::BadValue {
                section: self.name.to_string(),
                key: key.to_string(),
                value: raw.to_string(),
                reason,
            })
    }

    fn set<T>(
        &self,
        key: &str,
        slot: &mut T,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<(), ConfigError> {
        if let Some(v) = self.get(key, parse)? {
            *slot = v;
        }
        Ok(())
    }

    fn allow_only(&self, keys: &[&str]) -> Result<(), ConfigError> {
        if let Some(props) = self.props {
            for (k, _) in props.iter() {
                if !keys.contains(&k) {
                    return Err(ConfigError::UnknownKey {
                        section: self.name.to_string(),
                        key: k.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

const SECTIONS: &[&str] = &[
    "fabric",
    "victim",
    "power_waster",
    "timing",
    "bitstream",
    "detectors",
    "campaign",
];

impl ScenarioConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_ini_str(&text)
    }

    pub fn from_ini_str(text: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        for (name, props) in ini.iter() {
            match name {
                Some(n) if SECTIONS.contains(&n) => {}
                Some(n) => return Err(ConfigError::UnknownSection(n.to_string())),
                None if props.is_empty() => {}
                None => return Err(ConfigError::Syntax("keys outside any section".into())),
            }
        }
        let section = |name| Section {
            name,
            props: ini.section(Some(name)),
        };
        let mut cfg = ScenarioConfig::default();

        let s = section("fabric");
        s.allow_only(&["prr_count", "frames_per_prr", "frame_words", "golden_seed"])?;
        s.set("prr_count", &mut cfg.geometry.prr_count, parse_usize)?;
        s.set(
            "frames_per_prr",
            &mut cfg.geometry.frames_per_prr,
            parse_usize,
        )?;
        s.set("frame_words", &mut cfg.geometry.frame_words, parse_usize)?;
        s.set("golden_seed", &mut cfg.golden_seed, parse_u64)?;

        let s = section("victim");
        let kind = s
            .get("kind", |v| Ok(v.to_string()))?
            .unwrap_or_else(|| "adders".into());
        match kind.as_str() {
            "adders" => {
                s.allow_only(&[
                    "kind",
                    "adders_per_cluster",
                    "cluster1_prr",
                    "cluster2_prr",
                    "frames_per_adder",
                    "encoder_frames",
                ])?;
                let mut l = AdderLayout::default();
                s.set("adders_per_cluster", &mut l.n, parse_usize)?;
                s.set("cluster1_prr", &mut l.cluster1_prr, parse_usize)?;
                s.set("cluster2_prr", &mut l.cluster2_prr, parse_usize)?;
                s.set("frames_per_adder", &mut l.frames_per_adder, parse_usize)?;
                s.set("encoder_frames", &mut l.encoder_frames, parse_usize)?;
                cfg.victim = VictimConfig::Adders(l);
            }
            "aes" => {
                s.allow_only(&["kind", "aes1", "aes2", "key", "plaintext"])?;
                let VictimConfig::Aes {
                    mut key,
                    mut plaintext,
                    mut aes1,
                    mut aes2,
                } = VictimConfig::default_aes()
                else {
                    unreachable!()
                };
                s.set("key", &mut key, hex16)?;
                s.set("plaintext", &mut plaintext, hex16)?;
                if let Some((prr, r)) = s.get("aes1", parse_region)? {
                    aes1 = Placement::new("aes1", prr, r);
                }
                if let Some((prr, r)) = s.get("aes2", parse_region)? {
                    aes2 = Placement::new("aes2", prr, r);
                }
                cfg.victim = VictimConfig::Aes {
                    key,
                    plaintext,
                    aes1,
                    aes2,
                };
            }
            other => {
                return Err(ConfigError::BadValue {
                    section: "victim".into(),
                    key: "kind".into(),
                    value: other.into(),
                    reason: "expected adders or aes".into(),
                })
            }
        }

        let s = section("power_waster");
        s.allow_only(&["kind", "count", "toggle_freq_hz", "duty", "p_max"])?;
        let w = &mut cfg.waster;
        s.set("kind", &mut w.kind, |v| {
            v.parse()
                .map_err(|e: crate::attacker::AttackerError| e.to_string())
        })?;
        s.set("count", &mut w.count, |v| {
            parse_u64(v).and_then(|n| u32::try_from(n).map_err(|e| e.to_string()))
        })?;
        s.set("toggle_freq_hz", &mut w.toggle_freq_hz, parse_f64)?;
        s.set("duty", &mut w.duty, parse_f64)?;
        s.set("p_max", &mut w.p_max, parse_f64)?;

        let s = section("timing");
        s.allow_only(&[
            "word_period_ns",
            "exposure_ns",
            "guard_words",
            "activation",
            "total_word_count",
        ])?;
        let t = &mut cfg.timing;
        s.set("word_period_ns", &mut t.word_period_ns, parse_u64)?;
        s.set("exposure_ns", &mut t.exposure_ns, parse_u64)?;
        s.set("guard_words", &mut t.guard_words, parse_usize)?;
        s.set("activation", &mut t.activation, |v| v.parse())?;
        s.set("total_word_count", &mut t.total_word_count, |v| {
            if v == "none" {
                Ok(None)
            } else {
                parse_u64(v).map(Some)
            }
        })?;

        let s = section("bitstream");
        s.allow_only(&["far", "header_nops", "payload_frames", "names"])?;
        let b = &mut cfg.bitstream;
        s.set("far", &mut b.far, |v| {
            parse_u64(v).and_then(|w| u32::try_from(w).map(unpack_far).map_err(|e| e.to_string()))
        })?;
        s.set("header_nops", &mut b.header_nops, parse_usize)?;
        s.set("payload_frames", &mut b.payload_frames, parse_usize)?;
        s.set("names", &mut b.names, |v| {
            Ok(v.split(',')
                .map(|n| n.trim().to_string())
                .filter(|n| !n.is_empty())
                .collect())
        })?;

        if let Some(props) = ini.section(Some("detectors")) {
            let s = section("detectors");
            cfg.detectors = props
                .iter()
                .map(|(name, _)| {
                    let threshold_ns = s.get(name, parse_u64)?.unwrap_or_default();
                    Ok((name.to_string(), DetectorModel { threshold_ns }))
                })
                .collect::<Result<_, ConfigError>>()?;
        }

        let s = section("campaign");
        s.allow_only(&["reset_between_trials"])?;
        s.set(
            "reset_between_trials",
            &mut cfg.reset_between_trials,
            parse_bool,
        )?;

        Ok(cfg)
    }

    /// Renders the configuration as a scenario file that parses back to it.
    pub fn to_ini_string(&self) -> String {
        let mut s = String::new();
        let g = &self.geometry;
        let _ = writeln!(s, "[fabric]");
        let _ = writeln!(s, "prr_count = {}", g.prr_count);
        let _ = writeln!(s, "frames_per_prr = {}", g.frames_per_prr);
        let _ = writeln!(s, "frame_words = {}", g.frame_words);
        let _ = writeln!(s, "golden_seed = {:#x}", self.golden_seed);
        let _ = writeln!(s, "\n[victim]");
        match &self.victim {
            VictimConfig::Adders(l) => {
                let _ = writeln!(s, "kind = adders");
                let _ = writeln!(s, "adders_per_cluster = {}", l.n);
                let _ = writeln!(s, "cluster1_prr = {}", l.cluster1_prr);
                let _ = writeln!(s, "cluster2_prr = {}", l.cluster2_prr);
                let _ = writeln!(s, "frames_per_adder = {}", l.frames_per_adder);
                let _ = writeln!(s, "encoder_frames = {}", l.encoder_frames);
            }
            VictimConfig::Aes {
                key,
                plaintext,
                aes1,
                aes2,
            } => {
                let region = |p: &Placement| {
                    format!(
                        "{}:{}-{}",
                        p.prr_id,
                        p.frame_range.start(),
                        p.frame_range.end()
                    )
                };
                let _ = writeln!(s, "kind = aes");
                let _ = writeln!(s, "aes1 = {}", region(aes1));
                let _ = writeln!(s, "aes2 = {}", region(aes2));
                let _ = writeln!(s, "key = {}", fmt_hex16(key));
                let _ = writeln!(s, "plaintext = {}", fmt_hex16(plaintext));
            }
        }
        let w = &self.waster;
        let _ = writeln!(s, "\n[power_waster]");
        let _ = writeln!(s, "kind = {}", w.kind);
        let _ = writeln!(s, "count = {}", w.count);
        let _ = writeln!(s, "toggle_freq_hz = {}", w.toggle_freq_hz);
        let _ = writeln!(s, "duty = {}", w.duty);
        let _ = writeln!(s, "p_max = {}", w.p_max);
        let t = &self.timing;
        let _ = writeln!(s, "\n[timing]");
        let _ = writeln!(s, "word_period_ns = {}", t.word_period_ns);
        let _ = writeln!(s, "exposure_ns = {}", t.exposure_ns);
        let _ = writeln!(s, "guard_words = {}", t.guard_words);
        let _ = writeln!(s, "activation = {}", t.activation.as_str());
        match t.total_word_count {
            Some(n) => {
                let _ = writeln!(s, "total_word_count = {n}");
            }
            None => {
                let _ = writeln!(s, "total_word_count = none");
            }
        }
        let b = &self.bitstream;
        let _ = writeln!(s, "\n[bitstream]");
        let _ = writeln!(s, "far = {:#010x}", pack_far(b.far));
        let _ = writeln!(s, "header_nops = {}", b.header_nops);
        let _ = writeln!(s, "payload_frames = {}", b.payload_frames);
        let _ = writeln!(s, "names = {}", b.names.join(","));
        let _ = writeln!(s, "\n[detectors]");
        for (name, d) in &self.detectors {
            let _ = writeln!(s, "{name} = {}", d.threshold_ns);
        }
        let _ = writeln!(s, "\n[campaign]");
        let _ = writeln!(s, "reset_between_trials = {}", self.reset_between_trials);
        s
    }

    pub fn build(&self) -> Result<Scenario, ConfigError> {
        Scenario::new(self.clone())
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.replace('_', "")
        .parse()
        .map_err(|e: std::num::ParseFloatError| e.to_string())
}

/// Deterministic synthetic payload for a named bitstream.
pub fn synthetic_payload(name: &str, words: usize) -> Vec<u32> {
    let key = name
        .bytes()
        .fold(0xF1A2_E000u64, |h, b| splitmix64(h ^ u64::from(b)));
    (0..words as u64)
        .map(|i| (splitmix64(key.wrapping_add(i.wrapping_mul(0x9E37_79B9_7F4A_7C15))) >> 32) as u32)
        .collect()
}

/// A validated scenario with everything a trial needs precomputed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub victim: VictimScenario,
    pub placements: Vec<Placement>,
    /// Golden fabric; trials clone it.
    pub fabric: Fabric,
    pub bitstreams: Vec<(String, BitstreamImage)>,
    pub plan: ActivationPlan,
    pub p_bit: f64,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.waster.validate().map_err(ConfigError::invalid)?;
        let g = config.geometry;
        let fabric =
            Fabric::with_seeded_golden(g, config.golden_seed).map_err(ConfigError::invalid)?;

        let victim = match &config.victim {
            VictimConfig::Adders(layout) => VictimScenario::Adders(
                AdderScenario::from_layout(*layout).map_err(ConfigError::invalid)?,
            ),
            VictimConfig::Aes {
                key,
                plaintext,
                aes1,
                aes2,
            } => VictimScenario::Aes(AesScenario::new(
                *key,
                *plaintext,
                aes1.clone(),
                aes2.clone(),
            )),
        };
        let placements = victim.placements();
        validate_placements(&g, &placements).map_err(ConfigError::invalid)?;

        let b = &config.bitstream;
        if b.names.is_empty() {
            return Err(ConfigError::Invalid("bitstream name list is empty".into()));
        }
        if b.payload_frames == 0 {
            return Err(ConfigError::Invalid(
                "payload_frames must be positive".into(),
            ));
        }
        let prr = usize::from(b.far.prr_id);
        let first = b.far.frame_offset as usize;
        let last = first + b.payload_frames - 1;
        if prr >= g.prr_count || last >= g.frames_per_prr {
            return Err(ConfigError::Invalid(format!(
                "intended write {} + {} frames does not fit the fabric",
                b.far, b.payload_frames
            )));
        }
        if let Some(p) = placements.iter().find(|p| {
            p.prr_id == prr && *p.frame_range.start() <= last && first <= *p.frame_range.end()
        }) {
            return Err(ConfigError::Invalid(format!(
                "intended write {} overlaps victim {}",
                b.far, p.unit_id
            )));
        }

        let bitstreams = b
            .names
            .iter()
            .map(|name| {
                let spec = BuildSpec {
                    far: b.far,
                    header_nop_count: b.header_nops,
                    frame_payload: synthetic_payload(name, b.payload_frames * g.frame_words),
                };
                build_bitstream(&spec, g.frame_words)
                    .map(|img| (name.clone(), img))
                    .map_err(ConfigError::invalid)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let t = &config.timing;
        if t.word_period_ns == 0 {
            return Err(ConfigError::Invalid(
                "word_period_ns must be positive".into(),
            ));
        }
        let image = &bitstreams[0].1;
        let plan = match t.activation {
            ActivationMode::Targeted => plan_activation(
                select_window(image),
                t.word_period_ns,
                t.guard_words,
                t.exposure_ns,
            )
            .map_err(ConfigError::invalid)?,
            ActivationMode::Continuous => {
                let upload =
                    t.total_word_count.unwrap_or(image.words.len() as u64) * t.word_period_ns;
                plan_continuous(image.words.len(), t.word_period_ns, upload)
            }
        };
        if config.detectors.iter().any(|(_, d)| d.threshold_ns == 0) {
            return Err(ConfigError::Invalid(
                "detector thresholds must be positive".into(),
            ));
        }

        Ok(Self {
            p_bit: bit_flip_probability(&config.waster),
            config,
            victim,
            placements,
            fabric,
            bitstreams,
            plan,
        })
    }

    pub fn default_adders() -> Self {
        Self::new(ScenarioConfig::default()).expect("default scenario is valid")
    }

    pub fn intended_far(&self) -> FrameAddress {
        self.config.bitstream.far
    }

    /// Words transferred for one full upload, for timing arithmetic.
    pub fn upload_word_count(&self) -> u64 {
        self.config
            .timing
            .total_word_count
            .unwrap_or(self.bitstreams[0].1.words.len() as u64)
    }

    pub fn upload_duration_ns(&self) -> u64 {
        self.upload_word_count() * self.config.timing.word_period_ns
    }

    /// Reported attack duration: how long the power-wasters are on.
    pub fn exposure_ns(&self) -> u64 {
        self.plan.exposure_ns
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacker::WasterKind;

    #[test]
    fn default_round_trips_through_ini() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_ini_string();
        assert_eq!(ScenarioConfig::from_ini_str(&text).unwrap(), cfg);

        let aes = ScenarioConfig {
            victim: VictimConfig::default_aes(),
            ..ScenarioConfig::default()
        };
        assert_eq!(
            ScenarioConfig::from_ini_str(&aes.to_ini_string()).unwrap(),
            aes
        );
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(
            ScenarioConfig::from_ini_str("").unwrap(),
            ScenarioConfig::default()
        );
    }

    #[test]
    fn partial_override() {
        let cfg = ScenarioConfig::from_ini_str(
            "[power_waster]\nkind = self_clocked_ro\ncount = 8000\n[bitstream]\nfar = 0x02000010\n",
        )
        .unwrap();
        assert_eq!(cfg.waster.kind, WasterKind::SelfClockedRo);
        assert_eq!(cfg.waster.count, 8000);
        assert_eq!(cfg.bitstream.far, FrameAddress::new(2, 16));
        assert_eq!(cfg.geometry, Geometry::default());
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        assert!(matches!(
            ScenarioConfig::from_ini_str("[nope]\na=1\n"),
            Err(ConfigError::UnknownSection(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_ini_str("[fabric]\nprr = 3\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            ScenarioConfig::from_ini_str("[timing]\nword_period_ns = ten\n"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ScenarioConfig::from_ini_str("[victim]\nkind = fir\n"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn build_validates() {
        let mut cfg = ScenarioConfig::default();
        cfg.waster.count = 20_000;
        assert!(cfg.build().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.bitstream.far = FrameAddress::new(0, 0);
        assert!(cfg.build().is_err(), "intended write over a victim");

        let mut cfg = ScenarioConfig::default();
        cfg.bitstream.far = FrameAddress::new(1, 1020);
        assert!(cfg.build().is_err(), "intended write past the region end");

        let cfg = ScenarioConfig {
            victim: VictimConfig::Adders(AdderLayout {
                cluster2_prr: 0,
                ..AdderLayout::default()
            }),
            ..ScenarioConfig::default()
        };
        assert!(cfg.build().is_err(), "clusters overlap");

        let mut cfg = ScenarioConfig::default();
        cfg.timing.exposure_ns = 5;
        assert!(cfg.build().is_err());
    }

    #[test]
    fn default_scenario_shape() {
        let s = Scenario::default_adders();
        assert_eq!(s.bitstreams.len(), 3);
        let img = &s.bitstreams[0].1;
        assert_eq!(select_window(img), 3..=4);
        assert_eq!(s.plan.target_word_span, 3..=4);
        assert!((s.p_bit - 0.05).abs() < 1e-15);
        assert_eq!(s.upload_duration_ns(), 40_000_000);
        assert_eq!(s.exposure_ns(), 200_000);
        assert_ne!(s.bitstreams[0].1.payload(), s.bitstreams[1].1.payload());
    }

    #[test]
    fn continuous_mode_exposes_whole_upload() {
        let mut cfg = ScenarioConfig::default();
        cfg.timing.activation = ActivationMode::Continuous;
        let s = cfg.build().unwrap();
        assert_eq!(s.exposure_ns(), 40_000_000);
        assert_eq!(
            s.plan.target_word_span,
            0..=s.bitstreams[0].1.words.len() - 1
        );
    }
}
