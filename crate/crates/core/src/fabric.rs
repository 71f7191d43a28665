//! Configuration-memory model of a multi-tenant fabric.
//!
//! The fabric is a set of partially reconfigurable regions (PRRs), each a run
//! of fixed-size frames. `golden` is the configuration every tenant expects;
//! `live` is what is actually loaded. Writes land in `live` and stay there
//! until [`Fabric::reset_to_golden`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use thiserror::Error;

use crate::codec::FrameAddress;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub prr_count: usize,
    pub frames_per_prr: usize,
    pub frame_words: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            prr_count: 8,
            frames_per_prr: 1024,
            frame_words: 4,
        }
    }
}

impl Geometry {
    pub fn total_frames(&self) -> usize {
        self.prr_count * self.frames_per_prr
    }

    pub fn total_words(&self) -> usize {
        self.total_frames() * self.frame_words
    }

    fn frame_slot(&self, prr: usize, frame: usize) -> usize {
        prr * self.frames_per_prr + frame
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FabricError {
    #[error("ADDR_OOR: {far} is outside {prr_count} PRRs x {frames_per_prr} frames")]
    AddrOutOfRange {
        far: FrameAddress,
        prr_count: usize,
        frames_per_prr: usize,
    },
    #[error("payload of {len} words is not a multiple of frame_words={frame_words}")]
    RaggedPayload { len: usize, frame_words: usize },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("placement {unit}: {reason}")]
    Placement { unit: String, reason: String },
}

/// Logical location of one victim unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub unit_id: String,
    pub prr_id: usize,
    pub frame_range: RangeInclusive<usize>,
}

impl Placement {
    pub fn new(
        unit_id: impl Into<String>,
        prr_id: usize,
        frame_range: RangeInclusive<usize>,
    ) -> Self {
        Self {
            unit_id: unit_id.into(),
            prr_id,
            frame_range,
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}@{}:{}-{}",
            self.unit_id,
            self.prr_id,
            self.frame_range.start(),
            self.frame_range.end()
        )
    }
}

/// Checks that placements fit the geometry and do not overlap within a PRR.
pub fn validate_placements(
    geometry: &Geometry,
    placements: &[Placement],
) -> Result<(), FabricError> {
    let err = |p: &Placement, reason: String| FabricError::Placement {
        unit: p.unit_id.clone(),
        reason,
    };
    let mut by_prr: BTreeMap<usize, Vec<&Placement>> = BTreeMap::new();
    for p in placements {
        if p.prr_id >= geometry.prr_count {
            return Err(err(p, format!("PRR {} out of range", p.prr_id)));
        }
        if p.frame_range.is_empty() || *p.frame_range.end() >= geometry.frames_per_prr {
            return Err(err(
                p,
                format!("frame range {:?} does not fit", p.frame_range),
            ));
        }
        by_prr.entry(p.prr_id).or_default().push(p);
    }
    for units in by_prr.values_mut() {
        units.sort_by_key(|p| *p.frame_range.start());
        for pair in units.windows(2) {
            if pair[1].frame_range.start() <= pair[0].frame_range.end() {
                return Err(err(pair[1], format!("overlaps {}", pair[0].unit_id)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WriteReport {
    pub frames_written: Vec<(usize, usize)>,
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeltaDigest(pub u32);

const FNV_OFFSET: u32 = 0x811C_9DC5;
const FNV_PRIME: u32 = 0x0100_0193;

fn fnv1a(mut h: u32, bytes: &[u8]) -> u32 {
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic golden contents: a splitmix64 stream keyed by `seed`.
pub fn seeded_golden(geometry: &Geometry, seed: u64) -> Vec<u32> {
    let mut state = seed;
    (0..geometry.total_words())
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            (crate::attacker::splitmix64(state) >> 32) as u32
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Fabric {
    geometry: Geometry,
    golden: Arc<[u32]>,
    live: Vec<u32>,
    // Frames whose live contents may differ from golden.
    dirty: Vec<bool>,
    dirty_list: Vec<usize>,
    /// Resource figures for documentation; never read by the model.
    pub lut_budget: BTreeMap<String, f64>,
}

impl Fabric {
    pub fn new(geometry: Geometry, golden: Vec<u32>) -> Result<Self, FabricError> {
        if geometry.prr_count == 0 || geometry.prr_count > 256 {
            return Err(FabricError::Geometry(format!(
                "prr_count {} must be in 1..=256",
                geometry.prr_count
            )));
        }
        if geometry.frames_per_prr == 0 || geometry.frames_per_prr > (1 << 24) {
            return Err(FabricError::Geometry(format!(
                "frames_per_prr {} must be in 1..=2^24",
                geometry.frames_per_prr
            )));
        }
        if geometry.frame_words == 0 {
            return Err(FabricError::Geometry("frame_words must be positive".into()));
        }
        if golden.len() != geometry.total_words() {
            return Err(FabricError::Geometry(format!(
                "golden image has {} words, geometry needs {}",
                golden.len(),
                geometry.total_words()
            )));
        }
        Ok(Self {
            geometry,
            live: golden.clone(),
            golden: golden.into(),
            dirty: vec![false; geometry.total_frames()],
            dirty_list: Vec::new(),
            lut_budget: default_lut_budget(),
        })
    }

    pub fn with_seeded_golden(geometry: Geometry, seed: u64) -> Result<Self, FabricError> {
        let golden = seeded_golden(&geometry, seed);
        Self::new(geometry, golden)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn golden(&self) -> &[u32] {
        &self.golden
    }

    pub fn live(&self) -> &[u32] {
        &self.live
    }

    pub fn live_frame(&self, prr: usize, frame: usize) -> &[u32] {
        let fw = self.geometry.frame_words;
        let start = self.geometry.frame_slot(prr, frame) * fw;
        &self.live[start..start + fw]
    }

    pub fn golden_frame(&self, prr: usize, frame: usize) -> &[u32] {
        let fw = self.geometry.frame_words;
        let start = self.geometry.frame_slot(prr, frame) * fw;
        &self.golden[start..start + fw]
    }

    /// Writes whole frames starting at `far`, clipping at the end of the PRR.
    pub fn apply_frames(
        &mut self,
        far: FrameAddress,
        payload: &[u32],
    ) -> Result<WriteReport, FabricError> {
        let g = self.geometry;
        let prr = usize::from(far.prr_id);
        let offset = far.frame_offset as usize;
        if prr >= g.prr_count || offset >= g.frames_per_prr {
            return Err(FabricError::AddrOutOfRange {
                far,
                prr_count: g.prr_count,
                frames_per_prr: g.frames_per_prr,
            });
        }
        if !payload.len().is_multiple_of(g.frame_words) {
            return Err(FabricError::RaggedPayload {
                len: payload.len(),
                frame_words: g.frame_words,
            });
        }

        let mut report = WriteReport::default();
        for (i, frame) in payload.chunks_exact(g.frame_words).enumerate() {
            let target = offset + i;
            if target >= g.frames_per_prr {
                report.clipped = true;
                break;
            }
            let slot = g.frame_slot(prr, target);
            self.live[slot * g.frame_words..(slot + 1) * g.frame_words].copy_from_slice(frame);
            if !self.dirty[slot] {
                self.dirty[slot] = true;
                self.dirty_list.push(slot);
            }
            report.frames_written.push((prr, target));
        }
        Ok(report)
    }

    pub fn is_pristine(&self) -> bool {
        self.dirty_list.is_empty() || self.live[..] == self.golden[..]
    }

    pub fn reset_to_golden(&mut self) {
        let fw = self.geometry.frame_words;
        for slot in self.dirty_list.drain(..) {
            let words = slot * fw..(slot + 1) * fw;
            self.live[words.clone()].copy_from_slice(&self.golden[words]);
            self.dirty[slot] = false;
        }
    }

    /// Digest of the live/golden difference over a unit's frames, or `None`
    /// when the unit is intact. The digest is always odd.
    pub fn unit_delta(&self, placement: &Placement) -> Option<DeltaDigest> {
        let g = self.geometry;
        let first = g.frame_slot(placement.prr_id, *placement.frame_range.start());
        let last = g.frame_slot(placement.prr_id, *placement.frame_range.end());
        if !self.dirty[first..=last].iter().any(|&d| d) {
            return None;
        }
        let fw = g.frame_words;
        let mut changed = false;
        let mut h = FNV_OFFSET;
        for frame in placement.frame_range.clone() {
            let slot = g.frame_slot(placement.prr_id, frame);
            let words = slot * fw..(slot + 1) * fw;
            for (l, o) in self.live[words.clone()].iter().zip(&self.golden[words]) {
                let x = l ^ o;
                changed |= x != 0;
                h = fnv1a(h, &(frame as u32).to_be_bytes());
                h = fnv1a(h, &x.to_be_bytes());
            }
        }
        changed.then_some(DeltaDigest(h | 1))
    }

    /// Units whose frames differ between live and golden, in placement order.
    pub fn diff_corrupted_units(&self, placements: &[Placement]) -> Vec<(String, DeltaDigest)> {
        placements
            .iter()
            .filter_map(|p| self.unit_delta(p).map(|d| (p.unit_id.clone(), d)))
            .collect()
    }
}

fn default_lut_budget() -> BTreeMap<String, f64> {
    [
        ("board_luts", 53_200.0),
        ("aes_instance_luts", 10_223.0),
        ("adder_clusters_and_encoders_pct", 21.2),
        ("aes_pair_pct", 38.6),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}
