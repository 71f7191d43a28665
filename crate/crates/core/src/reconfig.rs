//! Reconfiguration manager: stores an incoming bitstream word by word,
//! validates it, and writes it into the fabric at the address it carries.
//!
//! Faults are applied on the storage path, so format and CRC checks see the
//! already-corrupted words. The status register is shared with every tenant
//! and can be read at any time through a [`StatusHandle`].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::codec::{compute_crc, parse_bitstream, BitstreamImage, CodecError};
use crate::fabric::{Fabric, FabricError, WriteReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockReason {
    BadFormat,
    CrcFail,
    AddrOor,
}

impl BlockReason {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockReason::BadFormat => "BAD_FORMAT",
            BlockReason::CrcFail => "CRC_FAIL",
            BlockReason::AddrOor => "ADDR_OOR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RmState {
    Idle,
    Loading,
    CrcCheck,
    Configuring,
    Done,
    Blocked(BlockReason),
}

impl RmState {
    pub fn is_busy(self) -> bool {
        matches!(
            self,
            RmState::Loading | RmState::CrcCheck | RmState::Configuring
        )
    }

    /// Whether `self -> next` is a legal single step.
    pub fn can_step_to(self, next: RmState) -> bool {
        use RmState::*;
        matches!(
            (self, next),
            (Idle | Done | Blocked(_), Loading)
                | (Loading, CrcCheck)
                | (Loading, Blocked(BlockReason::BadFormat))
                | (CrcCheck, Configuring)
                | (CrcCheck, Blocked(BlockReason::CrcFail))
                | (Configuring, Done)
                | (
                    Configuring,
                    Blocked(BlockReason::AddrOor | BlockReason::BadFormat)
                )
        )
    }

    fn encode(self) -> u64 {
        match self {
            RmState::Idle => 0,
            RmState::Loading => 1,
            RmState::CrcCheck => 2,
            RmState::Configuring => 3,
            RmState::Done => 4,
            RmState::Blocked(BlockReason::BadFormat) => 5,
            RmState::Blocked(BlockReason::CrcFail) => 6,
            RmState::Blocked(BlockReason::AddrOor) => 7,
        }
    }

    fn decode(code: u64) -> Self {
        match code {
            0 => RmState::Idle,
            1 => RmState::Loading,
            2 => RmState::CrcCheck,
            3 => RmState::Configuring,
            4 => RmState::Done,
            5 => RmState::Blocked(BlockReason::BadFormat),
            6 => RmState::Blocked(BlockReason::CrcFail),
            7 => RmState::Blocked(BlockReason::AddrOor),
            _ => unreachable!("invalid status code {code}"),
        }
    }
}

impl fmt::Display for RmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RmState::Idle => f.write_str("IDLE"),
            RmState::Loading => f.write_str("LOADING"),
            RmState::CrcCheck => f.write_str("CRC_CHECK"),
            RmState::Configuring => f.write_str("CONFIGURING"),
            RmState::Done => f.write_str("DONE"),
            RmState::Blocked(r) => write!(f, "BLOCKED({})", r.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatusRegister {
    pub state: RmState,
    pub words_loaded: u64,
    pub busy: bool,
}

// Packed as state code in the low 8 bits and word count above it, so one
// atomic load is always a consistent snapshot.
fn pack_status(state: RmState, words_loaded: u64) -> u64 {
    (words_loaded << 8) | state.encode()
}

fn unpack_status(raw: u64) -> StatusRegister {
    let state = RmState::decode(raw & 0xFF);
    StatusRegister {
        state,
        words_loaded: raw >> 8,
        busy: state.is_busy(),
    }
}

/// Read-only view of the status register; cheap to clone and share.
#[derive(Debug, Clone)]
pub struct StatusHandle(Arc<AtomicU64>);

impl StatusHandle {
    pub fn read(&self) -> StatusRegister {
        unpack_status(self.0.load(Ordering::Acquire))
    }
}

/// Per-word corruption hook on the storage path.
pub trait Injector {
    fn inject(&mut self, index: usize, t_ns: u64, word: u32) -> u32;
}

impl<F: FnMut(usize, u64, u32) -> u32> Injector for F {
    fn inject(&mut self, index: usize, t_ns: u64, word: u32) -> u32 {
        self(index, t_ns, word)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Injector for Identity {
    fn inject(&mut self, _: usize, _: u64, word: u32) -> u32 {
        word
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RmError {
    #[error("word period must be positive")]
    ZeroWordPeriod,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RmOutcome {
    pub final_state: RmState,
    pub block_reason: Option<BlockReason>,
    /// Words exactly as they landed in storage.
    pub stored_words: Vec<u32>,
    pub stored_image: Option<BitstreamImage>,
    pub format_error: Option<CodecError>,
    pub write_report: Option<WriteReport>,
}

pub fn crc_check(image: &BitstreamImage) -> bool {
    compute_crc(image.payload()) == image.stored_crc()
}

#[derive(Debug, Default)]
pub struct ReconfigManager {
    status: Arc<AtomicU64>,
}

impl ReconfigManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read_status(&self) -> StatusRegister {
        unpack_status(self.status.load(Ordering::Acquire))
    }

    pub fn status_handle(&self) -> StatusHandle {
        StatusHandle(Arc::clone(&self.status))
    }

    fn set(&self, state: RmState, words_loaded: u64) {
        self.status
            .store(pack_status(state, words_loaded), Ordering::Release);
    }

    /// Loads `words` through `injector`, checks the stored image and
    /// configures the fabric at the stored address.
    pub fn run_reconfiguration(
        &self,
        words: &[u32],
        injector: &mut dyn Injector,
        word_period_ns: u64,
        fabric: &mut Fabric,
    ) -> Result<RmOutcome, RmError> {
        if word_period_ns == 0 {
            return Err(RmError::ZeroWordPeriod);
        }

        self.set(RmState::Loading, 0);
        let mut stored = Vec::with_capacity(words.len());
        for (i, &w) in words.iter().enumerate() {
            let t_ns = i as u64 * word_period_ns;
            stored.push(injector.inject(i, t_ns, w));
            self.set(RmState::Loading, i as u64 + 1);
        }
        let n = stored.len() as u64;

        let blocked = |reason, stored_words, stored_image, format_error| {
            self.set(RmState::Blocked(reason), n);
            Ok(RmOutcome {
                final_state: RmState::Blocked(reason),
                block_reason: Some(reason),
                stored_words,
                stored_image,
                format_error,
                write_report: None,
            })
        };

        let image = match parse_bitstream(&stored) {
            Ok(img) => img,
            Err(e) => return blocked(BlockReason::BadFormat, stored, None, Some(e)),
        };

        self.set(RmState::CrcCheck, n);
        if !crc_check(&image) {
            return blocked(BlockReason::CrcFail, stored, Some(image), None);
        }

        self.set(RmState::Configuring, n);
        match fabric.apply_frames(image.far(), image.payload()) {
            Ok(report) => {
                self.set(RmState::Done, n);
                Ok(RmOutcome {
                    final_state: RmState::Done,
                    block_reason: None,
                    stored_words: stored,
                    stored_image: Some(image),
                    format_error: None,
                    write_report: Some(report),
                })
            }
            Err(FabricError::AddrOutOfRange { .. }) => {
                blocked(BlockReason::AddrOor, stored, Some(image), None)
            }
            Err(_) => blocked(BlockReason::BadFormat, stored, Some(image), None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{build_bitstream, pack_far, BuildSpec, FrameAddress};
    use crate::fabric::Geometry;

    fn setup() -> (Fabric, BitstreamImage) {
        let fabric = Fabric::with_seeded_golden(
            Geometry {
                prr_count: 4,
                frames_per_prr: 32,
                frame_words: 4,
            },
            3,
        )
        .unwrap();
        let img = build_bitstream(
            &BuildSpec {
                far: FrameAddress::new(1, 0),
                header_nop_count: 2,
                frame_payload: (0..16).map(|i| 0x1000 + i).collect(),
            },
            4,
        )
        .unwrap();
        (fabric, img)
    }

    fn rewrite(index: usize, value: u32) -> impl FnMut(usize, u64, u32) -> u32 {
        move |i, _, w| if i == index { value } else { w }
    }

    #[test]
    fn fault_free_path() {
        let (mut fabric, img) = setup();
        let rm = ReconfigManager::new();
        assert_eq!(
            rm.read_status(),
            StatusRegister {
                state: RmState::Idle,
                words_loaded: 0,
                busy: false
            }
        );
        let out = rm
            .run_reconfiguration(&img.words, &mut Identity, 10, &mut fabric)
            .unwrap();
        assert_eq!(out.final_state, RmState::Done);
        assert_eq!(out.block_reason, None);
        let report = out.write_report.unwrap();
        assert!(report.frames_written.iter().all(|&(p, _)| p == 1));
        assert_eq!(report.frames_written.len(), 4);
        assert_eq!(rm.read_status().state, RmState::Done);
    }

    #[test]
    fn payload_flip_blocks_on_crc() {
        let (mut fabric, img) = setup();
        let rm = ReconfigManager::new();
        let idx = img.payload_span().start + 2;
        let mut inj = rewrite(idx, img.words[idx] ^ 0x10);
        let out = rm
            .run_reconfiguration(&img.words, &mut inj, 10, &mut fabric)
            .unwrap();
        assert_eq!(out.final_state, RmState::Blocked(BlockReason::CrcFail));
        assert!(out.write_report.is_none());
        assert!(fabric.is_pristine());
        let st = rm.read_status();
        assert_eq!(st.words_loaded, img.words.len() as u64);
        assert!(!st.busy);
    }

    #[test]
    fn far_rewrite_evades_crc() {
        let (mut fabric, img) = setup();
        let rm = ReconfigManager::new();
        let mut inj = rewrite(img.far_index, pack_far(FrameAddress::new(2, 0)));
        let out = rm
            .run_reconfiguration(&img.words, &mut inj, 10, &mut fabric)
            .unwrap();
        assert_eq!(out.final_state, RmState::Done);
        let stored = out.stored_image.unwrap();
        assert!(crc_check(&stored));
        assert_eq!(stored.far(), FrameAddress::new(2, 0));
        assert_eq!(out.write_report.unwrap().frames_written[0], (2, 0));
    }

    #[test]
    fn marker_flip_is_format_error() {
        let (mut fabric, img) = setup();
        let rm = ReconfigManager::new();
        for idx in [
            0,
            1,
            img.far_marker_index,
            img.data_span.start,
            img.crc_marker_index,
        ] {
            let mut inj = rewrite(idx, img.words[idx] ^ 0x8000_0000);
            let out = rm
                .run_reconfiguration(&img.words, &mut inj, 10, &mut fabric)
                .unwrap();
            assert_eq!(
                out.final_state,
                RmState::Blocked(BlockReason::BadFormat),
                "word {idx}"
            );
            assert!(out.format_error.is_some());
        }
        assert!(fabric.is_pristine());
    }

    #[test]
    fn out_of_range_far_blocks() {
        let (mut fabric, img) = setup();
        let rm = ReconfigManager::new();
        let mut inj = rewrite(img.far_index, pack_far(FrameAddress::new(9, 0)));
        let out = rm
            .run_reconfiguration(&img.words, &mut inj, 10, &mut fabric)
            .unwrap();
        assert_eq!(out.final_state, RmState::Blocked(BlockReason::AddrOor));
        assert!(fabric.is_pristine());
    }

    #[test]
    fn crc_check_examples() {
        let (_, img) = setup();
        assert!(crc_check(&img));
        let mut far_changed = img.clone();
        far_changed.words[img.far_index] = 0xFFFF_FFFF;
        assert!(crc_check(&far_changed));
        let mut flipped = img.clone();
        flipped.words[img.payload_span().start] ^= 1;
        assert!(!crc_check(&flipped));
    }

    #[test]
    fn status_visible_mid_load() {
        let (mut fabric, img) = setup();
        let rm = ReconfigManager::new();
        let handle = rm.status_handle();
        let mut seen = Vec::new();
        let mut inj = |i: usize, t: u64, w: u32| {
            assert_eq!(t, i as u64 * 10);
            seen.push(handle.read());
            w
        };
        rm.run_reconfiguration(&img.words, &mut inj, 10, &mut fabric)
            .unwrap();
        for (k, st) in seen.iter().enumerate() {
            assert_eq!(
                *st,
                StatusRegister {
                    state: RmState::Loading,
                    words_loaded: k as u64,
                    busy: true
                }
            );
        }
    }

    #[test]
    fn zero_period_is_config_error() {
        let (mut fabric, img) = setup();
        let rm = ReconfigManager::new();
        assert_eq!(
            rm.run_reconfiguration(&img.words, &mut Identity, 0, &mut fabric),
            Err(RmError::ZeroWordPeriod)
        );
    }

    #[test]
    fn transition_table() {
        use RmState::*;
        assert!(Idle.can_step_to(Loading));
        assert!(Loading.can_step_to(Blocked(BlockReason::BadFormat)));
        assert!(!Loading.can_step_to(Done));
        assert!(!CrcCheck.can_step_to(Blocked(BlockReason::BadFormat)));
        assert!(!Done.can_step_to(Configuring));
    }
}
