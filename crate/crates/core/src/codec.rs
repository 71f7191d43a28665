//! Partial-bitstream wire format.
//!
//! A bitstream is a flat sequence of 32-bit big-endian words laid out as
//!
//! ```text
//! SYNC | NOP * n | FAR_MARKER FAR | DATA_MARKER(count) payload[count] | CRC_MARKER crc
//! ```
//!
//! The two-word select window (`FAR_MARKER FAR`) names the region and frame
//! offset the payload is written to. The footer CRC is computed over the
//! payload words only, so the select window is not covered by it.

use std::fmt;
use std::ops::{Range, RangeInclusive};

use thiserror::Error;

pub const SYNC: u32 = 0xAA99_5566;
pub const NOP: u32 = 0x2000_0000;
pub const FAR_MARKER: u32 = 0x3000_2001;
pub const DATA_MARKER: u32 = 0x3004_0000;
pub const CRC_MARKER: u32 = 0x3000_0001;

/// Payload word count carried in the low bits of the data marker.
pub const DATA_COUNT_MASK: u32 = 0x0003_FFFF;
/// Largest payload a single data marker can describe.
pub const MAX_PAYLOAD_WORDS: usize = DATA_COUNT_MASK as usize;
/// Upper bound on header padding accepted by the builder and the parser.
pub const MAX_HEADER_NOPS: usize = 256;

const FRAME_OFFSET_MASK: u32 = 0x00FF_FFFF;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("BAD_SYNC: word 0 is {found:#010x}, expected {SYNC:#010x}")]
    BadSync { found: u32 },
    #[error("BAD_MARKER: word {index} is {found:#010x}, expected {expected}")]
    BadMarker {
        index: usize,
        expected: &'static str,
        found: u32,
    },
    #[error("TRUNCATED: stream ends at {len} words, needed word {needed}")]
    Truncated { len: usize, needed: usize },
    #[error("BAD_LENGTH: {0}")]
    BadLength(String),
    #[error("FORMAT: {0}")]
    Format(String),
}

impl CodecError {
    /// Stable short name used in tool output.
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::BadSync { .. } => "BAD_SYNC",
            CodecError::BadMarker { .. } => "BAD_MARKER",
            CodecError::Truncated { .. } => "TRUNCATED",
            CodecError::BadLength(_) => "BAD_LENGTH",
            CodecError::Format(_) => "FORMAT",
        }
    }
}

/// Region index and frame offset packed into one configuration-address word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FrameAddress {
    pub prr_id: u8,
    /// Only the low 24 bits are meaningful.
    pub frame_offset: u32,
}

impl FrameAddress {
    pub fn new(prr_id: u8, frame_offset: u32) -> Self {
        Self {
            prr_id,
            frame_offset: frame_offset & FRAME_OFFSET_MASK,
        }
    }
}

impl fmt::Display for FrameAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "prr {} frame {}", self.prr_id, self.frame_offset)
    }
}

pub fn pack_far(far: FrameAddress) -> u32 {
    (u32::from(far.prr_id) << 24) | (far.frame_offset & FRAME_OFFSET_MASK)
}

pub fn unpack_far(word: u32) -> FrameAddress {
    FrameAddress {
        prr_id: (word >> 24) as u8,
        frame_offset: word & FRAME_OFFSET_MASK,
    }
}

// CRC-32/MPEG-2: poly 0x04C11DB7, init 0xFFFFFFFF, no reflection, no final xor.
const CRC_TABLE: [u32; 256] = {
    let mut table = [0u32; 256];
    let mut i = 0u32;
    while i < 256 {
        let mut crc = i << 24;
        let mut j = 0;
        while j < 8 {
            crc = if crc & 0x8000_0000 != 0 {
                (crc << 1) ^ 0x04C1_1DB7
            } else {
                crc << 1
            };
            j += 1;
        }
        table[i as usize] = crc;
        i += 1;
    }
    table
};

/// Streaming CRC-32/MPEG-2.
#[derive(Debug, Clone, Copy)]
pub struct Crc32Mpeg2(u32);

impl Default for Crc32Mpeg2 {
    fn default() -> Self {
        Self(0xFFFF_FFFF)
    }
}

impl Crc32Mpeg2 {
    pub fn update(&mut self, bytes: &[u8]) {
        let mut crc = self.0;
        for &b in bytes {
            crc = (crc << 8) ^ CRC_TABLE[((crc >> 24) ^ u32::from(b)) as usize];
        }
        self.0 = crc;
    }

    pub fn finish(self) -> u32 {
        self.0
    }
}

pub fn crc32_mpeg2(bytes: &[u8]) -> u32 {
    let mut crc = Crc32Mpeg2::default();
    crc.update(bytes);
    crc.finish()
}

/// CRC over payload words, fed to the register in big-endian byte order.
pub fn compute_crc(payload: &[u32]) -> u32 {
    let mut crc = Crc32Mpeg2::default();
    for w in payload {
        crc.update(&w.to_be_bytes());
    }
    crc.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildSpec {
    pub far: FrameAddress,
    pub header_nop_count: usize,
    pub frame_payload: Vec<u32>,
}

/// A word-indexed bitstream. All indices refer into `words`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitstreamImage {
    pub words: Vec<u32>,
    /// Sync word plus header padding.
    pub header_span: Range<usize>,
    pub far_marker_index: usize,
    pub far_index: usize,
    /// Data marker plus payload words.
    pub data_span: Range<usize>,
    pub crc_marker_index: usize,
    pub crc_index: usize,
}

impl BitstreamImage {
    pub fn far(&self) -> FrameAddress {
        unpack_far(self.words[self.far_index])
    }

    pub fn payload_span(&self) -> Range<usize> {
        self.data_span.start + 1..self.data_span.end
    }

    pub fn payload(&self) -> &[u32] {
        &self.words[self.payload_span()]
    }

    pub fn stored_crc(&self) -> u32 {
        self.words[self.crc_index]
    }

    pub fn header_nop_count(&self) -> usize {
        self.header_span.len() - 1
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        words_to_bytes(&self.words)
    }
}

pub fn build_bitstream(spec: &BuildSpec, frame_words: usize) -> Result<BitstreamImage, CodecError> {
    if frame_words == 0 {
        return Err(CodecError::Format("frame_words must be positive".into()));
    }
    let n = spec.frame_payload.len();
    if n == 0 || !n.is_multiple_of(frame_words) {
        return Err(CodecError::Format(format!(
            "payload of {n} words is not a positive multiple of frame_words={frame_words}"
        )));
    }
    if n > MAX_PAYLOAD_WORDS {
        return Err(CodecError::Format(format!(
            "payload of {n} words exceeds {MAX_PAYLOAD_WORDS}"
        )));
    }
    if spec.header_nop_count > MAX_HEADER_NOPS {
        return Err(CodecError::Format(format!(
            "{} header NOPs exceeds {MAX_HEADER_NOPS}",
            spec.header_nop_count
        )));
    }

    let nops = spec.header_nop_count;
    let mut words = Vec::with_capacity(nops + n + 6);
    words.push(SYNC);
    words.extend(std::iter::repeat_n(NOP, nops));
    words.push(FAR_MARKER);
    words.push(pack_far(spec.far));
    words.push(DATA_MARKER | n as u32);
    words.extend_from_slice(&spec.frame_payload);
    words.push(CRC_MARKER);
    words.push(compute_crc(&spec.frame_payload));

    let far_marker_index = 1 + nops;
    let data_start = far_marker_index + 2;
    let data_end = data_start + 1 + n;
    Ok(BitstreamImage {
        words,
        header_span: 0..far_marker_index,
        far_marker_index,
        far_index: far_marker_index + 1,
        data_span: data_start..data_end,
        crc_marker_index: data_end,
        crc_index: data_end + 1,
    })
}

pub fn parse_bitstream(words: &[u32]) -> Result<BitstreamImage, CodecError> {
    let at = |i: usize| {
        words.get(i).copied().ok_or(CodecError::Truncated {
            len: words.len(),
            needed: i,
        })
    };
    let expect = |i: usize, marker: u32, name: &'static str| -> Result<(), CodecError> {
        let w = at(i)?;
        if w == marker {
            Ok(())
        } else {
            Err(CodecError::BadMarker {
                index: i,
                expected: name,
                found: w,
            })
        }
    };

    let sync = at(0)?;
    if sync != SYNC {
        return Err(CodecError::BadSync { found: sync });
    }

    let mut i = 1;
    while at(i)? == NOP {
        i += 1;
        if i - 1 > MAX_HEADER_NOPS {
            return Err(CodecError::BadLength(format!(
                "more than {MAX_HEADER_NOPS} header NOPs"
            )));
        }
    }
    let far_marker_index = i;
    expect(far_marker_index, FAR_MARKER, "FAR_MARKER")?;
    let far_index = far_marker_index + 1;
    at(far_index)?;

    let data_start = far_index + 1;
    let dm = at(data_start)?;
    if dm & !DATA_COUNT_MASK != DATA_MARKER {
        return Err(CodecError::BadMarker {
            index: data_start,
            expected: "DATA_MARKER",
            found: dm,
        });
    }
    let count = (dm & DATA_COUNT_MASK) as usize;
    if count == 0 {
        return Err(CodecError::BadLength("data marker declares 0 words".into()));
    }
    let data_end = data_start + 1 + count;
    let crc_marker_index = data_end;
    expect(crc_marker_index, CRC_MARKER, "CRC_MARKER")?;
    let crc_index = crc_marker_index + 1;
    at(crc_index)?;
    if words.len() != crc_index + 1 {
        return Err(CodecError::BadLength(format!(
            "{} trailing words after CRC",
            words.len() - crc_index - 1
        )));
    }

    Ok(BitstreamImage {
        words: words.to_vec(),
        header_span: 0..far_marker_index,
        far_marker_index,
        far_index,
        data_span: data_start..data_end,
        crc_marker_index,
        crc_index,
    })
}

/// Inclusive word-index range of the select window (FAR marker and FAR word).
pub fn select_window(image: &BitstreamImage) -> RangeInclusive<usize> {
    image.far_marker_index..=image.far_index
}

pub fn words_to_bytes(words: &[u32]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_be_bytes()).collect()
}

pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<u32>, CodecError> {
    if !bytes.len().is_multiple_of(4) {
        return Err(CodecError::BadLength(format!(
            "{} bytes is not a whole number of words",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
