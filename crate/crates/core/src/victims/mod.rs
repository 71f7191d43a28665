//! Co-tenant victim models and their fault-localisation register.
//!
//! A victim unit whose frames were overwritten produces its golden output
//! XOR the unit's delta digest. Digests are odd, so the corrupted output
//! always differs from the golden one, however narrow the output field.

pub mod aes;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use aes::aes128_encrypt;

use crate::fabric::{DeltaDigest, Placement};

/// Width of each priority-encoder field in the adder scenario.
pub const ENCODER_BITS: u32 = 10;
const ENCODER_MASK: u32 = (1 << ENCODER_BITS) - 1;
const MAX_ENCODED: usize = ENCODER_MASK as usize;
/// Adder outputs carry the sum of two 16-bit operands plus carry.
const SUM_MASK: u32 = 0x1_FFFF;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VictimError {
    #[error("{0} adders per cluster exceeds the 10-bit encoder range ({MAX_ENCODED})")]
    TooManyAdders(usize),
    #[error("adder scenario needs {expected} operand pairs, got {got}")]
    OperandCount { expected: usize, got: usize },
    #[error("placement list does not match the scenario: {0}")]
    Placements(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct FltSig(pub u32);

impl FltSig {
    pub fn from_encoders(p1: u16, p2: u16) -> Self {
        FltSig((u32::from(p1) & ENCODER_MASK) | ((u32::from(p2) & ENCODER_MASK) << ENCODER_BITS))
    }

    pub fn from_aes_flags(flag1: bool, flag2: bool) -> Self {
        FltSig(u32::from(flag1) | (u32::from(flag2) << 1))
    }

    /// `flt_sig[9:0]`
    pub fn cluster1(self) -> u16 {
        (self.0 & ENCODER_MASK) as u16
    }

    /// `flt_sig[19:10]`
    pub fn cluster2(self) -> u16 {
        ((self.0 >> ENCODER_BITS) & ENCODER_MASK) as u16
    }
}

impl fmt::Display for FltSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#07x}", self.0)
    }
}

/// 0 when no flag is set, otherwise lowest set index + 1.
pub fn priority_encode(flags: &[bool]) -> u16 {
    debug_assert!(flags.len() <= MAX_ENCODED);
    flags.iter().position(|&f| f).map_or(0, |i| i as u16 + 1)
}

fn digest_of<'a>(corrupted: &'a HashMap<&str, DeltaDigest>, unit: &str) -> Option<&'a DeltaDigest> {
    corrupted.get(unit)
}

fn index_corrupted(corrupted: &[(String, DeltaDigest)]) -> HashMap<&str, DeltaDigest> {
    corrupted.iter().map(|(u, d)| (u.as_str(), *d)).collect()
}

pub fn adder_unit_id(cluster: usize, index: usize) -> String {
    format!("adder{cluster}_{index}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderScenario {
    pub n: usize,
    pub inputs: Vec<(u16, u16)>,
    /// `adder1_0 .. adder1_{n-1}`.
    pub cluster1: Vec<Placement>,
    pub cluster2: Vec<Placement>,
    pub p1: Placement,
    pub p2: Placement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdderLayout {
    pub n: usize,
    pub cluster1_prr: usize,
    pub cluster2_prr: usize,
    pub frames_per_adder: usize,
    pub encoder_frames: usize,
}

impl Default for AdderLayout {
    fn default() -> Self {
        Self {
            n: 500,
            cluster1_prr: 0,
            cluster2_prr: 3,
            frames_per_adder: 2,
            encoder_frames: 4,
        }
    }
}

pub fn default_operands(n: usize) -> Vec<(u16, u16)> {
    (0..n)
        .map(|i| {
            let i = i as u16;
            (i, i.wrapping_mul(2).wrapping_add(1))
        })
        .collect()
}

impl AdderScenario {
    /// Each cluster fills one PRR: its encoder first, then the adders.
    pub fn from_layout(layout: AdderLayout) -> Result<Self, VictimError> {
        let AdderLayout {
            n,
            frames_per_adder: fpa,
            encoder_frames: enc,
            ..
        } = layout;
        if n > MAX_ENCODED {
            return Err(VictimError::TooManyAdders(n));
        }
        if fpa == 0 || enc == 0 {
            return Err(VictimError::Placements(
                "units need at least one frame".into(),
            ));
        }
        let cluster = |c: usize, prr: usize| -> Vec<Placement> {
            (0..n)
                .map(|i| {
                    let lo = enc + i * fpa;
                    Placement::new(adder_unit_id(c, i), prr, lo..=lo + fpa - 1)
                })
                .collect()
        };
        Ok(Self {
            n,
            inputs: default_operands(n),
            cluster1: cluster(1, layout.cluster1_prr),
            cluster2: cluster(2, layout.cluster2_prr),
            p1: Placement::new("p1", layout.cluster1_prr, 0..=enc - 1),
            p2: Placement::new("p2", layout.cluster2_prr, 0..=enc - 1),
        })
    }

    pub fn validate(&self) -> Result<(), VictimError> {
        if self.n > MAX_ENCODED {
            return Err(VictimError::TooManyAdders(self.n));
        }
        if self.inputs.len() != self.n {
            return Err(VictimError::OperandCount {
                expected: self.n,
                got: self.inputs.len(),
            });
        }
        if self.cluster1.len() != self.n || self.cluster2.len() != self.n {
            return Err(VictimError::Placements(format!(
                "expected {} adders per cluster",
                self.n
            )));
        }
        Ok(())
    }

    pub fn placements(&self) -> Vec<Placement> {
        let mut all = Vec::with_capacity(2 * self.n + 2);
        all.push(self.p1.clone());
        all.extend(self.cluster1.iter().cloned());
        all.push(self.p2.clone());
        all.extend(self.cluster2.iter().cloned());
        all
    }

    pub fn expected_sum(&self, i: usize) -> u32 {
        let (a, b) = self.inputs[i];
        u32::from(a) + u32::from(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderEvaluation {
    pub flag1: Vec<bool>,
    pub flag2: Vec<bool>,
    pub flt_sig: FltSig,
}

pub fn evaluate_adders(
    scenario: &AdderScenario,
    corrupted: &[(String, DeltaDigest)],
) -> AdderEvaluation {
    let corrupted = index_corrupted(corrupted);
    let flags = |units: &[Placement]| -> Vec<bool> {
        units
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let expected = scenario.expected_sum(i);
                let out = match digest_of(&corrupted, &p.unit_id) {
                    Some(d) => (expected ^ d.0) & SUM_MASK,
                    None => expected,
                };
                out != expected
            })
            .collect()
    };
    let flag1 = flags(&scenario.cluster1);
    let flag2 = flags(&scenario.cluster2);

    let encode = |flags: &[bool], encoder: &Placement| -> u16 {
        let code = u32::from(priority_encode(flags));
        match digest_of(&corrupted, &encoder.unit_id) {
            Some(d) => ((code ^ d.0) & ENCODER_MASK) as u16,
            None => code as u16,
        }
    };
    let flt_sig = FltSig::from_encoders(encode(&flag1, &scenario.p1), encode(&flag2, &scenario.p2));
    AdderEvaluation {
        flag1,
        flag2,
        flt_sig,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AesScenario {
    pub key: [u8; 16],
    pub plaintext: [u8; 16],
    pub expected_ct: [u8; 16],
    pub aes1: Placement,
    pub aes2: Placement,
}

pub const AES_DEFAULT_KEY: [u8; 16] = [
    0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x0c, 0x0d, 0x0e, 0x0f,
];
pub const AES_DEFAULT_PLAINTEXT: [u8; 16] = [
    0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0xcc, 0xdd, 0xee, 0xff,
];

impl AesScenario {
    pub fn new(key: [u8; 16], plaintext: [u8; 16], aes1: Placement, aes2: Placement) -> Self {
        Self {
            key,
            plaintext,
            expected_ct: aes128_encrypt(&key, &plaintext),
            aes1: Placement {
                unit_id: "aes1".into(),
                ..aes1
            },
            aes2: Placement {
                unit_id: "aes2".into(),
                ..aes2
            },
        }
    }

    pub fn placements(&self) -> Vec<Placement> {
        vec![self.aes1.clone(), self.aes2.clone()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AesEvaluation {
    pub ciphertexts: [[u8; 16]; 2],
    pub flag1: bool,
    pub flag2: bool,
    pub flt_sig: FltSig,
}

pub fn evaluate_aes(scenario: &AesScenario, corrupted: &[(String, DeltaDigest)]) -> AesEvaluation {
    let corrupted = index_corrupted(corrupted);
    let run = |unit: &Placement| -> [u8; 16] {
        // Both instances compute the same encryption; a corrupted one is
        // off by its digest in the low 32 bits.
        let ct = u128::from_be_bytes(aes128_encrypt(&scenario.key, &scenario.plaintext));
        let delta = digest_of(&corrupted, &unit.unit_id).map_or(0, |d| u128::from(d.0));
        (ct ^ delta).to_be_bytes()
    };
    let ciphertexts = [run(&scenario.aes1), run(&scenario.aes2)];
    let flag1 = ciphertexts[0] != scenario.expected_ct;
    let flag2 = ciphertexts[1] != scenario.expected_ct;
    AesEvaluation {
        ciphertexts,
        flag1,
        flag2,
        flt_sig: FltSig::from_aes_flags(flag1, flag2),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VictimScenario {
    Adders(AdderScenario),
    Aes(AesScenario),
}

impl VictimScenario {
    pub fn kind(&self) -> &'static str {
        match self {
            VictimScenario::Adders(_) => "adders",
            VictimScenario::Aes(_) => "aes",
        }
    }

    pub fn placements(&self) -> Vec<Placement> {
        match self {
            VictimScenario::Adders(s) => s.placements(),
            VictimScenario::Aes(s) => s.placements(),
        }
    }

    pub fn flt_sig(&self, corrupted: &[(String, DeltaDigest)]) -> FltSig {
        match self {
            VictimScenario::Adders(s) => evaluate_adders(s, corrupted).flt_sig,
            VictimScenario::Aes(s) => evaluate_aes(s, corrupted).flt_sig,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::FrameAddress;
    use crate::fabric::{Fabric, Geometry};

    fn adders() -> AdderScenario {
        AdderScenario::from_layout(AdderLayout::default()).unwrap()
    }

    fn hit(unit: &str, d: u32) -> (String, DeltaDigest) {
        (unit.to_string(), DeltaDigest(d))
    }

    #[test]
    fn priority_encoder() {
        assert_eq!(priority_encode(&[false; 500]), 0);
        let mut f = [false; 10];
        f[3] = true;
        assert_eq!(priority_encode(&f), 4);
        let mut f = [false; 10];
        f[2] = true;
        f[7] = true;
        assert_eq!(priority_encode(&f), 3);
    }

    #[test]
    fn default_layout() {
        let s = adders();
        s.validate().unwrap();
        assert_eq!(s.n, 500);
        assert_eq!(s.inputs[7], (7, 15));
        assert_eq!(s.p1.frame_range, 0..=3);
        assert_eq!(s.cluster1[0].frame_range, 4..=5);
        assert_eq!(*s.cluster2[499].frame_range.end(), 1003);
        crate::fabric::validate_placements(&Geometry::default(), &s.placements()).unwrap();
    }

    #[test]
    fn fault_free_adders() {
        let e = evaluate_adders(&adders(), &[]);
        assert!(e.flag1.iter().chain(&e.flag2).all(|f| !f));
        assert_eq!(e.flt_sig, FltSig(0));
    }

    #[test]
    fn single_adder_fault() {
        let e = evaluate_adders(&adders(), &[hit("adder1_7", 0x8001)]);
        assert_eq!(e.flag1.iter().filter(|f| **f).count(), 1);
        assert!(e.flag1[7]);
        assert_eq!(e.flt_sig.cluster1(), 8);
        assert_eq!(e.flt_sig.cluster2(), 0);
    }

    #[test]
    fn digest_high_bits_only_still_flags() {
        // Truncation to 17 bits keeps bit 0 of the odd digest.
        let e = evaluate_adders(&adders(), &[hit("adder2_0", 0xFFFE_0001)]);
        assert!(e.flag2[0]);
        assert_eq!(e.flt_sig.cluster2(), 1);
    }

    #[test]
    fn encoder_fault_uses_fabric_digest() {
        let s = adders();
        let mut fabric = Fabric::with_seeded_golden(Geometry::default(), 11).unwrap();
        fabric
            .apply_frames(FrameAddress::new(0, 0), &[0u32; 16])
            .unwrap();
        let corrupted = fabric.diff_corrupted_units(&s.placements());
        assert_eq!(corrupted.len(), 1);
        assert_eq!(corrupted[0].0, "p1");
        let digest = corrupted[0].1 .0;

        let e = evaluate_adders(&s, &corrupted);
        assert!(e.flag1.iter().all(|f| !f));
        assert_eq!(u32::from(e.flt_sig.cluster1()), digest & 0x3FF);
        assert_ne!(e.flt_sig.cluster1(), 0);
        assert_eq!(e.flt_sig.cluster2(), 0);
    }

    #[test]
    fn aes_flt_sig_values() {
        let s = AesScenario::new(
            AES_DEFAULT_KEY,
            AES_DEFAULT_PLAINTEXT,
            Placement::new("", 0, 0..=511),
            Placement::new("", 3, 0..=511),
        );
        assert_eq!(evaluate_aes(&s, &[]).flt_sig, FltSig(0));
        assert_eq!(evaluate_aes(&s, &[hit("aes1", 1)]).flt_sig, FltSig(1));
        assert_eq!(evaluate_aes(&s, &[hit("aes2", 3)]).flt_sig, FltSig(2));
        let both = evaluate_aes(&s, &[hit("aes1", 5), hit("aes2", 7)]);
        assert_eq!(both.flt_sig, FltSig(3));
        assert_eq!(both.ciphertexts[0][15], s.expected_ct[15] ^ 5);
    }

    #[test]
    fn flt_sig_fields() {
        let f = FltSig::from_encoders(8, 501);
        assert_eq!(f.0, 8 | (501 << 10));
        assert_eq!((f.cluster1(), f.cluster2()), (8, 501));
        assert_eq!(FltSig::from_aes_flags(true, true), FltSig(3));
    }

    #[test]
    fn too_many_adders() {
        let layout = AdderLayout {
            n: 1024,
            ..AdderLayout::default()
        };
        assert_eq!(
            AdderScenario::from_layout(layout),
            Err(VictimError::TooManyAdders(1024))
        );
    }
}
