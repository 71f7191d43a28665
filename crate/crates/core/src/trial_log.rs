//! Trial-log CSV: one row per trial, fixed column set.

use std::io::{Read, Write};

use thiserror::Error;

use crate::campaign::{OutcomeClass, TrialRecord};

pub const HEADER: [&str; 13] = [
    "trial",
    "seed",
    "bitstream",
    "outcome",
    "far_intended",
    "far_stored",
    "flips",
    "victims",
    "flt_sig",
    "dos",
    "exposure_ns",
    "detected",
    "waster_kind",
];

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("row {row}: column {column}: {reason}")]
    Field {
        row: usize,
        column: &'static str,
        reason: String,
    },
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

fn to_row(r: &TrialRecord) -> [String; 13] {
    [
        r.trial_index.to_string(),
        r.seed.to_string(),
        r.bitstream.clone(),
        r.outcome.to_string(),
        format!("{:08x}", r.far_intended),
        format!("{:08x}", r.far_stored),
        join(&r.flips, |(w, b)| format!("{w}:{b}")),
        r.victims_hit.join(";"),
        r.flt_sig.to_string(),
        u8::from(r.dos).to_string(),
        r.exposure_ns.to_string(),
        join(&r.detected, |(n, d)| format!("{n}={}", u8::from(*d))),
        r.waster_kind.to_string(),
    ]
}

pub fn write_trial_log<W: Write>(out: W, records: &[TrialRecord]) -> Result<(), LogError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(to_row(r))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').filter(|p| !p.is_empty())
}

fn parse_bit(s: &str) -> Result<bool, String> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("expected 0 or 1, got {s:?}")),
    }
}

fn parse_hex_word(s: &str) -> Result<u32, String> {
    let digits = s.strip_prefix("0x").unwrap_or(s);
    u32::from_str_radix(digits, 16).map_err(|e| format!("{s:?}: {e}"))
}

fn parse_row(row: usize, rec: &csv::StringRecord) -> Result<TrialRecord, LogError> {
    let field = |i: usize| rec.get(i).unwrap_or("");
    macro_rules! parse {
        ($i:expr, $f:expr) => {
            $f(field($i)).map_err(|reason: String| LogError::Field {
                row,
                column: HEADER[$i],
                reason,
            })?
        };
    }
    let num = |s: &str| s.parse::<u64>().map_err(|e| format!("{s:?}: {e}"));

    Ok(TrialRecord {
        trial_index: parse!(0, num),
        seed: parse!(1, num),
        bitstream: field(2).to_string(),
        outcome: parse!(3, |s: &str| s.parse::<OutcomeClass>()),
        far_intended: parse!(4, parse_hex_word),
        far_stored: parse!(5, parse_hex_word),
        flips: parse!(6, |s: &str| {
            split_list(s)
                .map(|p| {
                    let (w, b) = p.split_once(':').ok_or_else(|| format!("bad flip {p:?}"))?;
                    let w = w.parse::<usize>().map_err(|e| e.to_string())?;
                    let b = b.parse::<u8>().map_err(|e| e.to_string())?;
                    if b > 31 {
                        return Err(format!("bit index {b} out of range"));
                    }
                    Ok((w, b))
                })
                .collect::<Result<Vec<_>, String>>()
        }),
        victims_hit: split_list(field(7)).map(String::from).collect(),
        flt_sig: parse!(8, |s: &str| s
            .parse::<u32>()
            .map_err(|e| format!("{s:?}: {e}"))),
        dos: parse!(9, parse_bit),
        exposure_ns: parse!(10, num),
        detected: parse!(11, |s: &str| {
            split_list(s)
                .map(|p| {
                    let (n, d) = p
                        .split_once('=')
                        .ok_or_else(|| format!("bad detector entry {p:?}"))?;
                    Ok((n.to_string(), parse_bit(d)?))
                })
                .collect::<Result<Vec<_>, String>>()
        }),
        waster_kind: parse!(12, |s: &str| s
            .parse()
            .map_err(|e: crate::attacker::AttackerError| e.to_string())),
    })
}

/// Reads a trial log, rejecting any header other than [`HEADER`].
pub fn read_trial_log<R: Read>(input: R) -> Result<Vec<TrialRecord>, LogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(LogError::Header {
            expected: HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| parse_row(i + 1, &rec?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacker::WasterKind;

    fn record() -> TrialRecord {
        TrialRecord {
            trial_index: 3,
            seed: 0xDEAD,
            bitstream: "blinkline".into(),
            outcome: OutcomeClass::Misroute,
            far_intended: 0x0100_0000,
            far_stored: 0x0000_0000,
            flips: vec![(4, 24), (3, 7)],
            victims_hit: vec!["p1".into(), "adder1_0".into()],
            flt_sig: 77,
            dos: true,
            exposure_ns: 200_000,
            detected: vec![("duration".into(), false), ("strict".into(), true)],
            waster_kind: WasterKind::SelfClockedRo,
        }
    }

    #[test]
    fn row_format() {
        let mut buf = Vec::new();
        write_trial_log(&mut buf, &[record()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "trial,seed,bitstream,outcome,far_intended,far_stored,flips,victims,flt_sig,dos,exposure_ns,detected,waster_kind\n\
             3,57005,blinkline,MISROUTE,01000000,00000000,4:24;3:7,p1;adder1_0,77,1,200000,duration=0;strict=1,self_clocked_ro\n"
        );
    }

    #[test]
    fn read_back() {
        let mut empty = record();
        empty.flips.clear();
        empty.victims_hit.clear();
        empty.detected.clear();
        let recs = vec![record(), empty];
        let mut buf = Vec::new();
        write_trial_log(&mut buf, &recs).unwrap();
        assert_eq!(read_trial_log(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn header_mismatch() {
        let err = read_trial_log(&b"trial,seed\n1,2\n"[..]).unwrap_err();
        assert!(matches!(err, LogError::Header { .. }));
    }

    #[test]
    fn bad_field() {
        let mut buf = Vec::new();
        write_trial_log(&mut buf, &[record()]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("MISROUTE", "LOST");
        let err = read_trial_log(text.as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            LogError::Field {
                column: "outcome",
                ..
            }
        ));
    }
}
