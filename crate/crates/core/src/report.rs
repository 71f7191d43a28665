//! Campaign summaries: outcome rates, fail histograms, detection rates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::campaign::{OutcomeClass, TrialRecord};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub trials: usize,
    pub outcome_counts: BTreeMap<OutcomeClass, usize>,
    pub dos_count: usize,
    /// Per victim group (`adder1`, `p2`, `aes1`, ...): failing units per
    /// trial -> number of trials. Each histogram sums to `trials`.
    pub fail_count_hist: BTreeMap<String, BTreeMap<usize, usize>>,
    /// Per indexed group: unit index -> number of trials it failed in.
    pub unit_fail_freq: BTreeMap<String, BTreeMap<usize, usize>>,
    pub flt_sig_hist: BTreeMap<u32, usize>,
    pub detections: BTreeMap<String, usize>,
    pub waster_kinds: BTreeMap<String, usize>,
    pub exposure_min_ns: u64,
    pub exposure_max_ns: u64,
    pub exposure_mean_ns: f64,
    pub mean_flipped_bits: f64,
}

/// `adder1_7` -> (`adder1`, Some(7)); `p1` -> (`p1`, None).
pub fn unit_group(unit: &str) -> (&str, Option<usize>) {
    match unit.rsplit_once('_') {
        Some((group, idx)) => match idx.parse() {
            Ok(i) => (group, Some(i)),
            Err(_) => (unit, None),
        },
        None => (unit, None),
    }
}

impl Summary {
    pub fn count(&self, class: OutcomeClass) -> usize {
        self.outcome_counts.get(&class).copied().unwrap_or(0)
    }

    pub fn rate(&self, class: OutcomeClass) -> f64 {
        self.count(class) as f64 / self.trials as f64
    }

    pub fn misroute_rate(&self) -> f64 {
        self.rate(OutcomeClass::Misroute)
    }

    pub fn detection_rate(&self, detector: &str) -> f64 {
        self.detections.get(detector).copied().unwrap_or(0) as f64 / self.trials as f64
    }
}

/// Aggregates a non-empty record sequence.
pub fn summarize(records: &[TrialRecord]) -> Summary {
    assert!(!records.is_empty(), "summarize needs at least one record");
    let n = records.len();
    let mut s = Summary {
        trials: n,
        outcome_counts: OutcomeClass::ALL.iter().map(|c| (*c, 0)).collect(),
        exposure_min_ns: u64::MAX,
        ..Summary::default()
    };

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut exposure_sum = 0f64;
    let mut flips = 0usize;
    for (t, r) in records.iter().enumerate() {
        *s.outcome_counts.entry(r.outcome).or_default() += 1;
        s.dos_count += usize::from(r.dos);
        *s.flt_sig_hist.entry(r.flt_sig).or_default() += 1;
        *s.waster_kinds.entry(r.waster_kind.to_string()).or_default() += 1;
        for (name, hit) in &r.detected {
            *s.detections.entry(name.clone()).or_default() += usize::from(*hit);
        }
        for unit in &r.victims_hit {
            let (group, idx) = unit_group(unit);
            groups
                .entry(group.to_string())
                .or_insert_with(|| vec![0; n])[t] += 1;
            if let Some(i) = idx {
                *s.unit_fail_freq
                    .entry(group.to_string())
                    .or_default()
                    .entry(i)
                    .or_default() += 1;
            }
        }
        s.exposure_min_ns = s.exposure_min_ns.min(r.exposure_ns);
        s.exposure_max_ns = s.exposure_max_ns.max(r.exposure_ns);
        exposure_sum += r.exposure_ns as f64;
        flips += r.flips.len();
    }
    for (group, per_trial) in groups {
        let hist = s.fail_count_hist.entry(group).or_default();
        for c in per_trial {
            *hist.entry(c).or_default() += 1;
        }
    }
    s.exposure_mean_ns = exposure_sum / n as f64;
    s.mean_flipped_bits = flips as f64 / n as f64;
    s
}

pub fn render_markdown(s: &Summary) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "# Campaign summary\n");
    let _ = writeln!(o, "trials: {}\n", s.trials);
    let _ = writeln!(
        o,
        "## Outcomes\n\n| outcome | count | rate |\n|---|---:|---:|"
    );
    for c in OutcomeClass::ALL {
        let _ = writeln!(o, "| {} | {} | {:.3} |", c, s.count(c), s.rate(c));
    }
    let _ = writeln!(
        o,
        "| DOS | {} | {:.3} |",
        s.dos_count,
        s.dos_count as f64 / s.trials as f64
    );
    let _ = writeln!(o, "\nmisroute rate: {:.3}", s.misroute_rate());

    let _ = writeln!(o, "\n## Fails per trial\n");
    for (group, hist) in &s.fail_count_hist {
        let _ = writeln!(o, "### {group}\n\n| fails | trials |\n|---:|---:|");
        for (k, v) in hist {
            let _ = writeln!(o, "| {k} | {v} |");
        }
        let _ = writeln!(o);
    }
    if !s.unit_fail_freq.is_empty() {
        let _ = writeln!(o, "## Unit fail frequency\n");
        for (group, hist) in &s.unit_fail_freq {
            let _ = writeln!(o, "### {group}\n\n| index | trials |\n|---:|---:|");
            for (k, v) in hist {
                let _ = writeln!(o, "| {k} | {v} |");
            }
            let _ = writeln!(o);
        }
    }

    let _ = writeln!(o, "## flt_sig\n\n| flt_sig | trials |\n|---:|---:|");
    for (k, v) in &s.flt_sig_hist {
        let _ = writeln!(o, "| {k:#x} | {v} |");
    }

    let _ = writeln!(
        o,
        "\n## Detection\n\n| detector | detected | rate |\n|---|---:|---:|"
    );
    for (name, d) in &s.detections {
        let _ = writeln!(o, "| {name} | {d} | {:.3} |", s.detection_rate(name));
    }

    let _ = writeln!(o, "\n## Exposure\n");
    let _ = writeln!(o, "min_ns: {}", s.exposure_min_ns);
    let _ = writeln!(o, "max_ns: {}", s.exposure_max_ns);
    let _ = writeln!(o, "mean_ns: {:.1}", s.exposure_mean_ns);
    let _ = writeln!(o, "mean flipped bits per trial: {:.4}", s.mean_flipped_bits);
    for (k, v) in &s.waster_kinds {
        let _ = writeln!(o, "waster_kind {k}: {v}");
    }
    o
}

/// Long-format CSV: `table,key,value` rows, one table per section.
pub fn render_csv(s: &Summary) -> String {
    let mut o = String::from("table,key,value\n");
    let _ = writeln!(o, "trials,all,{}", s.trials);
    for c in OutcomeClass::ALL {
        let _ = writeln!(o, "outcome_count,{c},{}", s.count(c));
        let _ = writeln!(o, "outcome_rate,{c},{:.3}", s.rate(c));
    }
    let _ = writeln!(o, "outcome_count,DOS,{}", s.dos_count);
    let _ = writeln!(o, "misroute_rate,all,{:.3}", s.misroute_rate());
    for (group, hist) in &s.fail_count_hist {
        for (k, v) in hist {
            let _ = writeln!(o, "fails_per_trial:{group},{k},{v}");
        }
    }
    for (group, hist) in &s.unit_fail_freq {
        for (k, v) in hist {
            let _ = writeln!(o, "unit_fail_freq:{group},{k},{v}");
        }
    }
    for (k, v) in &s.flt_sig_hist {
        let _ = writeln!(o, "flt_sig,{k},{v}");
    }
    for (name, d) in &s.detections {
        let _ = writeln!(o, "detected,{name},{d}");
        let _ = writeln!(o, "detection_rate,{name},{:.3}", s.detection_rate(name));
    }
    let _ = writeln!(o, "exposure_ns,min,{}", s.exposure_min_ns);
    let _ = writeln!(o, "exposure_ns,max,{}", s.exposure_max_ns);
    let _ = writeln!(o, "exposure_ns,mean,{:.1}", s.exposure_mean_ns);
    let _ = writeln!(o, "flipped_bits,mean,{:.4}", s.mean_flipped_bits);
    for (k, v) in &s.waster_kinds {
        let _ = writeln!(o, "waster_kind,{k},{v}");
    }
    o
}
