//! `flare` command-line front end.
//!
//! Exit status: 0 success, 1 usage error, 2 config/format error, 3 I/O
//! error. Output files are written through a temporary file in the target
//! directory and renamed into place, so a failed command leaves no file.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::campaign::{auto_workers, run_campaign, run_trial_with, AttackMode, TrialRecord};
use crate::codec::{bytes_to_words, compute_crc, parse_bitstream, select_window, CodecError};
use crate::report::{render_csv, render_markdown, summarize};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::trial_log::{read_trial_log, write_trial_log, LogError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "flare",
    version,
    about = "Select-word fault injection on partial reconfiguration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Workers {
    Auto,
    Fixed(usize),
}

fn parse_workers(s: &str) -> Result<Workers, String> {
    if s == "auto" {
        return Ok(Workers::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err("expected a positive integer or `auto`".into()),
        Ok(n) => Ok(Workers::Fixed(n)),
    }
}

fn parse_u64_any(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).map_err(|e| e.to_string()),
        None => s
            .parse()
            .map_err(|e: std::num::ParseIntError| e.to_string()),
    }
}

fn parse_hex_u32(s: &str) -> Result<u32, String> {
    let h = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    u32::from_str_radix(h, 16).map_err(|e| e.to_string())
}

fn parse_trials(s: &str) -> Result<u64, String> {
    match parse_u64_any(s)? {
        0 => Err("must be at least 1".into()),
        n => Ok(n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Csv,
    Md,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the scenario's bitstream as a .fbit file.
    Gen {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bitstream name from the scenario list (default: the first).
        #[arg(long)]
        name: Option<String>,
    },
    /// Print the section layout of a .fbit file and check its CRC.
    Inspect {
        file: PathBuf,
        /// Frame size used to count payload frames.
        #[arg(long, default_value_t = 4)]
        frame_words: usize,
    },
    /// Run a single trial and print its record.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = parse_u64_any)]
        seed: u64,
        /// Store this word as the FAR instead of injecting random faults.
        #[arg(long, value_parser = parse_hex_u32)]
        force_far: Option<u32>,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Run a seeded campaign and write the trial log.
    Campaign {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = parse_trials)]
        trials: u64,
        #[arg(long, value_parser = parse_u64_any)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_workers, default_value = "auto")]
        workers: Workers,
    },
    /// Summarise a trial log.
    Report {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Md)]
        format: ReportFormat,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let cfg = ScenarioConfig::from_path(path).map_err(|e| match e {
        crate::scenario::ConfigError::Io(io) => io_err(path, io),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })?;
    cfg.build()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn cmd_gen(scenario: &Path, out: &Path, name: Option<&str>) -> Result<String, CliError> {
    let s = load_scenario(scenario)?;
    let (name, image) = match name {
        None => &s.bitstreams[0],
        Some(n) => s
            .bitstreams
            .iter()
            .find(|(b, _)| b == n)
            .ok_or_else(|| CliError::Config(format!("no bitstream named {n:?} in scenario")))?,
    };
    write_atomically(out, &image.to_bytes())?;
    Ok(format!(
        "wrote {} ({name}, {} words)\n",
        out.display(),
        image.words.len()
    ))
}

fn cmd_inspect(file: &Path, frame_words: usize) -> Result<String, CliError> {
    use std::fmt::Write as _;

    let bytes = fs::read(file).map_err(|e| io_err(file, e))?;
    let parsed = bytes_to_words(&bytes).and_then(|w| parse_bitstream(&w));
    let img = parsed.map_err(|e: CodecError| CliError::Config(format!("{}: {e}", e.code())))?;

    let mut o = String::new();
    let sel = select_window(&img);
    let far = img.far();
    let payload_words = img.payload().len();
    let stored = img.stored_crc();
    let computed = compute_crc(img.payload());
    let _ = writeln!(o, "file: {}", file.display());
    let _ = writeln!(o, "words: {}", img.words.len());
    let _ = writeln!(
        o,
        "header: words {}..={} (sync + {} NOP)",
        img.header_span.start,
        img.header_span.end - 1,
        img.header_nop_count()
    );
    let _ = writeln!(o, "select: words {}..={}", sel.start(), sel.end());
    let _ = writeln!(
        o,
        "far: {:#010x} (prr {}, frame {})",
        img.words[img.far_index], far.prr_id, far.frame_offset
    );
    let _ = writeln!(
        o,
        "data: words {}..={} (marker + {} payload words)",
        img.data_span.start,
        img.data_span.end - 1,
        payload_words
    );
    if frame_words > 0 && payload_words % frame_words == 0 {
        let _ = writeln!(
            o,
            "frames: {} x {frame_words} words",
            payload_words / frame_words
        );
    } else {
        let _ = writeln!(
            o,
            "frames: ragged ({payload_words} words, frame_words={frame_words})"
        );
    }
    let _ = writeln!(
        o,
        "crc: word {} stored {stored:#010x} computed {computed:#010x}",
        img.crc_index
    );
    let _ = writeln!(
        o,
        "CRC: {}",
        if stored == computed {
            "match"
        } else {
            "MISMATCH"
        }
    );
    Ok(o)
}

fn format_record(r: &TrialRecord) -> String {
    let mut buf = Vec::new();
    write_trial_log(&mut buf, std::slice::from_ref(r)).expect("writing to memory");
    let text = String::from_utf8(buf).expect("trial log is utf-8");
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().expect("header").clone();
    let row = rdr.records().next().expect("one row").expect("valid row");
    header
        .iter()
        .zip(row.iter())
        .map(|(k, v)| format!("{k}: {v}\n"))
        .collect()
}

fn cmd_run(
    scenario: &Path,
    seed: u64,
    force_far: Option<u32>,
    trial: u64,
) -> Result<String, CliError> {
    let s = load_scenario(scenario)?;
    let mode = force_far.map_or(AttackMode::Stochastic, AttackMode::ForceFar);
    let rec = run_trial_with(&s, seed, trial, mode).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(format_record(&rec))
}

fn cmd_campaign(
    scenario: &Path,
    trials: u64,
    seed: u64,
    out: &Path,
    workers: Workers,
) -> Result<String, CliError> {
    let s = load_scenario(scenario)?;
    let workers = match workers {
        Workers::Auto => auto_workers(),
        Workers::Fixed(n) => n,
    };
    let records =
        run_campaign(&s, seed, trials, workers).map_err(|e| CliError::Config(e.to_string()))?;
    let mut buf = Vec::new();
    write_trial_log(&mut buf, &records).map_err(|e| io_err(out, e))?;
    write_atomically(out, &buf)?;
    Ok(format!(
        "wrote {} trials to {}\n",
        records.len(),
        out.display()
    ))
}

fn cmd_report(csv_path: &Path, format: ReportFormat) -> Result<String, CliError> {
    let file = fs::File::open(csv_path).map_err(|e| io_err(csv_path, e))?;
    let records = read_trial_log(std::io::BufReader::new(file)).map_err(|e| match e {
        LogError::Csv(ref c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => io_err(csv_path, e),
        other => CliError::Config(format!("{}: {other}", csv_path.display())),
    })?;
    if records.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no trial rows",
            csv_path.display()
        )));
    }
    let summary = summarize(&records);
    Ok(match format {
        ReportFormat::Md => render_markdown(&summary),
        ReportFormat::Csv => render_csv(&summary),
    })
}

/// Runs the CLI with explicit arguments and output streams; returns the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };

    let result = match &cli.command {
        Command::Gen {
            scenario,
            out,
            name,
        } => cmd_gen(scenario, out, name.as_deref()),
        Command::Inspect { file, frame_words } => cmd_inspect(file, *frame_words),
        Command::Run {
            scenario,
            seed,
            force_far,
            trial,
        } => cmd_run(scenario, *seed, *force_far, *trial),
        Command::Campaign {
            scenario,
            trials,
            seed,
            out,
            workers,
        } => cmd_campaign(scenario, *trials, *seed, out, *workers),
        Command::Report { csv, format } => cmd_report(csv, *format),
    };
    match result {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("flare").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        let (code, _, err) = call(&[
            "campaign",
            "--scenario",
            "x",
            "--trials",
            "0",
            "--seed",
            "1",
            "--out",
            "y",
        ]);
        assert_eq!(code, EXIT_USAGE, "{err}");
        assert_eq!(
            call(&[
                "campaign",
                "--scenario",
                "x",
                "--trials",
                "3",
                "--seed",
                "1",
                "--out",
                "y",
                "--workers",
                "0"
            ])
            .0,
            EXIT_USAGE
        );
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn worker_parsing() {
        assert_eq!(parse_workers("auto"), Ok(Workers::Auto));
        assert_eq!(parse_workers("8"), Ok(Workers::Fixed(8)));
        assert!(parse_workers("-1").is_err());
        assert_eq!(parse_hex_u32("0x02000000"), Ok(0x0200_0000));
        assert_eq!(parse_hex_u32("02000000"), Ok(0x0200_0000));
    }

    #[test]
    fn missing_inputs_are_io_errors() {
        assert_eq!(call(&["inspect", "/nonexistent/file.fbit"]).0, EXIT_IO);
        assert_eq!(call(&["report", "/nonexistent/log.csv"]).0, EXIT_IO);
        assert_eq!(
            call(&["run", "--scenario", "/nonexistent.ini", "--seed", "1"]).0,
            EXIT_IO
        );
    }
}
