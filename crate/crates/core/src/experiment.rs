//! Experiment orchestration and CSV output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::anytime::{new_case_base, run_anytime, run_baseline, RunLog};
use crate::cases::{run_case_based_with, CaseBase};
use crate::config::{ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::punctuated::{run_punctuated, FleetRun};

pub const CSV_HEADER: &str =
    "mode,seed,episode,phase,success,published_fitness,model_epoch,change_flag,monitor_estimate,case_hit";

/// One CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub mode: Mode,
    pub seed: u64,
    pub episode: u64,
    pub phase: usize,
    /// 0/1 for single-agent modes, fleet success fraction for punctuated.
    pub success: f64,
    pub published_fitness: f64,
    pub model_epoch: u64,
    pub change_flag: bool,
    pub monitor_estimate: Option<f64>,
    pub case_hit: Option<bool>,
}

/// Formats like C's `%g`: 6 significant digits, trailing zeros dropped.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},",
            self.mode,
            self.seed,
            self.episode,
            self.phase,
            fmt_g(self.success),
            fmt_g(self.published_fitness),
            self.model_epoch,
            self.change_flag
        )
        .unwrap();
        if let Some(m) = self.monitor_estimate {
            s.push_str(&fmt_g(m));
        }
        s.push(',');
        if let Some(h) = self.case_hit {
            write!(s, "{h}").unwrap();
        }
        s
    }
}

pub fn log_rows(mode: Mode, log: &RunLog) -> Vec<CsvRow> {
    log.records
        .iter()
        .map(|r| CsvRow {
            mode,
            seed: log.seed,
            episode: r.episode,
            phase: r.phase_index,
            success: if r.success { 1.0 } else { 0.0 },
            published_fitness: r.published_fitness,
            model_epoch: r.model_epoch,
            change_flag: r.trigger_fired,
            monitor_estimate: r.monitor_estimate,
            case_hit: r.case_hit,
        })
        .collect()
}

/// One row per episode; success is the fleet fraction and the estimate is
/// the fleet mean handed to the observer.
pub fn fleet_rows(run: &FleetRun) -> Vec<CsvRow> {
    let n = run.agent_logs.len() as f64;
    let first = &run.agent_logs[0];
    first
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let wins = run.agent_logs.iter().filter(|l| l.records[i].success).count();
            CsvRow {
                mode: Mode::Punctuated,
                seed: run.seed,
                episode: r.episode,
                phase: r.phase_index,
                success: wins as f64 / n,
                published_fitness: r.published_fitness,
                model_epoch: r.model_epoch,
                change_flag: r.trigger_fired,
                monitor_estimate: run.observer_estimates[i],
                case_hit: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Run seeds concurrently. Output is identical either way.
    pub parallel: bool,
    /// Case base every case-based run starts from.
    pub initial_cases: Option<CaseBase>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<CsvRow>,
    /// Final case base of the first case-based seed, if any ran.
    pub cases: Option<CaseBase>,
}

/// Runs a single (mode, seed) pair.
pub fn run_mode(
    cfg: &ExperimentConfig,
    mode: Mode,
    seed: u64,
    initial_cases: Option<&CaseBase>,
) -> Result<(Vec<CsvRow>, Option<CaseBase>)> {
    match mode {
        Mode::Baseline => Ok((log_rows(mode, &run_baseline(cfg, seed)?), None)),
        Mode::Anytime => Ok((log_rows(mode, &run_anytime(cfg, seed)?), None)),
        Mode::CaseBased => {
            let base = initial_cases.cloned().unwrap_or_else(|| new_case_base(cfg));
            let (log, base) = run_case_based_with(cfg, seed, base)?;
            Ok((log_rows(mode, &log), Some(base)))
        }
        Mode::Punctuated => {
            let fleet = cfg
                .fleet
                .as_ref()
                .ok_or_else(|| Error::config("fleet", "punctuated mode requires a fleet section"))?;
            Ok((fleet_rows(&run_punctuated(cfg, fleet, seed)?), None))
        }
    }
}

/// Runs every seed of every mode. Rows come out grouped by mode (in the
/// given order), then by seed (in config order).
pub fn run_experiment(cfg: &ExperimentConfig, modes: &[Mode], opts: &RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if modes.is_empty() {
        return Err(Error::config("modes", "at least one mode is required"));
    }
    let jobs: Vec<(Mode, u64)> = modes
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let run = |&(mode, seed): &(Mode, u64)| run_mode(cfg, mode, seed, opts.initial_cases.as_ref());
    let results: Vec<(Vec<CsvRow>, Option<CaseBase>)> = if opts.parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    let mut rows = Vec::new();
    let mut cases = None;
    for (r, c) in results {
        rows.extend(r);
        if cases.is_none() {
            cases = c;
        }
    }
    Ok(ExperimentOutput { rows, cases })
}

pub fn csv_string(rows: &[CsvRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

/// Writes `contents` to a temporary sibling and renames it into place, so a
/// failed write never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(name);
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(contents).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    write_atomic(path, csv_string(rows).as_bytes())
}
