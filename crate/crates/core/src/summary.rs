//! Summary statistics recomputed from experiment CSV rows.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::config::Mode;
use crate::error::{Error, Result};
use crate::experiment::{fmt_g, CsvRow, CSV_HEADER};

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// Parses experiment CSV text. Line numbers in errors are 1-based.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        Some(_) => return Err(format_err(1, "unexpected header")),
        None => return Err(format_err(1, "empty file")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(format_err(n, format!("expected 10 fields, found {}", f.len())));
        }
        let bad = |col: &str| format_err(n, format!("bad value in column `{col}`"));
        let mode: Mode = f[0].parse().map_err(|_| bad("mode"))?;
        let float = |s: &str, col: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(col))
        };
        rows.push(CsvRow {
            mode,
            seed: f[1].parse().map_err(|_| bad("seed"))?,
            episode: f[2].parse().map_err(|_| bad("episode"))?,
            phase: f[3].parse().map_err(|_| bad("phase"))?,
            success: float(f[4], "success")?,
            published_fitness: float(f[5], "published_fitness")?,
            model_epoch: f[6].parse().map_err(|_| bad("model_epoch"))?,
            change_flag: parse_bool(f[7]).ok_or_else(|| bad("change_flag"))?,
            monitor_estimate: match f[8] {
                "" => None,
                s => Some(float(s, "monitor_estimate")?),
            },
            case_hit: match f[9] {
                "" => None,
                s => Some(parse_bool(s).ok_or_else(|| bad("case_hit"))?),
            },
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Trailing moving average; the first `window - 1` points average what is
/// available so far.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= w {
            sum -= xs[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Episodes after `change` until the mean over the next `window` episodes
/// first reaches the mean of the `window` episodes before the change.
/// The search stays inside `[change, end)`; a series that never recovers
/// is censored at `end - change`.
pub fn recovery_episodes(xs: &[f64], change: usize, end: usize, window: usize) -> u64 {
    let len = end - change;
    let before = window.min(change).max(1);
    let pre = mean(&xs[change - before..change]);
    let w = window.min(len).max(1);
    (change..=end - w)
        .find(|&s| mean(&xs[s..s + w]) >= pre)
        .map_or(len as u64, |s| (s - change) as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseStats {
    pub mode: Mode,
    pub phase: usize,
    pub start_episode: u64,
    pub episodes: u64,
    /// Seed-mean success over the last quarter of the phase.
    pub last_quarter_mean: f64,
    /// Seed-mean success over the first tenth of the phase.
    pub first_tenth_mean: f64,
    /// The same two spans measured on the moving-average curve.
    pub last_quarter_ma: f64,
    pub first_tenth_ma: f64,
    /// Recovery episodes per seed; empty for the first phase.
    pub recovery: Vec<(u64, u64)>,
    pub mean_recovery: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub window: usize,
    pub phases: Vec<PhaseStats>,
}

impl SummaryStats {
    pub fn get(&self, mode: Mode, phase: usize) -> Option<&PhaseStats> {
        self.phases.iter().find(|p| p.mode == mode && p.phase == phase)
    }
}

/// Computes summary statistics, with modes in order of first appearance.
pub fn summarize_rows(rows: &[CsvRow], window: usize) -> Result<SummaryStats> {
    let mut modes: Vec<Mode> = Vec::new();
    let mut series: BTreeMap<(usize, u64), Vec<&CsvRow>> = BTreeMap::new();
    for row in rows {
        let mi = match modes.iter().position(|&m| m == row.mode) {
            Some(i) => i,
            None => {
                modes.push(row.mode);
                modes.len() - 1
            }
        };
        series.entry((mi, row.seed)).or_default().push(row);
    }

    let mut phases = Vec::new();
    for (mi, &mode) in modes.iter().enumerate() {
        let runs: Vec<(u64, Vec<&CsvRow>)> = series
            .range((mi, 0)..=(mi, u64::MAX))
            .map(|(&(_, seed), rs)| {
                let mut rs = rs.clone();
                rs.sort_by_key(|r| r.episode);
                (seed, rs)
            })
            .collect();
        let reference = &runs[0].1;
        for (seed, rs) in &runs {
            let same = rs.len() == reference.len()
                && rs.iter().zip(reference).all(|(a, b)| a.episode == b.episode && a.phase == b.phase);
            if !same {
                return Err(Error::InvalidState(format!("{mode} seed {seed}: episodes differ from other seeds")));
            }
        }

        // Contiguous phase spans over the episode index.
        let mut spans: Vec<(usize, usize, usize)> = Vec::new();
        for (i, r) in reference.iter().enumerate() {
            match spans.last_mut() {
                Some(last) if last.0 == r.phase => last.2 = i + 1,
                _ => spans.push((r.phase, i, i + 1)),
            }
        }

        let curves: Vec<(u64, Vec<f64>, Vec<f64>)> = runs
            .iter()
            .map(|(seed, rs)| {
                let xs: Vec<f64> = rs.iter().map(|r| r.success).collect();
                let ma = moving_average(&xs, window);
                (*seed, xs, ma)
            })
            .collect();

        for (k, &(phase, start, end)) in spans.iter().enumerate() {
            let len = end - start;
            let q = (len / 4).max(1);
            let t = (len / 10).max(1);
            let seed_mean = |f: &dyn Fn(&[f64], &[f64]) -> f64| {
                curves.iter().map(|(_, xs, ma)| f(xs, ma)).sum::<f64>() / curves.len() as f64
            };
            let recovery: Vec<(u64, u64)> = if k == 0 {
                Vec::new()
            } else {
                curves
                    .iter()
                    .map(|(seed, xs, _)| (*seed, recovery_episodes(xs, start, end, window)))
                    .collect()
            };
            let mean_recovery =
                (!recovery.is_empty()).then(|| recovery.iter().map(|r| r.1 as f64).sum::<f64>() / recovery.len() as f64);
            phases.push(PhaseStats {
                mode,
                phase,
                start_episode: reference[start].episode,
                episodes: len as u64,
                last_quarter_mean: seed_mean(&|xs, _| mean(&xs[end - q..end])),
                first_tenth_mean: seed_mean(&|xs, _| mean(&xs[start..start + t])),
                last_quarter_ma: seed_mean(&|_, ma| mean(&ma[end - q..end])),
                first_tenth_ma: seed_mean(&|_, ma| mean(&ma[start..start + t])),
                recovery,
                mean_recovery,
            });
        }
    }
    Ok(SummaryStats { window, phases })
}

pub fn summarize_csv(text: &str, window: usize) -> Result<SummaryStats> {
    summarize_rows(&parse_csv(text)?, window)
}

pub fn summarize(path: &Path, window: usize) -> Result<SummaryStats> {
    summarize_rows(&read_csv(path)?, window)
}

impl fmt::Display for SummaryStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "moving-average window: {}", self.window)?;
        writeln!(
            f,
            "{:<11} {:>5} {:>6} {:>8} {:>12} {:>12} {:>10} {:>10} {:>9}",
            "mode", "phase", "start", "episodes", "last_quarter", "first_tenth", "lq_ma", "ft_ma", "recovery"
        )?;
        for p in &self.phases {
            writeln!(
                f,
                "{:<11} {:>5} {:>6} {:>8} {:>12} {:>12} {:>10} {:>10} {:>9}",
                p.mode.as_str(),
                p.phase,
                p.start_episode,
                p.episodes,
                fmt_g(p.last_quarter_mean),
                fmt_g(p.first_tenth_mean),
                fmt_g(p.last_quarter_ma),
                fmt_g(p.first_tenth_ma),
                p.mean_recovery.map_or("-".to_string(), fmt_g)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_warm_up() {
        let ma = moving_average(&[1.0, 0.0, 1.0, 0.0], 2);
        assert_eq!(ma, vec![1.0, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn header_mismatch_is_line_one() {
        let e = parse_csv("mode,seed\n").unwrap_err();
        assert!(matches!(e, Error::Format { line: 1, .. }));
    }

    #[test]
    fn bad_field_reports_its_line() {
        let text = format!("{CSV_HEADER}\nanytime,1,0,0,1,0.5,0,false,,\nanytime,1,1,0,x,0.5,0,false,,\n");
        let e = parse_csv(&text).unwrap_err();
        assert!(matches!(e, Error::Format { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn never_recovering_is_censored() {
        let xs: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { 0.0 }).collect();
        assert_eq!(recovery_episodes(&xs, 20, 40, 5), 20);
    }

    #[test]
    fn immediate_recovery_is_zero() {
        let xs = vec![0.5; 40];
        assert_eq!(recovery_episodes(&xs, 20, 40, 5), 0);
    }
}
