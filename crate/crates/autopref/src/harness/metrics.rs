//! Per-episode metrics, their CSV form, and cross-seed aggregation.
//!
//! The reward column is always the hand-crafted known reward, whatever
//! reward the method trained on, so curves from different methods share an
//! axis.

use std::io::{BufRead, BufReader, Read, Write};

use crate::harness::HarnessError;

/// One Q-learning episode's bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub steps: usize,
    pub cumulative_steps: u64,
    /// Reward accrued under the reference (known) reward.
    pub reference_reward: f64,
    pub accepted: bool,
}

pub const CSV_HEADER: &str = "episode,steps,cumulative_steps,reference_reward,accepted";

/// Writes the metrics CSV. Float formatting is shortest-round-trip, so the
/// file parses back to bit-identical values.
pub fn write_csv<W: Write>(metrics: &[EpisodeMetrics], mut out: W) -> Result<(), HarnessError> {
    writeln!(out, "{CSV_HEADER}")?;
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{},{}",
            m.episode, m.steps, m.cumulative_steps, m.reference_reward, m.accepted
        )?;
    }
    Ok(())
}

/// Parses a metrics CSV written by [`write_csv`].
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<EpisodeMetrics>, HarnessError> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().transpose()?;
    if header.as_deref() != Some(CSV_HEADER) {
        return Err(HarnessError::Csv { line: 1, msg: "bad or missing header".to_string() });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(HarnessError::Csv { line: i + 2, msg: "expected 5 fields".to_string() });
        }
        let parse_err = |what: &str| HarnessError::Csv {
            line: i + 2,
            msg: format!("bad {what} field"),
        };
        out.push(EpisodeMetrics {
            episode: fields[0].parse().map_err(|_| parse_err("episode"))?,
            steps: fields[1].parse().map_err(|_| parse_err("steps"))?,
            cumulative_steps: fields[2].parse().map_err(|_| parse_err("cumulative_steps"))?,
            reference_reward: fields[3].parse().map_err(|_| parse_err("reference_reward"))?,
            accepted: fields[4].parse().map_err(|_| parse_err("accepted"))?,
        });
    }
    Ok(out)
}

/// Pairs each episode's cumulative step count with the running total of
/// reference reward: the learning-efficiency curve.
pub fn reward_per_cumulative_steps(metrics: &[EpisodeMetrics]) -> Vec<(u64, f64)> {
    let mut total = 0.0;
    metrics
        .iter()
        .map(|m| {
            total += m.reference_reward;
            (m.cumulative_steps, total)
        })
        .collect()
}

/// Per-episode aggregate across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub episode: usize,
    pub mean_reference_reward: f64,
    pub std_reference_reward: f64,
    pub mean_steps: f64,
    pub std_steps: f64,
    pub acceptance_rate: f64,
}

pub const AGGREGATE_HEADER: &str =
    "episode,mean_reference_reward,std_reference_reward,mean_steps,std_steps,acceptance_rate";

/// Mean and sample standard deviation per episode across seed runs. All runs
/// must have the same episode count.
pub fn aggregate(runs: &[Vec<EpisodeMetrics>]) -> Result<Vec<AggregateRow>, HarnessError> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    if runs.iter().any(|r| r.len() != first.len()) {
        return Err(HarnessError::MismatchedRuns);
    }
    let n = runs.len() as f64;
    let mut rows = Vec::with_capacity(first.len());
    for e in 0..first.len() {
        let rewards: Vec<f64> = runs.iter().map(|r| r[e].reference_reward).collect();
        let steps: Vec<f64> = runs.iter().map(|r| r[e].steps as f64).collect();
        let accepted = runs.iter().filter(|r| r[e].accepted).count() as f64;
        rows.push(AggregateRow {
            episode: first[e].episode,
            mean_reference_reward: mean(&rewards),
            std_reference_reward: sample_std(&rewards),
            mean_steps: mean(&steps),
            std_steps: sample_std(&steps),
            acceptance_rate: accepted / n,
        });
    }
    Ok(rows)
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], mut out: W) -> Result<(), HarnessError> {
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.episode,
            r.mean_reference_reward,
            r.std_reference_reward,
            r.mean_steps,
            r.std_steps,
            r.acceptance_rate
        )?;
    }
    Ok(())
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
