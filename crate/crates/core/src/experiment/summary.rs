use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::results::{write_atomic, MetricKind, ResultRow};
use crate::driver::Strategy;
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: [&str; 11] = [
    "problem",
    "strategy",
    "metric_kind",
    "evaluations_used",
    "iteration",
    "replicates",
    "mean",
    "se",
    "lower",
    "upper",
    "single_replicate",
];

/// Mean and standard error of one metric across replicates at one
/// evaluation count, with the mean ± 2 SE band.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub problem: String,
    pub strategy: Strategy,
    pub metric_kind: MetricKind,
    pub evaluations_used: usize,
    /// Proposals made after the initial designs at this point.
    pub iteration: usize,
    pub replicates: usize,
    pub mean: f64,
    /// Zero, and flagged, when there is a single replicate.
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    pub single_replicate: bool,
}

/// Groups rows by (problem, strategy, metric kind, evaluations used).
/// Non-finite metrics are dropped with a warning; groups left empty are
/// omitted.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, Strategy, MetricKind, usize), (usize, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let entry = groups.entry((r.problem.clone(), r.strategy, r.metric_kind, r.evaluations_used)).or_insert((r.iteration, Vec::new()));
        if r.metric.is_finite() {
            entry.1.push(r.metric);
        } else {
            log::warn!("dropping non-finite {} of {} seed {} at {} evaluations", r.metric_kind, r.strategy, r.seed, r.evaluations_used);
        }
    }
    groups
        .into_iter()
        .filter_map(|((problem, strategy, metric_kind, evaluations_used), (iteration, values))| {
            if values.is_empty() {
                log::warn!("no usable rows for {strategy} {metric_kind} at {evaluations_used} evaluations");
                return None;
            }
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let se = if n > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            Some(SummaryRow {
                problem,
                strategy,
                metric_kind,
                evaluations_used,
                iteration,
                replicates: n,
                mean,
                se,
                lower: mean - 2.0 * se,
                upper: mean + 2.0 * se,
                single_replicate: n == 1,
            })
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Results(e.to_string());
    w.write_record(SUMMARY_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.strategy.name().to_string(),
            r.metric_kind.to_string(),
            r.evaluations_used.to_string(),
            r.iteration.to_string(),
            r.replicates.to_string(),
            r.mean.to_string(),
            r.se.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.single_replicate.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Results(e.to_string()))
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::Results(e.to_string()))?;
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(Error::Results("not a summary file (unexpected header)".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Results(e.to_string()))?;
        let bad = |what: &str| Error::Results(format!("summary line {}: bad {what}", i + 2));
        let num = |k: usize, what: &str| rec[k].parse::<f64>().map_err(|_| bad(what));
        rows.push(SummaryRow {
            problem: rec[0].to_string(),
            strategy: Strategy::parse(&rec[1]).ok_or_else(|| bad("strategy"))?,
            metric_kind: rec[2].parse()?,
            evaluations_used: rec[3].parse().map_err(|_| bad("evaluations_used"))?,
            iteration: rec[4].parse().map_err(|_| bad("iteration"))?,
            replicates: rec[5].parse().map_err(|_| bad("replicates"))?,
            mean: num(6, "mean")?,
            se: num(7, "se")?,
            lower: num(8, "lower")?,
            upper: num(9, "upper")?,
            single_replicate: rec[10].parse().map_err(|_| bad("single_replicate"))?,
        });
    }
    Ok(rows)
}

pub fn write_summary_file(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut buf = Vec::new();
    write_summary(&mut buf, rows)?;
    write_atomic(path, &buf)
}

pub fn read_summary_file(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_summary(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, evals: usize, metric: f64) -> ResultRow {
        ResultRow {
            problem: "p".into(),
            strategy: Strategy::JointKg,
            seed,
            iteration: evals - 10,
            evaluations_used: evals,
            metric,
            metric_kind: MetricKind::Regret,
            wall_time_seconds: 0.0,
            rec_x: vec![],
        }
    }

    #[test]
    fn mean_and_standard_error() {
        let s = summarize(&[row(0, 10, 1.0), row(1, 10, 2.0), row(2, 10, 3.0)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mean, 2.0);
        assert!((s[0].se - 0.5773502691896258).abs() < 1e-12);
        assert!((s[0].upper - s[0].lower - 4.0 * s[0].se).abs() < 1e-12);
        assert!(!s[0].single_replicate);
    }

    #[test]
    fn single_replicates_are_flagged() {
        let s = summarize(&[row(0, 10, 1.5), row(0, 15, 0.5)]);
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|r| r.se == 0.0 && r.single_replicate && r.replicates == 1));
        assert_eq!(s[1].iteration, 5);
    }

    #[test]
    fn non_finite_groups_are_omitted() {
        let s = summarize(&[row(0, 10, f64::NAN), row(0, 15, 1.0), row(1, 15, f64::INFINITY)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].evaluations_used, 15);
    }

    #[test]
    fn summary_round_trips() {
        let s = summarize(&[row(0, 10, 1.0), row(1, 10, 2.5), row(0, 20, 0.25)]);
        let mut buf = Vec::new();
        write_summary(&mut buf, &s).unwrap();
        assert_eq!(read_summary(&buf[..]).unwrap(), s);
    }
}
