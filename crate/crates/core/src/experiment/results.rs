use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::driver::{RunHistory, Strategy};
use crate::error::{Error, Result};

pub const RESULT_HEADER: [&str; 9] =
    ["problem", "strategy", "seed", "iteration", "evaluations_used", "metric", "metric_kind", "wall_time_seconds", "rec_x"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Regret,
    /// Expected cost of the recommended design and policy.
    Cost,
    /// Expected cost of the recommended design when the adjustable
    /// decisions are chosen with hindsight.
    OracleCost,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Regret => "regret",
            MetricKind::Cost => "cost",
            MetricKind::OracleCost => "oracle_cost",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regret" => Ok(MetricKind::Regret),
            "cost" => Ok(MetricKind::Cost),
            "oracle_cost" => Ok(MetricKind::OracleCost),
            other => Err(Error::Results(format!("unknown metric kind `{other}`"))),
        }
    }
}

/// One checkpoint of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub problem: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub iteration: usize,
    pub evaluations_used: usize,
    pub metric: f64,
    pub metric_kind: MetricKind,
    pub wall_time_seconds: f64,
    /// Recommended design in physical units.
    pub rec_x: Vec<f64>,
}

impl ResultRow {
    fn record(&self) -> [String; 9] {
        [
            self.problem.clone(),
            self.strategy.name().to_string(),
            self.seed.to_string(),
            self.iteration.to_string(),
            self.evaluations_used.to_string(),
            self.metric.to_string(),
            self.metric_kind.to_string(),
            format!("{:.3}", self.wall_time_seconds),
            self.rec_x.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
        ]
    }

    fn parse(rec: &csv::StringRecord, line: u64) -> Result<Self> {
        let bad = |what: &str| Error::Results(format!("line {line}: bad {what}"));
        if rec.len() != RESULT_HEADER.len() {
            return Err(Error::Results(format!("line {line}: expected {} fields, got {}", RESULT_HEADER.len(), rec.len())));
        }
        let rec_x = if rec[8].is_empty() {
            Vec::new()
        } else {
            rec[8].split(';').map(|v| v.parse::<f64>().map_err(|_| bad("rec_x"))).collect::<Result<_>>()?
        };
        Ok(Self {
            problem: rec[0].to_string(),
            strategy: Strategy::parse(&rec[1]).ok_or_else(|| bad("strategy"))?,
            seed: rec[2].parse().map_err(|_| bad("seed"))?,
            iteration: rec[3].parse().map_err(|_| bad("iteration"))?,
            evaluations_used: rec[4].parse().map_err(|_| bad("evaluations_used"))?,
            metric: rec[5].parse().map_err(|_| bad("metric"))?,
            metric_kind: rec[6].parse()?,
            wall_time_seconds: rec[7].parse().map_err(|_| bad("wall_time_seconds"))?,
            rec_x,
        })
    }
}

/// Result rows of a finished run: one regret row per checkpoint, or a cost
/// and an oracle-cost row for cost problems.
pub fn rows_from_history(history: &RunHistory) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for c in &history.checkpoints {
        let row = |metric, metric_kind| ResultRow {
            problem: history.problem.clone(),
            strategy: history.strategy,
            seed: history.seed,
            iteration: c.iteration,
            evaluations_used: c.evaluations_used,
            metric,
            metric_kind,
            wall_time_seconds: c.wall_time,
            rec_x: c.physical_x.clone(),
        };
        match (c.estimate.cost, c.estimate.oracle_cost) {
            (Some(cost), Some(oracle)) => {
                rows.push(row(cost, MetricKind::Cost));
                rows.push(row(oracle, MetricKind::OracleCost));
            }
            _ => rows.push(row(c.estimate.regret, MetricKind::Regret)),
        }
    }
    rows
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Results(e.to_string());
    w.write_record(RESULT_HEADER).map_err(io)?;
    for r in rows {
        w.write_record(r.record()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Results(e.to_string()))
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::Results(e.to_string()))?;
    if header.iter().ne(RESULT_HEADER) {
        return Err(Error::Results(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::Results(e.to_string()))?;
            ResultRow::parse(&rec, i as u64 + 2)
        })
        .collect()
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    write_atomic(path, &buf)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows(std::io::BufReader::new(file))
}

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: f64, rec_x: Vec<f64>) -> ResultRow {
        ResultRow {
            problem: "gp-1-1-1".into(),
            strategy: Strategy::TwoStepKg,
            seed: 4,
            iteration: 5,
            evaluations_used: 15,
            metric,
            metric_kind: MetricKind::Regret,
            wall_time_seconds: 1.25,
            rec_x,
        }
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let rows = vec![row(0.1 + 0.2, vec![0.5, 1.0 / 3.0]), row(-2.5e-7, vec![]), row(3.0, vec![4000.0])];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("problem,strategy,seed,iteration,evaluations_used,metric,metric_kind,wall_time_seconds,rec_x\n"));
        assert!(text.contains("0.5;0.3333333333333333"));
        assert_eq!(read_rows(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn malformed_files_are_reported() {
        assert!(read_rows("a,b\n1,2\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row(1.0, vec![])]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("regret", "loss");
        let err = read_rows(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("loss"), "{err}");
    }
}
