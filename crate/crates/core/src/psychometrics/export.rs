//! Plot-ready CSV tables.
//!
//! | file              | columns                                                          |
//! |-------------------|------------------------------------------------------------------|
//! | `boxplot.csv`     | construct, persona, n, mean, median, sd, q1, q3, min, max, human_mean |
//! | `scatter.csv`     | construct, study, simulated_mean, human_mean, delta              |
//! | `correlation.csv` | construct_a, construct_b, r, n                                   |
//! | `trajectory.csv`  | round, persona, conversation_mean, grand_mean                    |
//!
//! Numbers use Rust's shortest round-trip formatting, independent of locale.
//! Missing values are empty cells.

use std::io::Write;

use super::{AnalysisReport, BaselineTable, ComparisonRow, CorrelationMatrix, DescriptiveRow, StatsError, Trajectory};

pub const BOXPLOT_HEADER: [&str; 11] = [
    "construct",
    "persona",
    "n",
    "mean",
    "median",
    "sd",
    "q1",
    "q3",
    "min",
    "max",
    "human_mean",
];
pub const SCATTER_HEADER: [&str; 5] = ["construct", "study", "simulated_mean", "human_mean", "delta"];
pub const CORRELATION_HEADER: [&str; 4] = ["construct_a", "construct_b", "r", "n"];
pub const TRAJECTORY_HEADER: [&str; 4] = ["round", "persona", "conversation_mean", "grand_mean"];

pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_err(e: impl std::fmt::Display) -> StatsError {
    StatsError::Export(e.to_string())
}

pub fn write_boxplot_csv<W: Write>(rows: &[DescriptiveRow], baselines: &BaselineTable, out: W) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOXPLOT_HEADER).map_err(csv_err)?;
    for r in rows {
        let s = &r.stats;
        let human = baselines.entry(&r.construct).and_then(|e| e.human_mean);
        w.write_record([
            r.construct.clone(),
            r.persona.clone(),
            s.n.to_string(),
            num(s.mean),
            num(s.median),
            opt(s.sd),
            num(s.q1),
            num(s.q3),
            num(s.min),
            num(s.max),
            opt(human),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_scatter_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCATTER_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.construct.clone(),
            r.study.clone(),
            num(r.simulated),
            opt(r.human),
            opt(r.delta),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_correlation_csv<W: Write>(matrix: &CorrelationMatrix, out: W) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CORRELATION_HEADER).map_err(csv_err)?;
    for (i, a) in matrix.constructs.iter().enumerate() {
        for (j, b) in matrix.constructs.iter().enumerate() {
            w.write_record([a.clone(), b.clone(), opt(matrix.cells[i][j]), matrix.counts[i][j].to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)
}

/// One row per (round, persona, conversation); a gap is a single row with
/// empty mean cells.
pub fn write_trajectory_csv<W: Write>(trajectory: &Trajectory, out: W) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for p in &trajectory.points {
        if p.conversations.is_empty() {
            w.write_record([p.round.to_string(), p.persona_id.clone(), String::new(), String::new()])
                .map_err(csv_err)?;
        }
        for c in &p.conversations {
            w.write_record([
                p.round.to_string(),
                p.persona_id.clone(),
                num(c.mean),
                opt(p.grand_mean),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)
}

/// The four figure tables of a report, in file order.
pub fn figure_tables(report: &AnalysisReport, baselines: &BaselineTable) -> Result<Vec<(&'static str, Vec<u8>)>, StatsError> {
    let mut boxplot = Vec::new();
    write_boxplot_csv(&report.descriptives, baselines, &mut boxplot)?;
    let mut scatter = Vec::new();
    write_scatter_csv(&report.baseline_comparison, &mut scatter)?;
    let mut correlation = Vec::new();
    write_correlation_csv(&report.correlations, &mut correlation)?;
    let mut trajectory = Vec::new();
    write_trajectory_csv(&report.trajectory, &mut trajectory)?;
    Ok(vec![
        ("boxplot.csv", boxplot),
        ("scatter.csv", scatter),
        ("correlation.csv", correlation),
        ("trajectory.csv", trajectory),
    ])
}
