//! CSV tables cut from a loaded run.
//!
//! | table              | columns                                                            |
//! |--------------------|--------------------------------------------------------------------|
//! | `administrations`  | conversation_id, persona, model, round, sample, then one column per item id in instrument order (raw answers; empty when not administered) |
//! | `construct_scores` | conversation_id, persona, model, round, sample, construct, score   |
//! | `trajectory`       | round, persona, conversation_mean, grand_mean                      |

use std::io::Write;
use std::str::FromStr;

use indexmap::IndexMap;

use super::{LoadedRun, StoreError};
use crate::instrument::Instrument;
use crate::psychometrics::export::{num, write_trajectory_csv};
use crate::psychometrics::intention_trajectory;

pub const ADMINISTRATION_META_COLUMNS: [&str; 5] = ["conversation_id", "persona", "model", "round", "sample"];
pub const CONSTRUCT_SCORES_HEADER: [&str; 7] =
    ["conversation_id", "persona", "model", "round", "sample", "construct", "score"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportTable {
    Administrations,
    ConstructScores,
    Trajectory,
}

impl FromStr for ExportTable {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "administrations" => Ok(Self::Administrations),
            "construct_scores" => Ok(Self::ConstructScores),
            "trajectory" => Ok(Self::Trajectory),
            other => Err(StoreError::UnknownTable(other.to_owned())),
        }
    }
}

fn csv_err(e: impl std::fmt::Display) -> StoreError {
    StoreError::Invalid(format!("csv export: {e}"))
}

pub fn export_csv<W: Write>(run: &LoadedRun, table: ExportTable, instrument: &Instrument, out: W) -> Result<(), StoreError> {
    let mut w = csv::Writer::from_writer(out);
    match table {
        ExportTable::Administrations => {
            let items: Vec<&str> = instrument.items().map(|(_, i)| i.id.as_str()).collect();
            let header: Vec<&str> = ADMINISTRATION_META_COLUMNS.iter().copied().chain(items.iter().copied()).collect();
            w.write_record(&header).map_err(csv_err)?;
            for record in &run.records {
                for a in &record.administrations {
                    let mut row = vec![
                        a.conversation_id.clone(),
                        a.persona_id.clone(),
                        a.model_id.clone(),
                        a.round.to_string(),
                        a.sample.to_string(),
                    ];
                    row.extend(items.iter().map(|id| a.answers.get(*id).map(i64::to_string).unwrap_or_default()));
                    w.write_record(&row).map_err(csv_err)?;
                }
            }
        }
        ExportTable::ConstructScores => {
            w.write_record(CONSTRUCT_SCORES_HEADER).map_err(csv_err)?;
            let set = run.response_set(instrument)?;
            for (meta, scores) in set.construct_scores(&IndexMap::new()).rows {
                for (construct, score) in scores {
                    w.write_record([
                        meta.conversation_id.clone(),
                        meta.persona_id.clone(),
                        meta.model_id.clone(),
                        meta.round.to_string(),
                        meta.sample.to_string(),
                        construct,
                        num(score),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        ExportTable::Trajectory => {
            let set = run.response_set(instrument)?;
            let trajectory = intention_trajectory(&set, "intention", None).map_err(csv_err)?;
            let inner = w.into_inner().map_err(csv_err)?;
            return write_trajectory_csv(&trajectory, inner).map_err(csv_err);
        }
    }
    w.flush().map_err(csv_err)
}
