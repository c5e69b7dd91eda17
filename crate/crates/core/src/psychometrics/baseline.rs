//! Human reference statistics and simulated-vs-human comparison.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::instrument::{Instrument, LikertScale};

const BUILTIN_BASELINE: &str = include_str!("../../data/baseline.toml");
const BASELINE_FORMAT_VERSION: u32 = 1;

/// The only scale on which simulated and human means are compared.
pub const COMPARISON_SCALE: LikertScale = LikertScale { min: 1, max: 7 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub construct: String,
    pub study: String,
    pub human_n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_mean: Option<f64>,
    pub scale: LikertScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTable {
    format_version: u32,
    #[serde(rename = "entry")]
    entries: Vec<BaselineEntry>,
}

impl BaselineTable {
    /// The shipped table of published human alphas and sample sizes.
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_BASELINE).expect("shipped baseline table parses")
    }

    pub fn builtin_source() -> &'static str {
        BUILTIN_BASELINE
    }

    pub fn from_toml(text: &str) -> Result<Self, StatsError> {
        let table: Self = toml::from_str(text).map_err(|e| StatsError::Baseline(e.to_string()))?;
        if table.format_version != BASELINE_FORMAT_VERSION {
            return Err(StatsError::Baseline(format!(
                "unsupported baseline format version {}",
                table.format_version
            )));
        }
        Ok(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("baseline serializes")
    }

    pub fn entries(&self) -> &[BaselineEntry] {
        &self.entries
    }

    pub fn entry(&self, construct: &str) -> Option<&BaselineEntry> {
        self.entries.iter().find(|e| e.construct == construct)
    }

    pub fn human_alpha(&self, construct: &str) -> Option<f64> {
        self.entry(construct).and_then(|e| e.human_alpha)
    }

    /// Sets or replaces a published human mean.
    pub fn set_human_mean(&mut self, construct: &str, mean: f64) -> Result<(), StatsError> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.construct == construct)
            .ok_or_else(|| StatsError::UnknownConstruct(construct.to_owned()))?;
        entry.human_mean = Some(mean);
        Ok(())
    }

    /// Distinct source studies with their sample sizes, in table order.
    pub fn study_sizes(&self) -> Vec<(String, u32)> {
        let mut out: Vec<(String, u32)> = Vec::new();
        for e in &self.entries {
            if !out.iter().any(|(s, _)| *s == e.study) {
                out.push((e.study.clone(), e.human_n));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub construct: String,
    pub study: String,
    pub simulated: f64,
    pub human: Option<f64>,
    /// `simulated - human`, when the human mean is known.
    pub delta: Option<f64>,
}

/// Pairs simulated construct means with human reference means.
///
/// Both sides must be on the 1 to 7 scale; anything else is rejected rather
/// than rescaled.
pub fn compare_to_baseline(
    sim_means: &IndexMap<String, f64>,
    instrument: &Instrument,
    baselines: &BaselineTable,
) -> Result<Vec<ComparisonRow>, StatsError> {
    let mut rows = Vec::with_capacity(sim_means.len());
    for (construct_id, &simulated) in sim_means {
        let construct = instrument
            .require_construct(construct_id)
            .map_err(|_| StatsError::UnknownConstruct(construct_id.clone()))?;
        let entry = baselines
            .entry(construct_id)
            .ok_or_else(|| StatsError::MissingBaseline(construct_id.clone()))?;
        for scale in [construct.scale, entry.scale] {
            if scale != COMPARISON_SCALE {
                return Err(StatsError::ScaleMismatch {
                    construct: construct_id.clone(),
                    min: scale.min,
                    max: scale.max,
                });
            }
        }
        rows.push(ComparisonRow {
            construct: construct_id.clone(),
            study: entry.study.clone(),
            simulated,
            human: entry.human_mean,
            delta: entry.human_mean.map(|h| simulated - h),
        });
    }
    Ok(rows)
}
