use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::instrument::{score_item, Administration, Instrument, InstrumentError};

/// Where one matrix row came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct RowMeta {
    pub conversation_id: String,
    pub round: u32,
    pub sample: u32,
    pub persona_id: String,
    pub model_id: String,
}

impl From<&Administration> for RowMeta {
    fn from(a: &Administration) -> Self {
        Self {
            conversation_id: a.conversation_id.clone(),
            round: a.round,
            sample: a.sample,
            persona_id: a.persona_id.clone(),
            model_id: a.model_id.clone(),
        }
    }
}

/// Rectangular table of scored values: one row per administration, one
/// column per item.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    columns: Vec<String>,
    rows: Vec<RowMeta>,
    values: Vec<Vec<f64>>,
}

impl ResponseMatrix {
    pub fn new(columns: Vec<String>, rows: Vec<RowMeta>, values: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        if rows.len() != values.len() || values.iter().any(|r| r.len() != columns.len()) {
            return Err(StatsError::NotRectangular);
        }
        Ok(Self { columns, rows, values })
    }

    /// Anonymous matrix with generated column names.
    pub fn from_rows(values: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        let width = values.first().map_or(0, Vec::len);
        let columns = (1..=width).map(|j| format!("c{j}")).collect();
        let rows = vec![RowMeta::default(); values.len()];
        Self::new(columns, rows, values)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[RowMeta] {
        &self.rows
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row_count(&self) -> usize {
        self.values.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }
}

/// Row selection by persona, round and model. Empty lists select everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdministrationFilter {
    #[serde(default)]
    pub personas: Vec<String>,
    #[serde(default)]
    pub rounds: Vec<u32>,
    #[serde(default)]
    pub models: Vec<String>,
}

impl AdministrationFilter {
    pub fn matches(&self, meta: &RowMeta) -> bool {
        (self.personas.is_empty() || self.personas.contains(&meta.persona_id))
            && (self.rounds.is_empty() || self.rounds.contains(&meta.round))
            && (self.models.is_empty() || self.models.contains(&meta.model_id))
    }

    pub fn is_empty(&self) -> bool {
        self.personas.is_empty() && self.rounds.is_empty() && self.models.is_empty()
    }
}

/// One administration after scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAdministration {
    pub meta: RowMeta,
    pub constructs: Vec<String>,
    pub scores: IndexMap<String, f64>,
}

/// Scored administrations of a run, from which matrices are cut.
#[derive(Debug, Clone)]
pub struct ResponseSet {
    instrument: Instrument,
    rows: Vec<ScoredAdministration>,
}

impl ResponseSet {
    pub fn new(instrument: Instrument) -> Self {
        Self {
            instrument,
            rows: Vec::new(),
        }
    }

    /// Validates and scores an administration.
    pub fn push(&mut self, admin: &Administration) -> Result<(), InstrumentError> {
        let validated = self
            .instrument
            .validate_administration(admin.clone())
            .map_err(|e| e.0.into_iter().next().expect("non-empty error list"))?;
        let admin = validated.get();
        let mut scores = IndexMap::with_capacity(admin.answers.len());
        for (id, &raw) in &admin.answers {
            let (_, item) = self.instrument.item(id).expect("validated item");
            scores.insert(id.clone(), score_item(item, raw)?);
        }
        self.rows.push(ScoredAdministration {
            meta: RowMeta::from(admin),
            constructs: admin.constructs.clone(),
            scores,
        });
        Ok(())
    }

    pub fn instrument(&self) -> &Instrument {
        &self.instrument
    }

    pub fn rows(&self) -> &[ScoredAdministration] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn filter(&self, filter: &AdministrationFilter) -> ResponseSet {
        Self {
            instrument: self.instrument.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| filter.matches(&r.meta))
                .cloned()
                .collect(),
        }
    }

    /// Distinct values of a metadata field, in first-seen order.
    pub fn distinct(&self, field: impl Fn(&RowMeta) -> &str) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for row in &self.rows {
            let value = field(&row.meta);
            if !seen.iter().any(|s| s == value) {
                seen.push(value.to_owned());
            }
        }
        seen
    }

    pub fn max_round(&self) -> Option<u32> {
        self.rows.iter().map(|r| r.meta.round).max()
    }

    /// Item matrix over the rows that answered every listed item.
    pub fn item_matrix(&self, item_ids: &[String]) -> Result<ResponseMatrix, StatsError> {
        let mut metas = Vec::new();
        let mut values = Vec::new();
        for row in &self.rows {
            let cells: Option<Vec<f64>> = item_ids.iter().map(|id| row.scores.get(id).copied()).collect();
            if let Some(cells) = cells {
                metas.push(row.meta.clone());
                values.push(cells);
            }
        }
        ResponseMatrix::new(item_ids.to_vec(), metas, values)
    }

    /// Item matrix of one construct, optionally restricted to a subset of
    /// its items.
    pub fn construct_matrix(&self, construct_id: &str, item_subset: Option<&[String]>) -> Result<ResponseMatrix, StatsError> {
        let construct = self
            .instrument
            .require_construct(construct_id)
            .map_err(|_| StatsError::UnknownConstruct(construct_id.to_owned()))?;
        let construct = match item_subset {
            Some(ids) => construct
                .restricted_to(ids)
                .map_err(|e| StatsError::Instrument(e.to_string()))?,
            None => construct.clone(),
        };
        let ids: Vec<String> = construct.item_ids().map(str::to_owned).collect();
        self.item_matrix(&ids)
    }

    /// Per-administration construct means for every administered construct.
    pub fn construct_scores(&self, item_subsets: &IndexMap<String, Vec<String>>) -> ConstructScores {
        let mut rows = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut scores = IndexMap::new();
            for construct in self.instrument.constructs() {
                if !row.constructs.contains(&construct.id) {
                    continue;
                }
                let ids: Vec<&str> = match item_subsets.get(&construct.id) {
                    Some(subset) => subset.iter().map(String::as_str).collect(),
                    None => construct.item_ids().collect(),
                };
                let values: Option<Vec<f64>> = ids.iter().map(|id| row.scores.get(*id).copied()).collect();
                if let Some(values) = values.filter(|v| !v.is_empty()) {
                    scores.insert(construct.id.clone(), values.iter().sum::<f64>() / values.len() as f64);
                }
            }
            rows.push((row.meta.clone(), scores));
        }
        ConstructScores { rows }
    }
}

/// Construct means per administration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstructScores {
    pub rows: Vec<(RowMeta, IndexMap<String, f64>)>,
}

impl ConstructScores {
    /// Scores of one construct over the rows that measured it.
    pub fn series(&self, construct_id: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|(_, s)| s.get(construct_id).copied())
            .collect()
    }

    /// Paired scores over rows that measured both constructs.
    pub fn paired(&self, a: &str, b: &str) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter_map(|(_, s)| Some((*s.get(a)?, *s.get(b)?)))
            .unzip()
    }

    pub fn filter(&self, keep: impl Fn(&RowMeta) -> bool) -> ConstructScores {
        Self {
            rows: self.rows.iter().filter(|(m, _)| keep(m)).cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::builtin_instrument;

    fn admin(persona: &str, round: u32, intention: [i64; 3]) -> Administration {
        let ids = ["intention_white_meat", "intention_red_meat", "intention_processed_meat"];
        Administration {
            conversation_id: format!("{persona}-1"),
            round,
            sample: 1,
            persona_id: persona.into(),
            model_id: "m".into(),
            constructs: vec!["intention".into()],
            answers: ids.iter().map(|s| s.to_string()).zip(intention).collect(),
        }
    }

    #[test]
    fn filters_and_matrices() {
        let mut set = ResponseSet::new(builtin_instrument());
        set.push(&admin("easy", 1, [6, 7, 7])).unwrap();
        set.push(&admin("hard", 1, [2, 3, 1])).unwrap();
        set.push(&admin("hard", 2, [1, 1, 2])).unwrap();

        let hard = set.filter(&AdministrationFilter {
            personas: vec!["hard".into()],
            ..Default::default()
        });
        assert_eq!(hard.len(), 2);
        let m = hard.construct_matrix("intention", None).unwrap();
        assert_eq!(m.values(), &[vec![2.0, 3.0, 1.0], vec![1.0, 1.0, 2.0]]);

        let scores = set.construct_scores(&IndexMap::new());
        assert_eq!(scores.series("intention"), vec![20.0 / 3.0, 2.0, 4.0 / 3.0]);
        assert!(scores.series("attitude").is_empty());
    }

    #[test]
    fn rejects_invalid_administration() {
        let mut set = ResponseSet::new(builtin_instrument());
        assert!(set.push(&admin("easy", 1, [6, 9, 7])).is_err());
        assert!(set.is_empty());
    }

    #[test]
    fn ragged_matrix_rejected() {
        assert_eq!(
            ResponseMatrix::from_rows(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(StatsError::NotRectangular)
        );
    }
}
