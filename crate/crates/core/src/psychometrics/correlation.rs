use serde::{Deserialize, Serialize};

use super::{pearson, ConstructScores, StatsError};

/// Pairwise Pearson correlations between constructs.
///
/// Each off-diagonal cell uses the administrations that measured both
/// constructs. Cells whose correlation is undefined (a constant series, or
/// fewer than two paired rows) are `None` and listed in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub constructs: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    /// Number of paired rows behind each cell.
    pub counts: Vec<Vec<usize>>,
    pub undefined: Vec<UndefinedCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndefinedCell {
    pub row: String,
    pub column: String,
    pub reason: String,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.constructs.iter().position(|c| c == a)?;
        let j = self.constructs.iter().position(|c| c == b)?;
        self.cells[i][j]
    }
}

pub fn correlation_matrix(scores: &ConstructScores, constructs: &[String]) -> Result<CorrelationMatrix, StatsError> {
    if scores.rows.len() < 2 {
        return Err(StatsError::TooFewRows(scores.rows.len()));
    }
    let k = constructs.len();
    let mut cells = vec![vec![None; k]; k];
    let mut counts = vec![vec![0; k]; k];
    let mut undefined = Vec::new();
    for i in 0..k {
        cells[i][i] = Some(1.0);
        counts[i][i] = scores.series(&constructs[i]).len();
        for j in (i + 1)..k {
            let (x, y) = scores.paired(&constructs[i], &constructs[j]);
            counts[i][j] = x.len();
            counts[j][i] = x.len();
            match pearson(&x, &y) {
                Ok(r) => {
                    cells[i][j] = Some(r);
                    cells[j][i] = Some(r);
                }
                Err(e) => undefined.push(UndefinedCell {
                    row: constructs[i].clone(),
                    column: constructs[j].clone(),
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(CorrelationMatrix {
        constructs: constructs.to_vec(),
        cells,
        counts,
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psychometrics::RowMeta;
    use indexmap::IndexMap;

    fn scores(rows: &[[f64; 3]]) -> ConstructScores {
        ConstructScores {
            rows: rows
                .iter()
                .map(|r| {
                    let map: IndexMap<String, f64> = ["a", "b", "c"]
                        .iter()
                        .map(|s| s.to_string())
                        .zip(r.iter().copied())
                        .collect();
                    (RowMeta::default(), map)
                })
                .collect(),
        }
    }

    #[test]
    fn collinear_and_constant() {
        let s = scores(&[[1.0, 2.0, 4.0], [2.0, 4.0, 4.0], [3.0, 6.0, 4.0]]);
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let m = correlation_matrix(&s, &ids).unwrap();
        assert_eq!(m.get("a", "b"), Some(1.0));
        assert_eq!(m.get("a", "c"), None);
        assert_eq!(m.undefined.len(), 2);
        for i in 0..3 {
            assert_eq!(m.cells[i][i], Some(1.0));
            for j in 0..3 {
                assert_eq!(m.cells[i][j], m.cells[j][i]);
            }
        }
    }
}
