use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{
    compare_to_baseline, correlation_matrix, cronbach_alpha, descriptives, intention_trajectory, AdministrationFilter,
    BaselineTable, ComparisonRow, CorrelationMatrix, Descriptives, ResponseSet, StatsError, Trajectory,
};
use crate::instrument::{ConstructCategory, CENTRAL_CONSTRUCTS, MULTI_ITEM_CONSTRUCTS};

/// Which round's administrations feed the simulated means compared against
/// human baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "round")]
pub enum BaselineRound {
    #[default]
    Final,
    Round(u32),
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub filter: AdministrationFilter,
    pub baseline_round: BaselineRound,
    /// Per-construct item subsets, e.g. two of the four subjective-norm items.
    pub item_subsets: IndexMap<String, Vec<String>>,
    /// Add single-item constructs to the correlation matrix.
    pub include_single_items: bool,
    pub trajectory_construct: String,
    /// Expected number of rounds; rounds without data appear as gaps.
    pub rounds: Option<u32>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            filter: AdministrationFilter::default(),
            baseline_round: BaselineRound::Final,
            item_subsets: IndexMap::new(),
            include_single_items: false,
            trajectory_construct: "intention".to_owned(),
            rounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub construct: String,
    pub name: String,
    pub item_count: usize,
    pub row_count: usize,
    pub alpha: Option<f64>,
    /// Why alpha could not be computed.
    pub note: Option<String>,
    pub human_alpha: Option<f64>,
    pub human_n: Option<u32>,
    pub study: Option<String>,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub construct: String,
    /// Persona id, or `all` for the pooled distribution.
    pub persona: String,
    pub stats: Descriptives,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub options: AnalysisOptions,
    pub administrations: usize,
    pub models: Vec<String>,
    pub personas: Vec<String>,
    pub reliability: Vec<ReliabilityRow>,
    pub correlations: CorrelationMatrix,
    pub descriptives: Vec<DescriptiveRow>,
    pub trajectory: Trajectory,
    pub baseline_comparison: Vec<ComparisonRow>,
    /// Original studies and their sample sizes.
    pub studies: Vec<(String, u32)>,
    pub warnings: Vec<String>,
}

/// Computes every statistic of a run's (filtered) administrations.
pub fn analyze(set: &ResponseSet, baselines: &BaselineTable, options: &AnalysisOptions) -> Result<AnalysisReport, StatsError> {
    let set = set.filter(&options.filter);
    if set.is_empty() {
        return Err(StatsError::EmptySelection);
    }
    let instrument = set.instrument();
    let models = set.distinct(|m| &m.model_id);
    let personas = set.distinct(|m| &m.persona_id);
    let model_label = models.join("+");
    let mut warnings = Vec::new();

    let mut reliability = Vec::new();
    for id in MULTI_ITEM_CONSTRUCTS {
        let Some(construct) = instrument.construct(id) else { continue };
        let subset = options.item_subsets.get(id).map(Vec::as_slice);
        let matrix = set.construct_matrix(id, subset)?;
        let (alpha, note) = match cronbach_alpha(&matrix) {
            Ok(a) => (Some(a), None),
            Err(e) => (None, Some(e.to_string())),
        };
        reliability.push(ReliabilityRow {
            construct: id.to_owned(),
            name: construct.name.clone(),
            item_count: matrix.column_count(),
            row_count: matrix.row_count(),
            alpha,
            note,
            human_alpha: baselines.human_alpha(id),
            human_n: baselines.entry(id).map(|e| e.human_n),
            study: baselines.entry(id).map(|e| e.study.clone()),
            model_id: model_label.clone(),
        });
    }

    let scores = set.construct_scores(&options.item_subsets);
    let mut corr_ids: Vec<String> = MULTI_ITEM_CONSTRUCTS
        .iter()
        .filter(|id| instrument.construct(id).is_some())
        .map(|s| s.to_string())
        .collect();
    if options.include_single_items {
        corr_ids.extend(
            instrument
                .constructs()
                .iter()
                .filter(|c| c.category == ConstructCategory::SingleItem)
                .map(|c| c.id.clone()),
        );
    }
    let correlations = correlation_matrix(&scores, &corr_ids)?;
    for cell in &correlations.undefined {
        warnings.push(format!(
            "correlation {} x {} undefined: {}",
            cell.row, cell.column, cell.reason
        ));
    }

    let mut descriptive_rows = Vec::new();
    for construct in instrument.constructs() {
        let pooled = scores.series(&construct.id);
        if pooled.is_empty() {
            continue;
        }
        descriptive_rows.push(DescriptiveRow {
            construct: construct.id.clone(),
            persona: "all".to_owned(),
            stats: descriptives(&pooled)?,
        });
        for persona in &personas {
            let series = scores.filter(|m| &m.persona_id == persona).series(&construct.id);
            if !series.is_empty() {
                descriptive_rows.push(DescriptiveRow {
                    construct: construct.id.clone(),
                    persona: persona.clone(),
                    stats: descriptives(&series)?,
                });
            }
        }
    }

    let trajectory = intention_trajectory(&set, &options.trajectory_construct, options.rounds)?;
    for gap in trajectory.gaps() {
        warnings.push(format!(
            "no {} administrations for persona {} in round {}",
            trajectory.construct_id, gap.persona_id, gap.round
        ));
    }

    let baseline_rows = match options.baseline_round {
        BaselineRound::Final => set.max_round(),
        BaselineRound::Round(r) => Some(r),
        BaselineRound::All => None,
    };
    let baseline_scores = scores.filter(|m| baseline_rows.is_none_or(|r| m.round == r));
    let mut sim_means = IndexMap::new();
    for id in CENTRAL_CONSTRUCTS {
        let series = baseline_scores.series(id);
        if !series.is_empty() {
            sim_means.insert(id.to_owned(), series.iter().sum::<f64>() / series.len() as f64);
        }
    }
    let baseline_comparison = compare_to_baseline(&sim_means, instrument, baselines)?;
    if baseline_comparison.iter().any(|r| r.human.is_none()) {
        warnings.push("human means missing from the baseline table; comparison lists simulated means only".to_owned());
    }

    Ok(AnalysisReport {
        options: options.clone(),
        administrations: set.len(),
        models,
        personas,
        reliability,
        correlations,
        descriptives: descriptive_rows,
        trajectory,
        baseline_comparison,
        studies: baselines.study_sizes(),
        warnings,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.digits$}"))
}

impl AnalysisReport {
    /// Plain-text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "administrations: {}   models: {}   personas: {}",
            self.administrations,
            self.models.join(", "),
            self.personas.join(", ")
        );
        let _ = writeln!(out, "\nReliability (Cronbach's alpha)");
        let _ = writeln!(
            out,
            "{:<24}{:>7}{:>8}{:>10}{:>8}{:>8}  original study",
            "Scale", "#items", "rows", "simulated", "human", "human n"
        );
        for r in &self.reliability {
            let _ = writeln!(
                out,
                "{:<24}{:>7}{:>8}{:>10}{:>8}{:>8}  {}",
                r.name,
                r.item_count,
                r.row_count,
                fmt_opt(r.alpha, 2),
                fmt_opt(r.human_alpha, 2),
                r.human_n.map_or_else(|| "-".to_owned(), |n| n.to_string()),
                r.study.as_deref().unwrap_or("-")
            );
        }

        let _ = writeln!(out, "\nPearson correlations");
        let _ = write!(out, "{:<24}", "");
        for (j, _) in self.correlations.constructs.iter().enumerate() {
            let _ = write!(out, "{:>7}", format!("[{}]", j + 1));
        }
        let _ = writeln!(out);
        for (i, id) in self.correlations.constructs.iter().enumerate() {
            let _ = write!(out, "{:<24}", format!("[{}] {id}", i + 1));
            for cell in &self.correlations.cells[i] {
                let _ = write!(out, "{:>7}", fmt_opt(*cell, 2));
            }
            let _ = writeln!(out);
        }

        let _ = writeln!(out, "\nDescriptives");
        let _ = writeln!(
            out,
            "{:<24}{:<8}{:>6}{:>7}{:>7}{:>7}{:>7}{:>7}",
            "construct", "persona", "n", "mean", "sd", "q1", "median", "q3"
        );
        for d in &self.descriptives {
            let s = &d.stats;
            let _ = writeln!(
                out,
                "{:<24}{:<8}{:>6}{:>7.2}{:>7}{:>7.2}{:>7.2}{:>7.2}",
                d.construct,
                d.persona,
                s.n,
                s.mean,
                fmt_opt(s.sd, 2),
                s.q1,
                s.median,
                s.q3
            );
        }

        let _ = writeln!(out, "\nTrajectory of {} (grand mean per round)", self.trajectory.construct_id);
        for persona in &self.personas {
            let means: Vec<String> = self
                .trajectory
                .grand_means(persona)
                .into_iter()
                .map(|(r, m)| format!("r{r}={}", fmt_opt(m, 2)))
                .collect();
            let _ = writeln!(out, "  {persona:<8} {}", means.join("  "));
        }

        let _ = writeln!(out, "\nSimulated vs human means");
        for row in &self.baseline_comparison {
            let _ = writeln!(
                out,
                "  {:<24} sim {:>5.2}  human {:>5}  delta {:>6}",
                row.construct,
                row.simulated,
                fmt_opt(row.human, 2),
                fmt_opt(row.delta, 2)
            );
        }
        let _ = writeln!(out, "\nHuman reference samples");
        for (study, n) in &self.studies {
            let _ = writeln!(out, "  {study:<32} n = {n}");
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(out, "\nWarnings");
            for w in &self.warnings {
                let _ = writeln!(out, "  - {w}");
            }
        }
        out
    }
}
