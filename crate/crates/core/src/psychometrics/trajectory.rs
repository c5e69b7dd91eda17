use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{ResponseSet, StatsError};

/// One conversation's mean at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationMean {
    pub conversation_id: String,
    pub mean: f64,
    pub administrations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub round: u32,
    pub persona_id: String,
    pub conversations: Vec<ConversationMean>,
    /// Mean over conversation means; `None` marks a round without data.
    pub grand_mean: Option<f64>,
}

impl TrajectoryPoint {
    pub fn is_gap(&self) -> bool {
        self.grand_mean.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub construct_id: String,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    /// Grand means of one persona by round.
    pub fn grand_means(&self, persona_id: &str) -> Vec<(u32, Option<f64>)> {
        self.points
            .iter()
            .filter(|p| p.persona_id == persona_id)
            .map(|p| (p.round, p.grand_mean))
            .collect()
    }

    pub fn gaps(&self) -> impl Iterator<Item = &TrajectoryPoint> {
        self.points.iter().filter(|p| p.is_gap())
    }
}

/// Per-round, per-persona means of a construct.
///
/// Each conversation contributes the mean of its construct scores at that
/// round (equivalently, the mean over items and samples); the grand mean
/// averages over conversations. Rounds `1..=rounds` are always listed, so a
/// round without administrations shows up as a gap.
pub fn intention_trajectory(set: &ResponseSet, construct_id: &str, rounds: Option<u32>) -> Result<Trajectory, StatsError> {
    set.instrument()
        .require_construct(construct_id)
        .map_err(|_| StatsError::UnknownConstruct(construct_id.to_owned()))?;
    let scores = set.construct_scores(&IndexMap::new());
    let rounds = rounds.or_else(|| set.max_round()).unwrap_or(0);
    let personas = set.distinct(|m| &m.persona_id);

    let mut points = Vec::new();
    for round in 1..=rounds {
        for persona in &personas {
            let mut by_conversation: IndexMap<&str, (f64, usize)> = IndexMap::new();
            for (meta, s) in &scores.rows {
                if meta.round != round || &meta.persona_id != persona {
                    continue;
                }
                if let Some(v) = s.get(construct_id) {
                    let slot = by_conversation.entry(meta.conversation_id.as_str()).or_insert((0.0, 0));
                    slot.0 += v;
                    slot.1 += 1;
                }
            }
            let conversations: Vec<ConversationMean> = by_conversation
                .into_iter()
                .map(|(id, (sum, n))| ConversationMean {
                    conversation_id: id.to_owned(),
                    mean: sum / n as f64,
                    administrations: n,
                })
                .collect();
            let grand_mean = (!conversations.is_empty())
                .then(|| conversations.iter().map(|c| c.mean).sum::<f64>() / conversations.len() as f64);
            points.push(TrajectoryPoint {
                round,
                persona_id: persona.clone(),
                conversations,
                grand_mean,
            });
        }
    }
    Ok(Trajectory {
        construct_id: construct_id.to_owned(),
        points,
    })
}
