//! Declarative instrument files.
//!
//! ```toml
//! format_version = 1
//!
//! [[construct]]
//! id = "intention"
//! name = "Intention to Reduce Meat"
//! category = "tpb"
//! scale = { min = 1, max = 7 }
//! prompt = "Indicate how much you agree with each statement."
//!
//! [[construct.item]]
//! id = "intention_white_meat"
//! text = "I intend to eat less white meat."
//! ```

use serde::{Deserialize, Serialize};

use super::{Construct, ConstructCategory, Instrument, InstrumentError, Item, ItemKind, LikertScale, ScaleAnchors};

pub const INSTRUMENT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct InstrumentFile {
    format_version: u32,
    #[serde(rename = "construct")]
    constructs: Vec<ConstructBlock>,
}

#[derive(Serialize, Deserialize)]
struct ConstructBlock {
    id: String,
    name: String,
    category: ConstructCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_study: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline_study: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    human_alpha: Option<f64>,
    scale: LikertScale,
    prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchors: Option<ScaleAnchors>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stem: Option<String>,
    #[serde(rename = "item")]
    items: Vec<ItemBlock>,
}

#[derive(Serialize, Deserialize)]
struct ItemBlock {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    reverse_coded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positive_pole: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    negative_pole: Option<String>,
}

impl Instrument {
    pub fn to_toml(&self) -> String {
        let file = InstrumentFile {
            format_version: INSTRUMENT_FORMAT_VERSION,
            constructs: self
                .constructs
                .iter()
                .map(|c| ConstructBlock {
                    id: c.id.clone(),
                    name: c.name.clone(),
                    category: c.category,
                    source_study: c.source_study.clone(),
                    baseline_study: c.baseline_study.clone(),
                    human_alpha: c.human_alpha,
                    scale: c.scale,
                    prompt: c.prompt.clone(),
                    anchors: c.anchors.clone(),
                    stem: c.stem.clone(),
                    items: c
                        .items
                        .iter()
                        .map(|item| {
                            let (positive_pole, negative_pole) = match &item.kind {
                                ItemKind::Likert => (None, None),
                                ItemKind::SemanticDifferential {
                                    positive_pole,
                                    negative_pole,
                                } => (Some(positive_pole.clone()), Some(negative_pole.clone())),
                            };
                            ItemBlock {
                                id: item.id.clone(),
                                text: item.text.clone(),
                                reverse_coded: item.reverse_coded,
                                positive_pole,
                                negative_pole,
                            }
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("instrument serializes to TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, InstrumentError> {
        let file: InstrumentFile = toml::from_str(text).map_err(|e| InstrumentError::Parse(e.to_string()))?;
        if file.format_version != INSTRUMENT_FORMAT_VERSION {
            return Err(InstrumentError::UnsupportedVersion {
                found: file.format_version,
                expected: INSTRUMENT_FORMAT_VERSION,
            });
        }
        let mut constructs = Vec::with_capacity(file.constructs.len());
        for block in file.constructs {
            let scale = LikertScale::new(block.scale.min, block.scale.max)?;
            let items = block
                .items
                .into_iter()
                .map(|item| {
                    let kind = match (item.positive_pole, item.negative_pole) {
                        (None, None) => ItemKind::Likert,
                        (Some(positive_pole), Some(negative_pole)) => ItemKind::SemanticDifferential {
                            positive_pole,
                            negative_pole,
                        },
                        _ => {
                            return Err(InstrumentError::InvalidDefinition(format!(
                                "semantic-differential item `{}` needs both pole labels",
                                item.id
                            )))
                        }
                    };
                    Ok(Item {
                        id: item.id,
                        text: item.text,
                        reverse_coded: item.reverse_coded,
                        scale,
                        kind,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            constructs.push(Construct {
                id: block.id,
                name: block.name,
                category: block.category,
                source_study: block.source_study,
                baseline_study: block.baseline_study,
                human_alpha: block.human_alpha,
                scale,
                prompt: block.prompt,
                anchors: block.anchors,
                stem: block.stem,
                items,
            });
        }
        Instrument::new(constructs)
    }
}
