//! Questionnaire battery, answer validation and construct scoring.

mod builtin;
mod file;
mod schema;

use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin_instrument, CENTRAL_CONSTRUCTS, MAQ_REVERSE_ITEMS, MULTI_ITEM_CONSTRUCTS};
pub use file::INSTRUMENT_FORMAT_VERSION;
pub use schema::{SchemaDescriptor, SchemaField, SchemaViolation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstrumentError {
    #[error("answer {value} for item `{item}` is outside the scale bounds [{min}, {max}]")]
    OutOfRange {
        item: String,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("unknown item id `{0}`")]
    UnknownItem(String),
    #[error("unknown construct id `{0}`")]
    UnknownConstruct(String),
    #[error("incomplete administration, missing items: {}", .0.join(", "))]
    MissingItems(Vec<String>),
    #[error("at least one construct is required")]
    EmptyConstructSet,
    #[error("invalid instrument definition: {0}")]
    InvalidDefinition(String),
    #[error("instrument file format version {found} is not supported (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("instrument file could not be parsed: {0}")]
    Parse(String),
}

/// An inclusive integer response scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LikertScale {
    pub min: i64,
    pub max: i64,
}

impl LikertScale {
    pub fn new(min: i64, max: i64) -> Result<Self, InstrumentError> {
        if min < 1 || min >= max {
            return Err(InstrumentError::InvalidDefinition(format!(
                "scale ({min}, {max}) must satisfy 1 <= min < max"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, value: i64) -> bool {
        (self.min..=self.max).contains(&value)
    }

    pub fn midpoint(&self) -> f64 {
        (self.min + self.max) as f64 / 2.0
    }

    pub fn values(&self) -> impl Iterator<Item = i64> {
        self.min..=self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ItemKind {
    Likert,
    /// Rated between two opposing poles; the positive pole maps to the scale
    /// maximum.
    SemanticDifferential {
        positive_pole: String,
        negative_pole: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub text: String,
    pub reverse_coded: bool,
    pub scale: LikertScale,
    pub kind: ItemKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructCategory {
    Tpb,
    SocialCost,
    Additional,
    SingleItem,
}

/// Labels for the two ends of a construct's response scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleAnchors {
    pub low: String,
    pub high: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construct {
    pub id: String,
    pub name: String,
    pub category: ConstructCategory,
    /// Study the item wordings were adapted from.
    pub source_study: Option<String>,
    /// Study whose human sample supplies the reference statistics.
    pub baseline_study: Option<String>,
    pub human_alpha: Option<f64>,
    pub scale: LikertScale,
    /// Instruction line shown above the items.
    pub prompt: String,
    pub anchors: Option<ScaleAnchors>,
    /// Leading clause that completes elliptical item wordings ("...open?").
    pub stem: Option<String>,
    pub items: Vec<Item>,
}

impl Construct {
    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|item| item.id == id)
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|item| item.id.as_str())
    }

    /// Full wording of an item as presented to a respondent.
    pub fn item_wording<'a>(&self, item: &'a Item) -> Cow<'a, str> {
        match (&self.stem, item.text.strip_prefix("...")) {
            (Some(stem), Some(rest)) => Cow::Owned(format!("{stem} {rest}")),
            _ => Cow::Borrowed(&item.text),
        }
    }

    pub fn is_multi_item(&self) -> bool {
        self.items.len() > 1
    }

    /// Copy of this construct restricted to the listed item ids, in construct
    /// order.
    pub fn restricted_to(&self, item_ids: &[String]) -> Result<Construct, InstrumentError> {
        if let Some(unknown) = item_ids.iter().find(|id| self.item(id).is_none()) {
            return Err(InstrumentError::UnknownItem(unknown.clone()));
        }
        let mut restricted = self.clone();
        restricted.items.retain(|item| item_ids.contains(&item.id));
        Ok(restricted)
    }
}

/// A complete questionnaire battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instrument {
    constructs: Vec<Construct>,
}

impl Instrument {
    pub fn new(constructs: Vec<Construct>) -> Result<Self, InstrumentError> {
        let mut construct_ids = BTreeSet::new();
        let mut item_ids = BTreeSet::new();
        for construct in &constructs {
            LikertScale::new(construct.scale.min, construct.scale.max)?;
            if !construct_ids.insert(construct.id.as_str()) {
                return Err(InstrumentError::InvalidDefinition(format!(
                    "duplicate construct id `{}`",
                    construct.id
                )));
            }
            if construct.items.is_empty() {
                return Err(InstrumentError::InvalidDefinition(format!(
                    "construct `{}` has no items",
                    construct.id
                )));
            }
            if let Some(alpha) = construct.human_alpha {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(InstrumentError::InvalidDefinition(format!(
                        "human alpha {alpha} of `{}` is outside [0, 1]",
                        construct.id
                    )));
                }
            }
            for item in &construct.items {
                if item.text.trim().is_empty() {
                    return Err(InstrumentError::InvalidDefinition(format!(
                        "item `{}` has empty text",
                        item.id
                    )));
                }
                if item.scale != construct.scale {
                    return Err(InstrumentError::InvalidDefinition(format!(
                        "item `{}` scale differs from its construct",
                        item.id
                    )));
                }
                if let ItemKind::SemanticDifferential {
                    positive_pole,
                    negative_pole,
                } = &item.kind
                {
                    if positive_pole.is_empty() || negative_pole.is_empty() {
                        return Err(InstrumentError::InvalidDefinition(format!(
                            "semantic-differential item `{}` needs both pole labels",
                            item.id
                        )));
                    }
                }
                if !item_ids.insert(item.id.as_str()) {
                    return Err(InstrumentError::InvalidDefinition(format!(
                        "duplicate item id `{}`",
                        item.id
                    )));
                }
            }
        }
        Ok(Self { constructs })
    }

    pub fn constructs(&self) -> &[Construct] {
        &self.constructs
    }

    pub fn construct(&self, id: &str) -> Option<&Construct> {
        self.constructs.iter().find(|c| c.id == id)
    }

    pub fn require_construct(&self, id: &str) -> Result<&Construct, InstrumentError> {
        self.construct(id)
            .ok_or_else(|| InstrumentError::UnknownConstruct(id.to_owned()))
    }

    /// Looks up constructs by id, preserving the instrument's order.
    pub fn select(&self, ids: &[impl AsRef<str>]) -> Result<Vec<&Construct>, InstrumentError> {
        for id in ids {
            self.require_construct(id.as_ref())?;
        }
        Ok(self
            .constructs
            .iter()
            .filter(|c| ids.iter().any(|id| id.as_ref() == c.id))
            .collect())
    }

    pub fn items(&self) -> impl Iterator<Item = (&Construct, &Item)> {
        self.constructs
            .iter()
            .flat_map(|c| c.items.iter().map(move |item| (c, item)))
    }

    pub fn item(&self, id: &str) -> Option<(&Construct, &Item)> {
        self.items().find(|(_, item)| item.id == id)
    }

    pub fn item_count(&self) -> usize {
        self.constructs.iter().map(|c| c.items.len()).sum()
    }

    /// Every wording a respondent could see, elliptical items expanded.
    pub fn item_wordings(&self) -> Vec<String> {
        self.items()
            .map(|(c, item)| c.item_wording(item).into_owned())
            .collect()
    }

    /// Sets the reverse-coding flag of a single item.
    pub fn set_reverse_coded(&mut self, item_id: &str, reverse: bool) -> Result<(), InstrumentError> {
        let item = self
            .constructs
            .iter_mut()
            .flat_map(|c| c.items.iter_mut())
            .find(|item| item.id == item_id)
            .ok_or_else(|| InstrumentError::UnknownItem(item_id.to_owned()))?;
        item.reverse_coded = reverse;
        Ok(())
    }

    /// Validates raw answers against the items of the administered constructs.
    ///
    /// All problems are collected rather than stopping at the first one.
    pub fn validate_administration(
        &self,
        admin: Administration,
    ) -> Result<ValidatedAdministration, ValidationErrors> {
        let mut issues = Vec::new();
        let mut expected: IndexMap<&str, &Item> = IndexMap::new();
        for id in &admin.constructs {
            match self.construct(id) {
                Some(c) => expected.extend(c.items.iter().map(|item| (item.id.as_str(), item))),
                None => issues.push(InstrumentError::UnknownConstruct(id.clone())),
            }
        }
        for (id, &value) in &admin.answers {
            match expected.get(id.as_str()) {
                Some(item) if !item.scale.contains(value) => {
                    issues.push(InstrumentError::OutOfRange {
                        item: id.clone(),
                        value,
                        min: item.scale.min,
                        max: item.scale.max,
                    })
                }
                Some(_) => {}
                None => issues.push(InstrumentError::UnknownItem(id.clone())),
            }
        }
        let missing: Vec<String> = expected
            .keys()
            .filter(|id| !admin.answers.contains_key(**id))
            .map(|id| id.to_string())
            .collect();
        if !missing.is_empty() {
            issues.push(InstrumentError::MissingItems(missing));
        }
        if issues.is_empty() {
            Ok(ValidatedAdministration(admin))
        } else {
            Err(ValidationErrors(issues))
        }
    }

    /// Structured-output schema for the given constructs: one required
    /// integer field per item, in instrument order.
    pub fn response_schema(&self, construct_ids: &[impl AsRef<str>]) -> Result<SchemaDescriptor, InstrumentError> {
        let constructs = self.select(construct_ids)?;
        response_schema(&constructs)
    }
}

/// Builds the structured-output schema for an ordered list of constructs.
pub fn response_schema(constructs: &[&Construct]) -> Result<SchemaDescriptor, InstrumentError> {
    if constructs.is_empty() {
        return Err(InstrumentError::EmptyConstructSet);
    }
    let fields = constructs
        .iter()
        .flat_map(|c| c.items.iter())
        .map(|item| SchemaField {
            id: item.id.clone(),
            allowed: item.scale.values().collect(),
        })
        .collect();
    let name = constructs
        .iter()
        .map(|c| c.id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    Ok(SchemaDescriptor::new(format!("questionnaire:{name}"), fields))
}

/// Scored value of a raw answer; reverse-coded items are mirrored.
pub fn score_item(item: &Item, raw: i64) -> Result<f64, InstrumentError> {
    if !item.scale.contains(raw) {
        return Err(InstrumentError::OutOfRange {
            item: item.id.clone(),
            value: raw,
            min: item.scale.min,
            max: item.scale.max,
        });
    }
    let scored = if item.reverse_coded {
        item.scale.min + item.scale.max - raw
    } else {
        raw
    };
    Ok(scored as f64)
}

/// Mean of the scored item values of one construct.
pub fn construct_score(construct: &Construct, answers: &IndexMap<String, i64>) -> Result<f64, InstrumentError> {
    let missing: Vec<String> = construct
        .item_ids()
        .filter(|id| !answers.contains_key(*id))
        .map(str::to_owned)
        .collect();
    if !missing.is_empty() {
        return Err(InstrumentError::MissingItems(missing));
    }
    let mut total = 0.0;
    for item in &construct.items {
        total += score_item(item, answers[&item.id])?;
    }
    Ok(total / construct.items.len() as f64)
}

/// One set of questionnaire answers from a recipient at one sampling of one
/// round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Administration {
    pub conversation_id: String,
    pub round: u32,
    pub sample: u32,
    pub persona_id: String,
    pub model_id: String,
    /// Constructs administered, in instrument order.
    pub constructs: Vec<String>,
    /// Raw answers keyed by item id.
    pub answers: IndexMap<String, i64>,
}

impl Administration {
    pub fn construct_score(&self, construct: &Construct) -> Result<f64, InstrumentError> {
        construct_score(construct, &self.answers)
    }
}

/// An administration whose answers have been checked against the instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedAdministration(Administration);

impl ValidatedAdministration {
    pub fn get(&self) -> &Administration {
        &self.0
    }

    pub fn into_inner(self) -> Administration {
        self.0
    }

    /// Scored values for every answered item.
    pub fn scored(&self, instrument: &Instrument) -> HashMap<String, f64> {
        self.0
            .answers
            .iter()
            .filter_map(|(id, &raw)| {
                let (_, item) = instrument.item(id)?;
                score_item(item, raw).ok().map(|v| (id.clone(), v))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid administration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<InstrumentError>);

#[cfg(test)]
mod tests {
    use super::*;

    fn answers(pairs: &[(&str, i64)]) -> IndexMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn admin(constructs: &[&str], answers: IndexMap<String, i64>) -> Administration {
        Administration {
            conversation_id: "c".into(),
            round: 1,
            sample: 1,
            persona_id: "easy".into(),
            model_id: "m".into(),
            constructs: constructs.iter().map(|s| s.to_string()).collect(),
            answers,
        }
    }

    #[test]
    fn battery_shape() {
        let inst = builtin_instrument();
        let counts: Vec<usize> = inst.constructs().iter().map(|c| c.items.len()).collect();
        assert_eq!(counts, vec![1, 1, 4, 3, 4, 2, 20, 4, 7, 7]);
        assert_eq!(inst.item_count(), 53);
        let maq = inst.construct("meat_attachment").unwrap();
        assert_eq!(maq.scale, LikertScale { min: 1, max: 5 });
        assert_eq!(maq.items.iter().filter(|i| i.reverse_coded).count(), 6);
        for c in inst.constructs().iter().filter(|c| c.id != "meat_attachment") {
            assert_eq!(c.scale, LikertScale { min: 1, max: 7 }, "{}", c.id);
        }
        let with_alpha: Vec<&str> = inst
            .constructs()
            .iter()
            .filter(|c| c.human_alpha.is_some())
            .map(|c| c.id.as_str())
            .collect();
        let mut expected = MULTI_ITEM_CONSTRUCTS.to_vec();
        expected.sort();
        let mut got = with_alpha.clone();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn elliptical_items_expand_with_stem() {
        let inst = builtin_instrument();
        let sa = inst.construct("social_attractiveness").unwrap();
        let item = sa.item("attractiveness_open").unwrap();
        assert_eq!(item.text, "...open?");
        assert_eq!(
            sa.item_wording(item),
            "To what extent do you think your interaction partner is open?"
        );
        let first = &sa.items[0];
        assert_eq!(sa.item_wording(first), first.text);
    }

    #[test]
    fn score_item_examples() {
        let inst = builtin_instrument();
        let mut reverse7 = inst.item("intention_red_meat").unwrap().1.clone();
        reverse7.reverse_coded = true;
        assert_eq!(score_item(&reverse7, 1).unwrap(), 7.0);
        let plain = inst.item("intention_red_meat").unwrap().1;
        assert_eq!(score_item(plain, 4).unwrap(), 4.0);
        let (_, sickens) = inst.items().find(|(_, i)| i.text == "Meat sickens me.").unwrap();
        assert!(sickens.reverse_coded);
        assert_eq!(score_item(sickens, 2).unwrap(), 4.0);
        assert!(matches!(
            score_item(plain, 8),
            Err(InstrumentError::OutOfRange { min: 1, max: 7, value: 8, .. })
        ));
    }

    #[test]
    fn construct_score_examples() {
        let inst = builtin_instrument();
        let intention = inst.construct("intention").unwrap();
        let a = answers(&[
            ("intention_white_meat", 5),
            ("intention_red_meat", 6),
            ("intention_processed_meat", 7),
        ]);
        assert_eq!(construct_score(intention, &a).unwrap(), 6.0);

        let p = inst.construct("persuasiveness").unwrap();
        assert_eq!(construct_score(p, &answers(&[("persuasiveness", 3)])).unwrap(), 3.0);

        let maq = inst.construct("meat_attachment").unwrap();
        let all3: IndexMap<String, i64> = maq.item_ids().map(|id| (id.to_owned(), 3)).collect();
        assert_eq!(construct_score(maq, &all3).unwrap(), 3.0);

        let partial = answers(&[("intention_white_meat", 5)]);
        match construct_score(intention, &partial) {
            Err(InstrumentError::MissingItems(ids)) => {
                assert_eq!(ids, vec!["intention_red_meat", "intention_processed_meat"])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_examples() {
        let inst = builtin_instrument();
        let ok = answers(&[
            ("intention_white_meat", 1),
            ("intention_red_meat", 2),
            ("intention_processed_meat", 7),
        ]);
        assert!(inst.validate_administration(admin(&["intention"], ok.clone())).is_ok());

        let mut high = ok.clone();
        high.insert("intention_red_meat".into(), 8);
        let err = inst.validate_administration(admin(&["intention"], high)).unwrap_err();
        assert!(matches!(err.0[0], InstrumentError::OutOfRange { value: 8, .. }));

        let mut unknown = ok.clone();
        unknown.insert("maq_99".into(), 3);
        let err = inst.validate_administration(admin(&["intention"], unknown)).unwrap_err();
        assert_eq!(err.0, vec![InstrumentError::UnknownItem("maq_99".into())]);

        let mut missing = ok;
        missing.shift_remove("intention_processed_meat");
        let err = inst.validate_administration(admin(&["intention"], missing)).unwrap_err();
        assert_eq!(
            err.0,
            vec![InstrumentError::MissingItems(vec!["intention_processed_meat".into()])]
        );
    }

    #[test]
    fn schema_examples() {
        let inst = builtin_instrument();
        let schema = inst.response_schema(&["intention"]).unwrap();
        assert_eq!(schema.fields.len(), 3);
        assert!(schema.fields.iter().all(|f| f.allowed == (1..=7).collect::<Vec<_>>()));

        let maq = inst.response_schema(&["meat_attachment"]).unwrap();
        assert_eq!(maq.fields.len(), 20);
        assert!(maq.fields.iter().all(|f| f.allowed == vec![1, 2, 3, 4, 5]));

        let empty: [&str; 0] = [];
        assert_eq!(inst.response_schema(&empty), Err(InstrumentError::EmptyConstructSet));

        // field order follows instrument order, not request order
        let mixed = inst.response_schema(&["intention", "attitude"]).unwrap();
        assert_eq!(mixed.fields[0].id, "attitude_pleasant");
    }

    #[test]
    fn subjective_norms_subset() {
        let inst = builtin_instrument();
        let sn = inst.construct("subjective_norms").unwrap();
        let two = sn
            .restricted_to(&["norms_friends".into(), "norms_family".into()])
            .unwrap();
        assert_eq!(two.items.len(), 2);
        assert!(sn.restricted_to(&["nope".into()]).is_err());
    }

    #[test]
    fn maq_reverse_flags_toggle() {
        let mut inst = builtin_instrument();
        inst.set_reverse_coded("maq_16", false).unwrap();
        assert!(!inst.item("maq_16").unwrap().1.reverse_coded);
        assert!(inst.set_reverse_coded("maq_99", true).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reverse_coding_is_an_involution(min in 1i64..4, width in 1i64..8, offset in 0i64..8) {
                let scale = LikertScale { min, max: min + width };
                let raw = min + offset % (width + 1);
                let item = Item {
                    id: "x".into(),
                    text: "x".into(),
                    reverse_coded: true,
                    scale,
                    kind: ItemKind::Likert,
                };
                let once = score_item(&item, raw).unwrap() as i64;
                prop_assert_eq!(score_item(&item, once).unwrap() as i64, raw);
            }

            #[test]
            fn construct_score_ignores_item_order(values in proptest::collection::vec(1i64..=5, 20), seed in any::<u64>()) {
                let inst = builtin_instrument();
                let maq = inst.construct("meat_attachment").unwrap();
                let a: IndexMap<String, i64> = maq.item_ids().map(str::to_owned).zip(values).collect();
                let mut shuffled = maq.clone();
                let n = shuffled.items.len();
                for i in 0..n {
                    let j = (seed as usize).wrapping_mul(i + 7) % n;
                    shuffled.items.swap(i, j);
                }
                let x = construct_score(maq, &a).unwrap();
                let y = construct_score(&shuffled, &a).unwrap();
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn midpoint_answers_score_midpoint() {
            let inst = builtin_instrument();
            for c in inst.constructs() {
                if (c.scale.min + c.scale.max) % 2 != 0 {
                    continue;
                }
                let mid = (c.scale.min + c.scale.max) / 2;
                let a: IndexMap<String, i64> = c.item_ids().map(|id| (id.to_owned(), mid)).collect();
                assert_eq!(construct_score(c, &a).unwrap(), c.scale.midpoint(), "{}", c.id);
            }
        }
    }
}
