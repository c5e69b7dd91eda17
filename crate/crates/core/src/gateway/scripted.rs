//! Deterministic offline backend.
//!
//! Output is a pure function of the request (messages, seed, schema and
//! context). Free-text requests get short template replies. Questionnaire
//! requests get answers drawn so that the expected construct score equals
//! the configured mean for the persona and round:
//!
//! * a base value `floor(m)` or `ceil(m)` chosen with probability `frac(m)`,
//! * a symmetric shift of `±spread`, shared by all constructs of one
//!   administration, applied with probability `spread_prob`,
//! * independent `±1` item noise with probability `item_noise`.
//!
//! Shifts and noise are skipped when they could leave the scale, which keeps
//! them symmetric and the mean exact.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatBackend, ChatRequest, ChatRole, Completion, TransportError, TransportErrorKind, Usage};
use crate::instrument::{builtin_instrument, Instrument, InstrumentError, LikertScale};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructProfile {
    /// Expected score per round on the construct's own scale; the last value
    /// repeats for later rounds.
    pub round_means: Vec<f64>,
    #[serde(default)]
    pub spread: i64,
    #[serde(default)]
    pub spread_prob: f64,
    #[serde(default)]
    pub item_noise: f64,
    /// Shift against the shared direction.
    #[serde(default)]
    pub inverse: bool,
}

impl ConstructProfile {
    pub fn new(round_means: &[f64], spread: i64, spread_prob: f64, item_noise: f64) -> Self {
        Self {
            round_means: round_means.to_vec(),
            spread,
            spread_prob,
            item_noise,
            inverse: false,
        }
    }

    fn inverse(mut self) -> Self {
        self.inverse = true;
        self
    }

    pub fn mean_at(&self, round: u32) -> f64 {
        let i = (round.max(1) as usize - 1).min(self.round_means.len() - 1);
        self.round_means[i]
    }

    fn validate(&self, construct: &str, scale: LikertScale) -> Result<(), InstrumentError> {
        let bad = |reason: String| Err(InstrumentError::InvalidDefinition(format!("profile for `{construct}`: {reason}")));
        if self.round_means.is_empty() {
            return bad("no round means".into());
        }
        if let Some(m) = self
            .round_means
            .iter()
            .find(|m| !m.is_finite() || **m < scale.min as f64 || **m > scale.max as f64)
        {
            return bad(format!("mean {m} outside {}-{}", scale.min, scale.max));
        }
        if self.spread < 0 || !(0.0..=1.0).contains(&self.spread_prob) || !(0.0..=1.0).contains(&self.item_noise) {
            return bad("spread must be non-negative and probabilities in [0, 1]".into());
        }
        Ok(())
    }
}

pub type PersonaProfile = IndexMap<String, ConstructProfile>;

/// Per-persona answer profiles, keyed by persona id then construct id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ScriptedProfiles {
    pub personas: IndexMap<String, PersonaProfile>,
}

impl ScriptedProfiles {
    /// Profiles for the built-in recipients: `easy` answers high with little
    /// variance and grows more convinced, `hard` answers low with more
    /// variance and dips before recovering.
    pub fn builtin() -> Self {
        let mut easy = PersonaProfile::new();
        let e = |means: &[f64]| ConstructProfile::new(means, 1, 0.2, 0.2);
        easy.insert("persuasiveness".into(), e(&[5.4, 5.6, 5.8, 5.9, 6.0]));
        easy.insert("behavioral_change".into(), e(&[4.8, 5.1, 5.4, 5.6, 5.8]));
        easy.insert("attitude".into(), e(&[5.9, 6.0, 6.1, 6.2, 6.3]));
        easy.insert("intention".into(), e(&[5.8, 6.0, 6.2, 6.3, 6.4]));
        easy.insert("subjective_norms".into(), e(&[3.2, 3.3, 3.4, 3.5, 3.6]));
        easy.insert("behavioral_control".into(), e(&[5.6, 5.7, 5.8, 5.9, 6.0]));
        easy.insert("social_attractiveness".into(), e(&[6.0]));
        easy.insert("social_closeness".into(), e(&[5.6]));
        easy.insert("threat_to_freedom".into(), e(&[1.9]).inverse());
        easy.insert("meat_attachment".into(), e(&[2.1]).inverse());

        let mut hard = PersonaProfile::new();
        let h = |means: &[f64]| ConstructProfile::new(means, 2, 0.5, 0.3);
        hard.insert("persuasiveness".into(), h(&[3.4, 3.1, 3.0, 3.3, 3.6]));
        hard.insert("behavioral_change".into(), h(&[2.8, 2.5, 2.4, 2.7, 3.0]));
        hard.insert("attitude".into(), h(&[3.6, 3.1, 3.0, 3.3, 3.6]));
        hard.insert("intention".into(), h(&[3.2, 2.6, 2.5, 2.9, 3.3]));
        hard.insert("subjective_norms".into(), h(&[2.4, 2.3, 2.3, 2.4, 2.5]));
        hard.insert("behavioral_control".into(), h(&[4.6, 4.4, 4.4, 4.5, 4.7]));
        hard.insert("social_attractiveness".into(), h(&[5.0]));
        hard.insert("social_closeness".into(), h(&[4.3]));
        hard.insert("threat_to_freedom".into(), h(&[3.6]).inverse());
        hard.insert("meat_attachment".into(), h(&[3.9]).inverse());

        let mut personas = IndexMap::new();
        personas.insert("easy".into(), easy);
        personas.insert("hard".into(), hard);
        Self { personas }
    }

    pub fn get(&self, persona: &str, construct: &str) -> Option<&ConstructProfile> {
        self.personas.get(persona).and_then(|p| p.get(construct))
    }
}

pub struct ScriptedBackend {
    model_id: String,
    instrument: Instrument,
    profiles: ScriptedProfiles,
}

const EMOTIONS: [&str; 6] = ["curious", "skeptical", "hopeful", "a bit defensive", "calm", "uneasy"];
const VALUES: [&str; 6] = ["fairness", "tradition", "independence", "care for others", "health", "enjoyment"];
const DOUBTS: [&str; 5] = [
    "how practical this is day to day",
    "whether the numbers hold up",
    "what my family would say",
    "how much it would cost",
    "whether small steps make a difference",
];
const ARGUMENTS: [&str; 6] = [
    "Cutting back a few days a week already lowers the environmental footprint noticeably.",
    "Many people find that plant-based meals leave them feeling lighter and more energetic.",
    "Local vegetables and legumes are often cheaper than meat.",
    "Animal welfare in large farms is a real concern for a lot of people.",
    "You do not have to give anything up completely; swapping one meal is a start.",
    "Cooking with beans and lentils can be surprisingly filling and tasty.",
];
const REACTIONS: [&str; 6] = [
    "I see where you are coming from.",
    "I am not sure I agree with that.",
    "That is an interesting point.",
    "Honestly, I like my meals the way they are.",
    "I could maybe try that sometime.",
    "That sounds reasonable, but I have my doubts.",
];

impl ScriptedBackend {
    pub fn new(model_id: impl Into<String>, instrument: Instrument, profiles: ScriptedProfiles) -> Result<Self, InstrumentError> {
        for persona in profiles.personas.values() {
            for (construct_id, profile) in persona {
                let construct = instrument.require_construct(construct_id)?;
                profile.validate(construct_id, construct.scale)?;
            }
        }
        Ok(Self {
            model_id: model_id.into(),
            instrument,
            profiles,
        })
    }

    /// Built-in instrument and [`ScriptedProfiles::builtin`].
    pub fn with_defaults(model_id: impl Into<String>) -> Self {
        Self::new(model_id, builtin_instrument(), ScriptedProfiles::builtin()).expect("builtin profiles are valid")
    }

    fn rng(request: &ChatRequest) -> ChaCha8Rng {
        let digest: [u8; 32] = Sha256::digest(request.fingerprint().as_bytes()).into();
        ChaCha8Rng::from_seed(digest)
    }

    fn answer(&self, request: &ChatRequest, rng: &mut ChaCha8Rng) -> Result<String, TransportError> {
        let schema = request.schema.as_ref().expect("checked by caller");
        let persona = request.context.agent_id.as_str();
        let round = request.context.round;
        let shift_draw: f64 = rng.random();
        let direction: i64 = if rng.random_bool(0.5) { 1 } else { -1 };

        let mut answers = serde_json::Map::new();
        let mut bases: IndexMap<&str, i64> = IndexMap::new();
        for field in &schema.fields {
            let Some((construct, item)) = self.instrument.item(&field.id) else {
                return Err(TransportError::new(
                    TransportErrorKind::Status(400),
                    format!("unknown item `{}`", field.id),
                ));
            };
            let scale = item.scale;
            let fallback;
            let profile = match self.profiles.get(persona, &construct.id) {
                Some(p) => p,
                None => {
                    fallback = ConstructProfile::new(&[scale.midpoint()], 1, 0.5, 0.3);
                    &fallback
                }
            };
            let base = *bases.entry(construct.id.as_str()).or_insert_with(|| {
                let m = profile.mean_at(round);
                let lo = m.floor() as i64;
                let mut base = if rng.random_bool(m - m.floor()) { lo + 1 } else { lo };
                let s = profile.spread;
                if shift_draw < profile.spread_prob && base - s >= scale.min && base + s <= scale.max {
                    base += if profile.inverse { -direction } else { direction } * s;
                }
                base
            });
            let mut v = base;
            if v > scale.min && v < scale.max && rng.random_bool(profile.item_noise) {
                v += if rng.random_bool(0.5) { 1 } else { -1 };
            }
            let raw = if item.reverse_coded { scale.min + scale.max - v } else { v };
            let raw = if field.allowed.contains(&raw) { raw } else { field.allowed[0] };
            answers.insert(field.id.clone(), raw.into());
        }
        Ok(serde_json::Value::Object(answers).to_string())
    }

    fn free_text(request: &ChatRequest, rng: &mut ChaCha8Rng) -> String {
        let last = request.messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let persuader = request
            .messages
            .iter()
            .any(|m| m.role == ChatRole::System && m.content.contains("Your goal:"));
        let pick = |rng: &mut ChaCha8Rng, list: &[&'static str]| list[rng.random_range(0..list.len())];
        if last.contains("reflect privately") {
            let stance = if rng.random_bool(0.5) { "supported" } else { "challenged" };
            let note: u32 = rng.random();
            format!(
                "I feel {}. My sense of {} feels {stance} by what was said. I still wonder {}. (note {note:08x})",
                pick(rng, &EMOTIONS),
                pick(rng, &VALUES),
                pick(rng, &DOUBTS)
            )
        } else if persuader {
            format!("{} {}", pick(rng, &ARGUMENTS), pick(rng, &ARGUMENTS))
        } else {
            format!("{} I keep thinking about {}.", pick(rng, &REACTIONS), pick(rng, &DOUBTS))
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError> {
        let mut rng = Self::rng(request);
        let text = match &request.schema {
            Some(_) => self.answer(request, &mut rng)?,
            None => Self::free_text(request, &mut rng),
        };
        let prompt_chars: usize = request.messages.iter().map(|m| m.content.len()).sum();
        Ok(Completion {
            usage: Usage {
                prompt_tokens: prompt_chars as u64 / 4,
                completion_tokens: text.len() as u64 / 4,
            },
            text,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatMessage, Purpose, RequestContext};
    use crate::instrument::construct_score;

    fn request(persona: &str, construct: &str, sample: u32, round: u32) -> ChatRequest {
        let schema = builtin_instrument().response_schema(&[construct]).unwrap();
        ChatRequest::new(vec![ChatMessage::user("q")], 0.6)
            .with_seed(42)
            .with_schema(schema)
            .with_context(RequestContext {
                conversation_id: format!("{persona}-0001"),
                agent_id: persona.into(),
                round,
                purpose: Some(Purpose::Questionnaire),
                sample: Some(sample),
            })
    }

    #[test]
    fn same_request_same_output() {
        let b = ScriptedBackend::with_defaults("s");
        let r = request("hard", "intention", 1, 2);
        assert_eq!(b.send(&r).unwrap(), b.send(&r).unwrap());
        let other = request("hard", "intention", 2, 2);
        let outputs: std::collections::HashSet<String> = (1..20)
            .map(|s| b.send(&request("hard", "intention", s, 2)).unwrap().text)
            .collect();
        assert!(outputs.len() > 1, "{other:?}");
    }

    #[test]
    fn empirical_mean_tracks_profile() {
        let b = ScriptedBackend::with_defaults("s");
        let inst = builtin_instrument();
        for (persona, construct) in [("easy", "intention"), ("hard", "meat_attachment"), ("hard", "attitude")] {
            let c = inst.construct(construct).unwrap();
            let target = ScriptedProfiles::builtin().get(persona, construct).unwrap().mean_at(3);
            let n = 4000;
            let total: f64 = (0..n)
                .map(|s| {
                    let text = b.send(&request(persona, construct, s, 3)).unwrap().text;
                    let answers = inst.response_schema(&[construct]).unwrap().validate_payload(&text).unwrap();
                    construct_score(c, &answers).unwrap()
                })
                .sum();
            let mean = total / n as f64;
            assert!((mean - target).abs() < 0.1, "{persona}/{construct}: {mean} vs {target}");
        }
    }

    #[test]
    fn rejects_out_of_scale_profile() {
        let mut p = ScriptedProfiles::builtin();
        p.personas["easy"]["meat_attachment"].round_means = vec![6.0];
        assert!(ScriptedBackend::new("s", builtin_instrument(), p).is_err());
    }

    #[test]
    fn free_text_never_quotes_items() {
        let b = ScriptedBackend::with_defaults("s");
        let wordings = builtin_instrument().item_wordings();
        for seed in 0..50 {
            let r = ChatRequest::new(vec![ChatMessage::user("say something")], 0.6).with_seed(seed);
            let text = b.send(&r).unwrap().text;
            assert!(wordings.iter().all(|w| !text.contains(w.as_str())));
        }
    }
}
