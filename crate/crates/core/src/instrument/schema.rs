use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// One required integer answer field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaField {
    pub id: String,
    pub allowed: Vec<i64>,
}

/// Machine-readable description of a structured questionnaire answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub name: String,
    pub fields: Vec<SchemaField>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaViolation {
    #[error("payload is not valid JSON: {0}")]
    Unparseable(String),
    #[error("payload is not a JSON object")]
    NotAnObject,
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unexpected field `{0}`")]
    UnknownField(String),
    #[error("field `{field}` is not an integer: {value}")]
    NonInteger { field: String, value: String },
    #[error("field `{field}` value {value} is not one of the allowed values")]
    OutOfEnum { field: String, value: i64 },
    #[error("schema is not a questionnaire schema: {0}")]
    MalformedSchema(String),
}

impl SchemaDescriptor {
    pub fn new(name: impl Into<String>, fields: Vec<SchemaField>) -> Self {
        Self {
            name: name.into(),
            fields,
        }
    }

    pub fn field(&self, id: &str) -> Option<&SchemaField> {
        self.fields.iter().find(|f| f.id == id)
    }

    /// JSON Schema object: integer properties with enumerated values, all
    /// required, no additional properties.
    pub fn to_json_schema(&self) -> Value {
        let mut properties = Map::new();
        for field in &self.fields {
            properties.insert(
                field.id.clone(),
                json!({ "type": "integer", "enum": field.allowed }),
            );
        }
        let required: Vec<&str> = self.fields.iter().map(|f| f.id.as_str()).collect();
        json!({
            "type": "object",
            "properties": properties,
            "required": required,
            "additionalProperties": false,
        })
    }

    /// The `response_format` parameter of a chat-completions request.
    pub fn to_response_format(&self) -> Value {
        json!({
            "type": "json_schema",
            "json_schema": {
                "name": wire_name(&self.name),
                "strict": true,
                "schema": self.to_json_schema(),
            }
        })
    }

    /// Inverse of [`to_response_format`](Self::to_response_format).
    pub fn from_response_format(value: &Value) -> Result<Self, SchemaViolation> {
        let inner = value
            .get("json_schema")
            .ok_or_else(|| SchemaViolation::MalformedSchema("missing json_schema".into()))?;
        let name = inner
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| SchemaViolation::MalformedSchema("missing name".into()))?;
        let schema = inner
            .get("schema")
            .ok_or_else(|| SchemaViolation::MalformedSchema("missing schema".into()))?;
        let mut descriptor = Self::from_json_schema(schema)?;
        descriptor.name = name.to_owned();
        Ok(descriptor)
    }

    pub fn from_json_schema(schema: &Value) -> Result<Self, SchemaViolation> {
        let properties = schema
            .get("properties")
            .and_then(Value::as_object)
            .ok_or_else(|| SchemaViolation::MalformedSchema("missing properties".into()))?;
        let mut fields = Vec::with_capacity(properties.len());
        for (id, spec) in properties {
            let allowed = spec
                .get("enum")
                .and_then(Value::as_array)
                .ok_or_else(|| SchemaViolation::MalformedSchema(format!("`{id}` has no enum")))?
                .iter()
                .map(|v| {
                    v.as_i64().ok_or_else(|| {
                        SchemaViolation::MalformedSchema(format!("`{id}` enum is not integral"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            fields.push(SchemaField {
                id: id.clone(),
                allowed,
            });
        }
        Ok(Self {
            name: String::new(),
            fields,
        })
    }

    /// Prose restatement used when re-asking a model for a valid answer.
    pub fn describe(&self) -> String {
        let mut out = String::from(
            "Reply with a single JSON object and nothing else. It must contain exactly these integer fields:\n",
        );
        for field in &self.fields {
            let (lo, hi) = (field.allowed.first(), field.allowed.last());
            if let (Some(lo), Some(hi)) = (lo, hi) {
                out.push_str(&format!("- \"{}\": an integer from {lo} to {hi}\n", field.id));
            }
        }
        out
    }

    /// Parses and checks a model's answer payload. Code fences and text
    /// around the outermost JSON object are tolerated; the values are not.
    pub fn validate_payload(&self, payload: &str) -> Result<IndexMap<String, i64>, SchemaViolation> {
        let body = extract_object(payload);
        let value: Value = serde_json::from_str(body).map_err(|e| SchemaViolation::Unparseable(e.to_string()))?;
        let object = value.as_object().ok_or(SchemaViolation::NotAnObject)?;
        if let Some(extra) = object.keys().find(|k| self.field(k).is_none()) {
            return Err(SchemaViolation::UnknownField(extra.clone()));
        }
        let mut answers = IndexMap::with_capacity(self.fields.len());
        for field in &self.fields {
            let value = object
                .get(&field.id)
                .ok_or_else(|| SchemaViolation::MissingField(field.id.clone()))?;
            let number = value
                .as_i64()
                .filter(|_| value.is_i64() || value.is_u64())
                .ok_or_else(|| SchemaViolation::NonInteger {
                    field: field.id.clone(),
                    value: value.to_string(),
                })?;
            if !field.allowed.contains(&number) {
                return Err(SchemaViolation::OutOfEnum {
                    field: field.id.clone(),
                    value: number,
                });
            }
            answers.insert(field.id.clone(), number);
        }
        Ok(answers)
    }

    /// Hex SHA-256 of the canonical wire form.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_response_format()).expect("schema serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Endpoints restrict schema names to `[a-zA-Z0-9_-]`.
fn wire_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn extract_object(payload: &str) -> &str {
    match (payload.find('{'), payload.rfind('}')) {
        (Some(start), Some(end)) if start < end => &payload[start..=end],
        _ => payload.trim(),
    }
}
