//! Line-delimited dataset records.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id": str, "prompt": str, "response_a": str, "response_b": str,
//!  "source": "multipref" | "helpsteer2",
//!  "judgments": [{"annotator": str, "label": -2..=2}
//!              | {"annotator": str, "score_a": 1..=5, "score_b": 1..=5}]}
//! ```
//!
//! Field names of foreign dumps can be remapped with a [`FieldMap`].

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::types::{AnnotatorJudgment, PreferenceLabel, PreferencePair, Source};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// Judgments carry signed five-way labels.
    MultiPref,
    /// Judgments carry a pair of Likert scores.
    HelpSteer2,
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multipref" => Ok(Schema::MultiPref),
            "helpsteer2" => Ok(Schema::HelpSteer2),
            other => Err(Error::invalid(format!("unknown schema {other:?}"))),
        }
    }
}

impl Schema {
    fn source(self) -> Source {
        match self {
            Schema::MultiPref => Source::MultiPref,
            Schema::HelpSteer2 => Source::HelpSteer2,
        }
    }
}

/// Record field names. Defaults match the native record format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub id: String,
    pub prompt: String,
    pub response_a: String,
    pub response_b: String,
    pub source: String,
    pub judgments: String,
    pub annotator: String,
    pub label: String,
    pub score_a: String,
    pub score_b: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            prompt: "prompt".into(),
            response_a: "response_a".into(),
            response_b: "response_b".into(),
            source: "source".into(),
            judgments: "judgments".into(),
            annotator: "annotator".into(),
            label: "label".into(),
            score_a: "score_a".into(),
            score_b: "score_b".into(),
        }
    }
}

impl FieldMap {
    /// Reads a TOML table of `field = "foreign_name"` overrides.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("field map: {e}")))
    }
}

/// Reads a dataset file with the default field names.
pub fn ingest_dataset(path: impl AsRef<Path>, schema: Schema) -> Result<Vec<PreferencePair>> {
    ingest_dataset_with(path, schema, &FieldMap::default())
}

pub fn ingest_dataset_with(path: impl AsRef<Path>, schema: Schema, fields: &FieldMap) -> Result<Vec<PreferencePair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(BufReader::new(file), Some(schema), fields).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Reads records from any buffered source. With `schema = None` both judgment forms are
/// accepted (the normalized format written by [`write_records`]).
pub fn read_records(reader: impl BufRead, schema: Option<Schema>, fields: &FieldMap) -> Result<Vec<PreferencePair>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = parse_record(&line, schema, fields).map_err(|e| match e {
            Error::Parse { .. } => e,
            other => Error::Parse {
                line: line_no,
                message: other.to_string(),
            },
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Reads the normalized dataset format (either judgment form allowed).
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<PreferencePair>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(BufReader::new(file), None, &FieldMap::default())
}

fn parse_record(line: &str, schema: Option<Schema>, fields: &FieldMap) -> Result<PreferencePair> {
    let value: Value = serde_json::from_str(line).map_err(|e| Error::invalid(format!("malformed record: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::invalid("record is not an object"))?;

    let source = match obj.get(&fields.source) {
        None | Some(Value::Null) => schema.map(Schema::source).unwrap_or_default(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|_| Error::invalid(format!("unknown source {v}")))?,
    };
    let judgments = obj
        .get(&fields.judgments)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::invalid(format!("missing array field {:?}", fields.judgments)))?
        .iter()
        .map(|j| parse_judgment(j, schema, fields))
        .collect::<Result<Vec<_>>>()?;

    let pair = PreferencePair {
        id: id_field(obj, &fields.id)?,
        prompt: str_field(obj, &fields.prompt)?,
        response_a: str_field(obj, &fields.response_a)?,
        response_b: str_field(obj, &fields.response_b)?,
        judgments,
        source,
    };
    pair.validate()?;
    Ok(pair)
}

fn parse_judgment(value: &Value, schema: Option<Schema>, fields: &FieldMap) -> Result<AnnotatorJudgment> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::invalid("judgment is not an object"))?;
    let annotator = id_field(obj, &fields.annotator)?;
    let has_scores = obj.contains_key(&fields.score_a) || obj.contains_key(&fields.score_b);
    let has_label = obj.contains_key(&fields.label);
    match (schema, has_scores, has_label) {
        (Some(Schema::MultiPref), _, false) => {
            return Err(Error::invalid(format!("judgment by {annotator} has no label")))
        }
        (Some(Schema::HelpSteer2), false, _) => {
            return Err(Error::invalid(format!("judgment by {annotator} has no scores")))
        }
        _ => {}
    }
    if has_scores {
        let a = int_field(obj, &fields.score_a)?;
        let b = int_field(obj, &fields.score_b)?;
        let judgment = AnnotatorJudgment::from_scores(annotator, a, b)?;
        if has_label {
            let label = PreferenceLabel::new(int_field(obj, &fields.label)?)?;
            if label != judgment.label {
                return Err(Error::invalid(format!(
                    "label {label} inconsistent with scores ({a}, {b})"
                )));
            }
        }
        Ok(judgment)
    } else if has_label {
        let label = PreferenceLabel::new(int_field(obj, &fields.label)?)?;
        Ok(AnnotatorJudgment::from_label(annotator, label))
    } else {
        Err(Error::invalid(format!("judgment by {annotator} has neither label nor scores")))
    }
}

fn str_field(obj: &Map<String, Value>, key: &str) -> Result<String> {
    obj.get(key)
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| Error::invalid(format!("missing string field {key:?}")))
}

/// Ids may be strings or integers in foreign dumps.
fn id_field(obj: &Map<String, Value>, key: &str) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        _ => Err(Error::invalid(format!("missing id field {key:?}"))),
    }
}

fn int_field(obj: &Map<String, Value>, key: &str) -> Result<i64> {
    obj.get(key)
        .and_then(Value::as_i64)
        .ok_or_else(|| Error::invalid(format!("missing integer field {key:?}")))
}

pub fn record_json(pair: &PreferencePair) -> Value {
    let judgments: Vec<Value> = pair
        .judgments
        .iter()
        .map(|j| match j.raw_scores {
            Some((a, b)) => json!({
                "annotator": j.annotator_id,
                "score_a": a.value(),
                "score_b": b.value(),
            }),
            None => json!({"annotator": j.annotator_id, "label": j.label.value()}),
        })
        .collect();
    json!({
        "id": pair.id,
        "prompt": pair.prompt,
        "response_a": pair.response_a,
        "response_b": pair.response_b,
        "source": pair.source,
        "judgments": judgments,
    })
}

/// Writes pairs in the normalized record format, one per line.
pub fn write_records(mut out: impl Write, pairs: &[PreferencePair]) -> std::io::Result<()> {
    for pair in pairs {
        serde_json::to_writer(&mut out, &record_json(pair))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, schema: Schema) -> Result<Vec<PreferencePair>> {
        read_records(text.as_bytes(), Some(schema), &FieldMap::default())
    }

    const MP: &str = r#"{"id":"1","prompt":"hi","response_a":"a","response_b":"b","source":"multipref","judgments":[{"annotator":"x","label":2},{"annotator":"y","label":-1}]}
{"id":"2","prompt":"yo","response_a":"c","response_b":"d","source":"multipref","judgments":[{"annotator":"x","label":0}]}
"#;

    #[test]
    fn two_line_file_gives_two_pairs_in_order() {
        let pairs = read(MP, Schema::MultiPref).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].id, "1");
        assert_eq!(pairs[1].id, "2");
        assert_eq!(pairs[0].judgments[1].label.value(), -1);
    }

    #[test]
    fn helpsteer_scores_become_labels() {
        let line = r#"{"id":"h","prompt":"p","response_a":"a","response_b":"b","source":"helpsteer2","judgments":[{"annotator":"x","score_a":4,"score_b":2}]}"#;
        let pairs = read(line, Schema::HelpSteer2).unwrap();
        assert_eq!(pairs[0].judgments[0].label.value(), 2);
        assert_eq!(pairs[0].source, Source::HelpSteer2);
    }

    #[test]
    fn score_out_of_range_names_line() {
        let text = format!(
            "{}\n{}",
            r#"{"id":"h","prompt":"p","response_a":"a","response_b":"b","judgments":[{"annotator":"x","score_a":4,"score_b":2}]}"#,
            r#"{"id":"h2","prompt":"p","response_a":"a","response_b":"b","judgments":[{"annotator":"x","score_a":6,"score_b":2}]}"#
        );
        let err = read(&text, Schema::HelpSteer2).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("score out of range"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_and_duplicates_rejected() {
        let err = read("{\"id\": 1,\n", Schema::MultiPref).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let dup = r#"{"id":"1","prompt":"hi","response_a":"a","response_b":"b","judgments":[{"annotator":"x","label":2},{"annotator":"x","label":1}]}"#;
        let err = read(dup, Schema::MultiPref).unwrap_err();
        assert!(err.to_string().contains("duplicate annotator"), "{err}");
    }

    #[test]
    fn schema_enforces_judgment_form() {
        let scores_only = r#"{"id":"1","prompt":"hi","response_a":"a","response_b":"b","judgments":[{"annotator":"x","score_a":2,"score_b":1}]}"#;
        assert!(read(scores_only, Schema::MultiPref).is_err());
        let label_only = r#"{"id":"1","prompt":"hi","response_a":"a","response_b":"b","judgments":[{"annotator":"x","label":1}]}"#;
        assert!(read(label_only, Schema::HelpSteer2).is_err());
    }

    #[test]
    fn field_map_renames() {
        let fields = FieldMap::from_toml("prompt = \"question\"\njudgments = \"ratings\"\nannotator = \"worker\"\n").unwrap();
        let line = r#"{"id":7,"question":"hi","response_a":"a","response_b":"b","ratings":[{"worker":"w","label":-2}]}"#;
        let pairs = read_records(line.as_bytes(), Some(Schema::MultiPref), &fields).unwrap();
        assert_eq!(pairs[0].id, "7");
        assert_eq!(pairs[0].prompt, "hi");
        assert_eq!(pairs[0].source, Source::MultiPref);
    }

    #[test]
    fn normalized_round_trip() {
        let pairs = read(MP, Schema::MultiPref).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &pairs).unwrap();
        let again = read_records(buf.as_slice(), None, &FieldMap::default()).unwrap();
        assert_eq!(pairs, again);
    }
}
