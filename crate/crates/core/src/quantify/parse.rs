//! Strict extraction of the single JSON object a completion must contain.

use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::schema::{validate_review_scores, ReviewScores, SchemaError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResponseError {
    #[error("no JSON object in completion")]
    NoObject,
    #[error("unexpected text before the JSON object")]
    LeadingContent,
    #[error("unexpected text after the JSON object")]
    TrailingContent,
    #[error("more than one JSON object in completion")]
    MultipleObjects,
    #[error("unbalanced braces")]
    Unbalanced,
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("schema violation: {0}")]
    Validation(SchemaError),
}

impl ResponseError {
    pub fn is_validation(&self) -> bool {
        matches!(self, ResponseError::Validation(_))
    }
}

/// Object entries in source order, repeated keys preserved.
struct Entries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// Strips one surrounding ``` fence (with optional language tag).
fn unfence(s: &str) -> &str {
    let Some(rest) = s.strip_prefix("```") else {
        return s;
    };
    let Some(inner) = rest.trim_end().strip_suffix("```") else {
        return s;
    };
    match inner.find('\n') {
        Some(nl) if inner[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric()) => &inner[nl + 1..],
        _ => inner,
    }
}

/// Byte index one past the brace closing the object that opens at 0.
fn object_end(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, b) in s.bytes().enumerate() {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Returns the single object's text, or why the completion is unusable.
pub fn extract_object(raw: &str) -> Result<&str, ResponseError> {
    let body = unfence(raw.trim()).trim();
    let start = body.find('{').ok_or(ResponseError::NoObject)?;
    if start != 0 {
        return Err(ResponseError::LeadingContent);
    }
    let end = object_end(body).ok_or(ResponseError::Unbalanced)?;
    let rest = body[end..].trim();
    if !rest.is_empty() {
        return Err(if rest.contains('{') {
            ResponseError::MultipleObjects
        } else {
            ResponseError::TrailingContent
        });
    }
    Ok(&body[..end])
}

/// Parses a completion into a validated record.
pub fn parse_llm_response(raw: &str) -> Result<ReviewScores, ResponseError> {
    let obj = extract_object(raw)?;
    let Entries(entries) = serde_json::from_str(obj).map_err(|e| ResponseError::Json(e.to_string()))?;
    validate_review_scores(entries.iter().map(|(k, v)| (k.as_str(), v))).map_err(ResponseError::Validation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantify::prompt::EXAMPLE_OUTPUT;
    use crate::schema::{Language, ReviewField};
    use proptest::prelude::*;

    #[test]
    fn table9_parses() {
        let s = parse_llm_response(EXAMPLE_OUTPUT).unwrap();
        assert!(s.flag(ReviewField::IsPro));
        assert_eq!(s.language(), Language::English);
    }

    #[test]
    fn fences_and_whitespace() {
        assert!(parse_llm_response(&format!("```json\n{EXAMPLE_OUTPUT}\n```")).is_ok());
        assert!(parse_llm_response(&format!("```\n{EXAMPLE_OUTPUT}\n```\n")).is_ok());
        assert!(parse_llm_response(&format!("\n  {EXAMPLE_OUTPUT}  \n")).is_ok());
    }

    #[test]
    fn rejections() {
        assert_eq!(
            parse_llm_response(&format!("{EXAMPLE_OUTPUT}{EXAMPLE_OUTPUT}")).unwrap_err(),
            ResponseError::MultipleObjects
        );
        assert_eq!(
            parse_llm_response(&format!("Sure! {EXAMPLE_OUTPUT}")).unwrap_err(),
            ResponseError::LeadingContent
        );
        assert_eq!(
            parse_llm_response(&format!("{EXAMPLE_OUTPUT} hope this helps")).unwrap_err(),
            ResponseError::TrailingContent
        );
        assert_eq!(parse_llm_response("I cannot do that").unwrap_err(), ResponseError::NoObject);
        assert_eq!(parse_llm_response("{\"a\": 1").unwrap_err(), ResponseError::Unbalanced);
        let trailing_comma = EXAMPLE_OUTPUT.replace('}', ",}");
        assert!(matches!(parse_llm_response(&trailing_comma), Err(ResponseError::Json(_))));
        let seven = EXAMPLE_OUTPUT.replace("\"Gameplay\": 0", "\"Gameplay\": 7");
        match parse_llm_response(&seven).unwrap_err() {
            ResponseError::Validation(e) => assert_eq!(e.field(), Some("Gameplay")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn braces_inside_strings() {
        let s = EXAMPLE_OUTPUT.replace('{', "{\"note\": \"}{\\\"\",");
        assert!(parse_llm_response(&s).is_ok());
    }

    #[test]
    fn repeated_key_conflict() {
        let s = EXAMPLE_OUTPUT.replace("\"Story\": 0", "\"Story\": 0,\"Story\": 3");
        match parse_llm_response(&s).unwrap_err() {
            ResponseError::Validation(SchemaError::ConflictViolation(f)) => assert_eq!(f, "Story"),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip(bin in proptest::array::uniform8(0i64..=1), lang in 1i64..=11, elems in proptest::array::uniform12(0i64..=5)) {
            let mut v = [0i64; 20];
            v[..8].copy_from_slice(&bin);
            v[6] = lang;
            v[8..].copy_from_slice(&elems);
            let s = ReviewScores::from_values(v).unwrap();
            prop_assert_eq!(parse_llm_response(&s.to_json()).unwrap(), s);
        }
    }
}
