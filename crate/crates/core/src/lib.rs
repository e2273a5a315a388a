//! Layerwise hidden-state similarity analysis for question answering.
//!
//! The crate prepares a labeled QA corpus, reads per-layer last-token hidden
//! states for every answer, measures how close each answer sits to the
//! true-answer and false-answer groups at every layer, tests whether own-group
//! and cross-group similarities differ, and locates layers where the
//! separation breaks down.
//!
//! Stages, in pipeline order:
//!
//! - [`corpus`]: parse, normalize and select question/answer pairs
//! - [`augment`]: ROUGE-1 ranking of paraphrases to fill answer groups
//! - [`bundle`]: hidden-state interchange format, prompts, synthetic bundles
//! - [`simkit`]: cosine similarity matrices and category averages
//! - [`stats`]: normality, Levene and t-tests
//! - [`layerscan`]: weak-layer criteria and their mode/frequency summaries
//! - [`report`]: CSV/SVG renderings and summary tables
//! - [`pipeline`]: run-directory stages used by the CLI

pub mod augment;
pub mod bundle;
pub mod corpus;
pub mod error;
pub mod layerscan;
pub mod pipeline;
pub mod report;
pub mod simkit;
pub mod stats;

pub use error::{Error, Result};

/// Serializes a boolean label as `0`/`1`, accepting either form on input.
pub(crate) mod label01 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Bool(b) => Ok(b),
            serde_json::Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
            serde_json::Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
            other => Err(de::Error::custom(format!("label must be 0 or 1, got {other}"))),
        }
    }
}

/// JSON has no infinities; degenerate statistics are written as the strings
/// `"inf"`, `"-inf"` or `"nan"` and read back.
pub(crate) mod float_ext {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| de::Error::custom("bad number")),
            serde_json::Value::String(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(de::Error::custom(format!("expected a number, got {s:?}"))),
            },
            other => Err(de::Error::custom(format!("expected a number, got {other}"))),
        }
    }
}
