//! JSON structure documents.
//!
//! Serialization is canonical: keys sorted, two-space indentation, integers
//! printed as integers, ratios in shortest round-trip decimal form, and a
//! trailing newline. Equal structures always produce identical bytes.

use serde_json::{Map, Number, Value};
use thiserror::Error;

use super::{validate_structure, BlockType, NetworkStructure, SuperBlock, Violation};

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("MALFORMED_DOCUMENT: {0}")]
    MalformedDocument(String),
    #[error("SCHEMA_VIOLATION{}: {message}", fmt_index(.index))]
    SchemaViolation { index: Option<usize>, message: String },
    #[error("INVARIANT_VIOLATION{}: {}", fmt_index(&.violation.index), .violation)]
    InvariantViolation { violation: Violation },
}

impl StructureError {
    pub fn code(&self) -> &'static str {
        match self {
            StructureError::MalformedDocument(_) => "MALFORMED_DOCUMENT",
            StructureError::SchemaViolation { .. } => "SCHEMA_VIOLATION",
            StructureError::InvariantViolation { .. } => "INVARIANT_VIOLATION",
        }
    }

    /// Offending super-block, when the error is local to one.
    pub fn index(&self) -> Option<usize> {
        match self {
            StructureError::MalformedDocument(_) => None,
            StructureError::SchemaViolation { index, .. } => *index,
            StructureError::InvariantViolation { violation } => violation.index,
        }
    }
}

fn fmt_index(index: &Option<usize>) -> String {
    match index {
        Some(i) => format!(" at super-block {i}"),
        None => String::new(),
    }
}

const NET_KEYS: [&str; 4] = ["name", "num_classes", "resolution", "superblocks"];
const BLOCK_KEYS: [&str; 6] = ["depth", "kernel", "ratio", "stride", "type", "width"];

fn schema(index: Option<usize>, message: impl Into<String>) -> StructureError {
    StructureError::SchemaViolation {
        index,
        message: message.into(),
    }
}

fn check_keys(obj: &Map<String, Value>, expected: &[&str], index: Option<usize>) -> Result<(), StructureError> {
    for key in expected {
        if !obj.contains_key(*key) {
            return Err(schema(index, format!("missing field `{key}`")));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(schema(index, format!("unexpected field `{extra}`")));
    }
    Ok(())
}

fn get_u32(obj: &Map<String, Value>, key: &str, index: Option<usize>) -> Result<u32, StructureError> {
    obj[key]
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| schema(index, format!("field `{key}` must be a non-negative 32-bit integer")))
}

fn parse_block(value: &Value, index: usize) -> Result<SuperBlock, StructureError> {
    let at = Some(index);
    let obj = value
        .as_object()
        .ok_or_else(|| schema(at, "super-block must be an object"))?;
    check_keys(obj, &BLOCK_KEYS, at)?;
    let block_type = obj["type"]
        .as_str()
        .ok_or_else(|| schema(at, "field `type` must be a string"))?
        .parse::<BlockType>()
        .map_err(|e| schema(at, e.to_string()))?;
    let ratio = obj["ratio"]
        .as_f64()
        .ok_or_else(|| schema(at, "field `ratio` must be a number"))?;
    Ok(SuperBlock {
        block_type,
        depth: get_u32(obj, "depth", at)?,
        width: get_u32(obj, "width", at)?,
        stride: get_u32(obj, "stride", at)?,
        kernel: get_u32(obj, "kernel", at)?,
        ratio,
    })
}

/// Parses a structure document and checks all invariants.
pub fn parse_structure(document: &str) -> Result<NetworkStructure, StructureError> {
    let net = parse_document(document)?;
    if let Some(violation) = validate_structure(&net).into_iter().next() {
        return Err(StructureError::InvariantViolation { violation });
    }
    Ok(net)
}

/// Schema-only parse: field names and types are checked, structural
/// invariants are not.
pub fn parse_document(document: &str) -> Result<NetworkStructure, StructureError> {
    let value: Value =
        serde_json::from_str(document).map_err(|e| StructureError::MalformedDocument(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema(None, "top level must be an object"))?;
    check_keys(obj, &NET_KEYS, None)?;

    let name = obj["name"]
        .as_str()
        .ok_or_else(|| schema(None, "field `name` must be a string"))?
        .to_string();
    let resolution = get_u32(obj, "resolution", None)?;
    let num_classes = get_u32(obj, "num_classes", None)?;
    let superblocks = obj["superblocks"]
        .as_array()
        .ok_or_else(|| schema(None, "field `superblocks` must be an array"))?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_block(v, i))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(NetworkStructure {
        name,
        resolution,
        num_classes,
        superblocks,
    })
}

fn ratio_number(ratio: f64) -> Value {
    Number::from_f64(ratio).map(Value::Number).unwrap_or(Value::Null)
}

pub(crate) fn block_to_value(b: &SuperBlock) -> Value {
    // keys inserted in sorted order so the output is canonical even when
    // serde_json is built with `preserve_order`
    let mut m = Map::new();
    m.insert("depth".into(), Value::from(b.depth));
    m.insert("kernel".into(), Value::from(b.kernel));
    m.insert("ratio".into(), ratio_number(b.ratio));
    m.insert("stride".into(), Value::from(b.stride));
    m.insert("type".into(), Value::from(b.block_type.as_str()));
    m.insert("width".into(), Value::from(b.width));
    Value::Object(m)
}

pub(crate) fn structure_to_value(net: &NetworkStructure) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), Value::from(net.name.as_str()));
    m.insert("num_classes".into(), Value::from(net.num_classes));
    m.insert("resolution".into(), Value::from(net.resolution));
    m.insert(
        "superblocks".into(),
        Value::Array(net.superblocks.iter().map(block_to_value).collect()),
    );
    Value::Object(m)
}

/// Canonical JSON text for `net`.
pub fn serialize_structure(net: &NetworkStructure) -> String {
    let mut s = serde_json::to_string_pretty(&structure_to_value(net)).expect("JSON values always serialize");
    s.push('\n');
    s
}
