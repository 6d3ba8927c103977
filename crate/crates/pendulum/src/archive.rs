//! JSON archive of trained policy weights.
//!
//! Matrices are nested row-major arrays: `w1` is `hidden_width × 4`, `w2` is
//! `2 × hidden_width` with the mean row first. Floats are written in the
//! shortest decimal form that reads back to the same 64-bit value, so
//! export followed by import is bit-exact.

use std::io::{Read, Write};

use pendulum_core::policy::{PolicyParameters, INPUTS, OUTPUTS};
use pendulum_core::training::TrainingConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("malformed JSON: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` should be {expected}")]
    WrongType {
        field: &'static str,
        expected: &'static str,
    },
    #[error("unsupported format_version {0} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion(u64),
    #[error("shape mismatch in `{field}`: expected {expected}, found {found}")]
    ShapeMismatch {
        field: &'static str,
        expected: String,
        found: String,
    },
    #[error("non-finite entry in `{field}` at {index}")]
    NonFinite { field: &'static str, index: String },
    #[error("invalid policy: {0}")]
    Invalid(#[from] pendulum_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ArchiveError {
    /// The offending document field, where there is one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ArchiveError::MissingField(f) => Some(f),
            ArchiveError::WrongType { field, .. }
            | ArchiveError::ShapeMismatch { field, .. }
            | ArchiveError::NonFinite { field, .. } => Some(field),
            ArchiveError::UnsupportedVersion(_) => Some("format_version"),
            _ => None,
        }
    }
}

/// Free-form provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchiveMetadata {
    pub training: Option<TrainingConfig>,
    pub seed: Option<u64>,
    pub trials_used: Option<usize>,
    pub created_unix_s: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyArchive {
    pub params: PolicyParameters,
    pub metadata: ArchiveMetadata,
}

#[derive(Serialize)]
struct Shapes {
    w1: [usize; 2],
    b1: [usize; 1],
    w2: [usize; 2],
    b2: [usize; 1],
}

#[derive(Serialize)]
struct Document<'a> {
    format_version: u64,
    hidden_width: usize,
    shapes: Shapes,
    w1: Vec<&'a [f64]>,
    b1: &'a [f64],
    w2: Vec<&'a [f64]>,
    b2: &'a [f64; OUTPUTS],
    metadata: &'a ArchiveMetadata,
}

fn document<'a>(params: &'a PolicyParameters, metadata: &'a ArchiveMetadata) -> Result<Document<'a>, ArchiveError> {
    params.validate()?;
    let h = params.hidden_width();
    Ok(Document {
        format_version: FORMAT_VERSION,
        hidden_width: h,
        shapes: Shapes {
            w1: [h, INPUTS],
            b1: [h],
            w2: [OUTPUTS, h],
            b2: [OUTPUTS],
        },
        w1: params.w1.chunks(INPUTS).collect(),
        b1: &params.b1,
        w2: params.w2.chunks(h).collect(),
        b2: &params.b2,
        metadata,
    })
}

pub fn export_policy(params: &PolicyParameters, metadata: &ArchiveMetadata) -> Result<String, ArchiveError> {
    let mut s = serde_json::to_string_pretty(&document(params, metadata)?)?;
    s.push('\n');
    Ok(s)
}

pub fn write_policy<W: Write>(
    mut out: W,
    params: &PolicyParameters,
    metadata: &ArchiveMetadata,
) -> Result<(), ArchiveError> {
    out.write_all(export_policy(params, metadata)?.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn field<'a>(obj: &'a Map<String, Value>, name: &'static str) -> Result<&'a Value, ArchiveError> {
    obj.get(name).ok_or(ArchiveError::MissingField(name))
}

fn count(obj: &Map<String, Value>, name: &'static str) -> Result<u64, ArchiveError> {
    field(obj, name)?.as_u64().ok_or(ArchiveError::WrongType {
        field: name,
        expected: "a non-negative integer",
    })
}

fn entry(v: &Value, name: &'static str, index: impl Fn() -> String) -> Result<f64, ArchiveError> {
    let non_finite = || ArchiveError::NonFinite { field: name, index: index() };
    match v {
        Value::Number(n) => n.as_f64().filter(|x| x.is_finite()).ok_or_else(non_finite),
        // serde_json writes NaN and infinities as null; other tools quote them
        Value::Null => Err(non_finite()),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "nan" | "inf" | "+inf" | "-inf" | "infinity" | "+infinity" | "-infinity" => Err(non_finite()),
            _ => Err(ArchiveError::WrongType {
                field: name,
                expected: "an array of numbers",
            }),
        },
        _ => Err(ArchiveError::WrongType {
            field: name,
            expected: "an array of numbers",
        }),
    }
}

fn array<'a>(v: &'a Value, name: &'static str, expected: &'static str) -> Result<&'a Vec<Value>, ArchiveError> {
    v.as_array().ok_or(ArchiveError::WrongType { field: name, expected })
}

fn vector(obj: &Map<String, Value>, name: &'static str, len: usize) -> Result<Vec<f64>, ArchiveError> {
    let items = array(field(obj, name)?, name, "an array of numbers")?;
    if items.len() != len {
        return Err(ArchiveError::ShapeMismatch {
            field: name,
            expected: format!("[{len}]"),
            found: format!("[{}]", items.len()),
        });
    }
    items
        .iter()
        .enumerate()
        .map(|(i, v)| entry(v, name, || format!("[{i}]")))
        .collect()
}

fn matrix(obj: &Map<String, Value>, name: &'static str, rows: usize, cols: usize) -> Result<Vec<f64>, ArchiveError> {
    let expected = "an array of arrays of numbers";
    let items = array(field(obj, name)?, name, expected)?;
    let mismatch = |found: String| ArchiveError::ShapeMismatch {
        field: name,
        expected: format!("[{rows}, {cols}]"),
        found,
    };
    if items.len() != rows {
        return Err(mismatch(format!("{} rows", items.len())));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for (i, row) in items.iter().enumerate() {
        let row = array(row, name, expected)?;
        if row.len() != cols {
            return Err(mismatch(format!("row {i} of length {}", row.len())));
        }
        for (j, v) in row.iter().enumerate() {
            out.push(entry(v, name, || format!("[{i}][{j}]"))?);
        }
    }
    Ok(out)
}

/// Parses and validates an archive. Malformed JSON, unknown versions, shape
/// mismatches and non-finite entries each give a distinct error naming the
/// field involved.
pub fn import_policy(doc: &str) -> Result<PolicyArchive, ArchiveError> {
    let root: Value = serde_json::from_str(doc)?;
    let obj = root.as_object().ok_or(ArchiveError::WrongType {
        field: "document",
        expected: "a JSON object",
    })?;
    let version = count(obj, "format_version")?;
    if version != FORMAT_VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let h = count(obj, "hidden_width")? as usize;
    if h == 0 {
        return Err(ArchiveError::ShapeMismatch {
            field: "hidden_width",
            expected: "at least 1".into(),
            found: "0".into(),
        });
    }
    let w1 = matrix(obj, "w1", h, INPUTS)?;
    let b1 = vector(obj, "b1", h)?;
    let w2 = matrix(obj, "w2", OUTPUTS, h)?;
    let b2 = vector(obj, "b2", OUTPUTS)?;
    let metadata = match obj.get("metadata") {
        None | Some(Value::Null) => ArchiveMetadata::default(),
        Some(v) => ArchiveMetadata::deserialize(v).map_err(|_| ArchiveError::WrongType {
            field: "metadata",
            expected: "an object of provenance fields",
        })?,
    };
    let params = PolicyParameters {
        w1,
        b1,
        w2,
        b2: [b2[0], b2[1]],
    };
    params.validate()?;
    Ok(PolicyArchive { params, metadata })
}

pub fn read_policy<R: Read>(mut input: R) -> Result<PolicyArchive, ArchiveError> {
    let mut doc = String::new();
    input.read_to_string(&mut doc)?;
    import_policy(&doc)
}
