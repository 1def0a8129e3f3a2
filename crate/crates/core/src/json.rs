//! Canonical JSON output: UTF-8, two-space indentation, keys sorted
//! lexicographically at every level, trailing newline.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Renders `value` canonically. Struct fields are routed through
/// `serde_json::Value`, whose map type keeps keys sorted.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

pub fn write_canonical<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = to_canonical_string(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
