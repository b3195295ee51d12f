//! Compact JSON serialization with floats at 17 significant digits.
//!
//! 17 digits pin every `f64` uniquely, so a written value parses back
//! bitwise-identical and equal data always serializes to equal bytes —
//! the property the manifest, checkpoint, and log formats rely on.
//! The read side depends on serde_json's `float_roundtrip` feature;
//! without it parsing is best-effort and can land one ulp off.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::{CliError, CliResult};

/// Formatter that writes every float as `{:.16e}` (one digit before the
/// point, sixteen after) and leaves all other tokens compact.
pub struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{:.16e}", value)
    }
}

/// Serializes a value to compact JSON with exact floats.
pub fn to_string<T: Serialize>(value: &T) -> CliResult<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, ExactFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::validation(format!("could not serialize: {}", e)))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
