//! Numeric text formatting shared by every exporter.
//!
//! All numeric output is written with at least nine significant digits so
//! that plots and downstream scripts reproduce losslessly; filter taps get
//! seventeen, which round-trips f64 bit-for-bit.

use serde::Serialize;
use std::io;

/// Ten significant digits in scientific notation ("9.375000000e1").
pub fn sig9(x: f64) -> String {
    format!("{:.9e}", x)
}

/// Seventeen significant digits; parses back to the identical f64.
pub fn sig17(x: f64) -> String {
    format!("{:.16e}", x)
}

struct SigFloatFormatter;

impl serde_json::ser::Formatter for SigFloatFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(sig9(value).as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(sig9(value as f64).as_bytes())
    }
}

/// JSON serialization with floats rendered through [`sig9`].
///
/// Scientific-notation mantissa/exponent forms are valid JSON numbers, so the
/// output stays schema-compatible with ordinary parsers.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFloatFormatter);
    value
        .serialize(&mut ser)
        .expect("serialization to an in-memory buffer cannot fail");
    String::from_utf8(out).expect("serde_json emits valid utf-8")
}
