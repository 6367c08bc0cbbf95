//! Deterministic CSV/JSON writers.
//!
//! Every floating-point number is serialized with 17 significant digits so
//! outputs round-trip exactly and reruns are byte-identical.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// 17 significant digits; non-finite values keep Rust's spelling (`NaN`,
/// `inf`, `-inf`), which `f64::from_str` parses back.
pub fn fmt_f64(value: f64) -> String {
    if value.is_finite() {
        format!("{:.16e}", value)
    } else {
        value.to_string()
    }
}

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", value)
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", value)
    }
}

/// JSON with 17-significant-digit floats and a trailing newline. Non-finite
/// floats serialize as null, as usual for JSON.
pub fn to_json(value: &impl Serialize) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Comma-separated, header row, `\n` line endings, UTF-8.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{:02x}", b)).collect()
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_17_digits() {
        for &x in &[
            0.1,
            1.0 / 3.0,
            2.0f64.sqrt(),
            6.02e23,
            -1.2345678901234567e-8,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{}", s);
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert!("NaN".parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn json_uses_sig_digit_floats_and_null_for_nan() {
        #[derive(Serialize)]
        struct Payload {
            x: f64,
            bad: f64,
            n: u32,
        }
        let s = to_json(&Payload {
            x: 0.5,
            bad: f64::NAN,
            n: 7,
        })
        .unwrap();
        assert!(s.contains("5.0000000000000000e-1"), "{}", s);
        assert!(s.contains("\"bad\":null"), "{}", s);
        assert!(s.contains("\"n\":7"));
    }
}
